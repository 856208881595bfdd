//! Random model-level workloads: processes issuing arbitrary memory
//! operations, permission changes and messages, with no protocol logic.

#![allow(dead_code)]

use std::rc::Rc;

use bytes::Bytes;
use mnm_core::model::{ChangePolicy, Permission, RegId, RegName, RegionId, RegionSpec};
use mnm_core::sim::checks::{determinism, memory_semantics, Verdict};
use mnm_core::sim::{
    checks, run, Action, Actor, Ctx, DecisionPath, FaultSpec, FnProtocol, Role, RunOutcome, RunSetup, StopRule,
    Synchrony, Trace,
};
use mnm_core::{Mid, Pid, SystemConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Regions every memory hosts, one per change policy.
pub const POLICIES: [ChangePolicy; 4] =
    [ChangePolicy::RevokeToReadOnly, ChangePolicy::Static, ChangePolicy::ExclusiveWriter, ChangePolicy::Static];

pub fn regions(n: usize) -> Vec<RegionSpec> {
    let perms = [
        Permission::single_writer(Pid(1), n),
        Permission::open(n),
        Permission::exclusive(Pid(1), n),
        Permission::read_only(n),
    ];
    perms
        .into_iter()
        .zip(POLICIES)
        .enumerate()
        .map(|(i, (permission, policy))| RegionSpec { id: RegionId(i as u16), permission, policy })
        .collect()
}

#[derive(Clone, Debug)]
pub enum Step {
    Read { mem: Mid, regs: Vec<RegId> },
    Write { mem: Mid, items: Vec<(RegId, Bytes)> },
    Grant { mem: Mid, region: RegionId, permission: Permission },
    /// A read on `mem` issued concurrently with a write on `other`.
    Overlap { mem: Mid, other: Mid, reg: RegId, value: Bytes },
    Send { to: Pid, payload: Bytes },
    Drain,
    Sleep(u64),
    Decide(Bytes),
}

#[derive(Clone, Debug)]
pub struct Workload {
    pub setup: RunSetup,
    pub programs: Vec<Vec<Step>>,
}

fn reg(rng: &mut ChaCha8Rng) -> RegId {
    RegId::new(RegionId(rng.gen_range(0..POLICIES.len() as u16)), RegName::new(0, rng.gen_range(0..3), 0))
}

fn value(rng: &mut ChaCha8Rng) -> Bytes {
    Bytes::from(vec![rng.gen_range(b'a'..=b'e')])
}

fn step(rng: &mut ChaCha8Rng, me: Pid, n: usize, m: usize) -> Step {
    let mem = Mid::from_index(rng.gen_range(0..m));
    match rng.gen_range(0..9) {
        0 | 1 => Step::Read { mem, regs: (0..rng.gen_range(1..=3)).map(|_| reg(rng)).collect() },
        2 | 3 => Step::Write { mem, items: (0..rng.gen_range(1..=2)).map(|_| (reg(rng), value(rng))).collect() },
        4 => {
            let permission = match rng.gen_range(0..4) {
                0 => Permission::read_only(n),
                1 => Permission::exclusive(me, n),
                2 => Permission::open(n),
                // someone else's exclusivity: never legal
                _ => Permission::exclusive(Pid::from_index(rng.gen_range(0..n)), n),
            };
            Step::Grant { mem, region: RegionId(rng.gen_range(0..POLICIES.len() as u16)), permission }
        }
        5 => Step::Overlap { mem, other: Mid::from_index(rng.gen_range(0..m)), reg: reg(rng), value: value(rng) },
        6 => Step::Send { to: Pid::from_index(rng.gen_range(0..n)), payload: value(rng) },
        7 => {
            if rng.gen_bool(0.5) {
                Step::Drain
            } else {
                Step::Sleep(rng.gen_range(0..4))
            }
        }
        _ => Step::Decide(value(rng)),
    }
}

/// A random workload determined by `seed`.
pub fn workload(seed: u64) -> Workload {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=4);
    let m = rng.gen_range(1..=3);
    let mut setup = RunSetup::new(SystemConfig::crash(n, n, m, m));
    setup.seed = rng.gen();
    if rng.gen_bool(0.7) {
        setup.synchrony = Synchrony::Asynchronous { stall_percent: rng.gen_range(0..50), max_stall: rng.gen_range(1..6) };
    }
    // the leader oracle needs one correct process
    let survivor = Pid::from_index(rng.gen_range(0..n));
    for p in Pid::all(n) {
        if p != survivor && rng.gen_bool(0.25) {
            setup.faults.push(FaultSpec::crash_process(p, rng.gen_range(0..40)));
        }
    }
    for mem in Mid::all(m) {
        if rng.gen_bool(0.25) {
            setup.faults.push(FaultSpec::crash_memory(mem, rng.gen_range(0..40)));
        }
    }
    let programs = Pid::all(n).map(|p| (0..rng.gen_range(0..25)).map(|_| step(&mut rng, p, n, m)).collect()).collect();
    Workload { setup, programs }
}

async fn exec(ctx: Ctx, program: Vec<Step>) {
    for s in program {
        match s {
            Step::Read { mem, regs } => {
                ctx.read_many(mem, regs).await;
            }
            Step::Write { mem, items } => {
                ctx.write_many(mem, items).await;
            }
            Step::Grant { mem, region, permission } => {
                ctx.change_permission(mem, region, permission).await;
            }
            Step::Overlap { mem, other, reg, value } => {
                let _ = futures::join!(ctx.read(mem, reg), ctx.write(other, reg, value));
            }
            Step::Send { to, payload } => ctx.send(to, payload),
            Step::Drain => while ctx.try_recv().is_some() {},
            Step::Sleep(d) => ctx.sleep(d).await,
            Step::Decide(v) => ctx.decide(v, DecisionPath::Fast),
        }
    }
    ctx.finish();
}

pub fn execute(w: &Workload) -> RunOutcome {
    let programs = Rc::new(w.programs.clone());
    let proto = FnProtocol {
        regions: regions(w.setup.config.n),
        stop: StopRule::AllCorrectFinished,
        start: move |ctx: Ctx, _role: Role| {
            let program = programs[ctx.pid().index()].clone();
            ctx.spawn(exec(ctx.clone(), program));
        },
    };
    run(&w.setup, &proto).expect("workloads are valid")
}

/// The recorded decision of each process is its first decide call.
pub fn first_decision_sticks(trace: &Trace) -> Verdict {
    const NAME: &str = "first-decision-sticks";
    for p in Pid::all(trace.n) {
        let first = trace.entries.iter().find(|e| e.actor == Actor::Process(p) && matches!(e.action, Action::Decide { .. }));
        let recorded = trace.decisions.get(&p).map(|d| d.index);
        if first.map(|e| e.index) != recorded {
            return Verdict::fail(NAME, first.map(|e| e.index), format!("{p}"));
        }
    }
    Verdict::pass(NAME)
}

/// Every model-level property of one workload, including determinism of a
/// second execution.
pub fn model_verdicts(w: &Workload) -> Vec<Verdict> {
    let a = execute(w);
    let b = execute(w);
    let t = &a.trace;
    let mut vs = vec![checks::delay_accounting(t)];
    vs.extend(memory_semantics(t));
    vs.push(checks::crash_permanence(t));
    vs.push(first_decision_sticks(t));
    vs.push(determinism(t, &b.trace));
    vs
}

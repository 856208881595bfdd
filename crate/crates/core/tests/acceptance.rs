//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::time::{Duration, Instant};

use bytes::Bytes;
use mnm_core::aligned::MemoryAccess;
use mnm_core::fast_robust::check::{composition, composition_exercised, priority_decision};
use mnm_core::fast_robust::priority::oracle;
use mnm_core::fast_robust::PreferentialProtocol;
use mnm_core::harness::report::RunReport;
use mnm_core::harness::{evaluate, run_scenario, run_seed, ProtocolKind, ProtocolOptions, Scenario};
use mnm_core::properties::{agreement, termination};
use mnm_core::sim::explore::explore;
use mnm_core::sim::{run, AdversaryScript, EvidenceClass, FaultSpec, OmegaSpec, Pause, RunSetup, Synchrony};
use mnm_core::{Mid, Pid, SystemConfig};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn inputs(n: usize) -> Vec<Bytes> {
    (1..=n).map(|i| Bytes::from(format!("v{i}"))).collect()
}

fn scenario(protocol: ProtocolKind, setup: RunSetup, seeds: Vec<u64>) -> Scenario {
    let inputs = inputs(setup.config.n);
    Scenario { name: protocol.name().into(), protocol, setup, inputs, seeds, options: ProtocolOptions::default() }
}

fn byzantine(n: usize, f_p: usize, m: usize, f_m: usize) -> SystemConfig {
    SystemConfig { byzantine: true, ..SystemConfig::crash(n, f_p, m, f_m) }
}

fn asynchronous(config: SystemConfig) -> RunSetup {
    let mut s = RunSetup::new(config);
    s.synchrony = Synchrony::Asynchronous { stall_percent: 20, max_stall: 4 };
    s.limits.horizon = 20_000;
    s
}

/// First failing verdict of a run, if any.
fn failure(r: &RunReport) -> Option<String> {
    if let Some(e) = &r.error {
        return Some(format!("seed {}: {e}", r.seed));
    }
    r.verdicts.iter().find(|v| !v.ok).map(|v| format!("seed {}: {} ({}) at {:?}", r.seed, v.property, v.detail, v.witness))
}

/// Tallies runs; keeps the first violation as the witness.
#[derive(Default)]
struct Tally {
    runs: usize,
    violations: usize,
    first: Option<String>,
}

impl Tally {
    fn add(&mut self, what: &str, r: &RunReport) {
        self.runs += 1;
        if let Some(f) = failure(r) {
            self.violations += 1;
            self.first.get_or_insert(format!("{what} {f}"));
        }
    }

    fn fail(&mut self, what: String) {
        self.runs += 1;
        self.violations += 1;
        self.first.get_or_insert(what);
    }

    fn outcome(self, what: &str) -> Outcome {
        match self.first {
            None => Ok(format!("{} {what}, 0 violations", self.runs)),
            Some(f) => Err(format!("{} of {} {what} violated; first: {f}", self.violations, self.runs)),
        }
    }
}

fn leader_delay(protocol: ProtocolKind, setup: RunSetup) -> Result<u64, String> {
    let r = run_seed(&scenario(protocol, setup, vec![0]), 0);
    if let Some(f) = failure(&r) {
        return Err(format!("{protocol}: {f}"));
    }
    r.delay_of(1).ok_or_else(|| format!("{protocol}: p1 did not decide"))
}

fn fast_path_delay() -> Outcome {
    let mut seen = Vec::new();
    for protocol in [ProtocolKind::CheapQuorum, ProtocolKind::FastRobust] {
        let d = leader_delay(protocol, RunSetup::new(byzantine(3, 1, 3, 1)))?;
        if d != 2 {
            return Err(format!("{protocol} leader decided after {d} delays"));
        }
        seen.push(format!("{protocol}={d}"));
    }
    Ok(seen.join(" "))
}

fn pmp_delay() -> Outcome {
    let world = RunSetup::new(SystemConfig::crash(2, 1, 3, 1));
    let pmp = leader_delay(ProtocolKind::Pmp, world.clone())?;
    let disk = leader_delay(ProtocolKind::DiskPaxos, world)?;
    let detail = format!("pmp={pmp} disk-paxos={disk}");
    if pmp == 2 && disk >= 4 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn byzantine_resilience() -> Outcome {
    let mut tally = Tally::default();
    for protocol in [ProtocolKind::FastRobust, ProtocolKind::RobustBackup] {
        for script in AdversaryScript::ALL {
            // 9 placements of the Byzantine process and the crashed memory,
            // 56 schedules each: 504 seeds per protocol and script
            for byz in 1..=3u16 {
                for mem in 1..=3u16 {
                    let mut setup = asynchronous(byzantine(3, 1, 3, 1));
                    setup.faults = vec![FaultSpec::byzantine(Pid(byz), script), FaultSpec::crash_memory(Mid(mem), 0)];
                    let base = 1000 * (byz as u64 * 3 + mem as u64);
                    let report = run_scenario(&scenario(protocol, setup, (base..base + 56).collect()));
                    for r in &report.runs {
                        tally.add(&format!("{protocol} {script} p{byz} mu{mem}"), r);
                    }
                }
            }
        }
    }
    tally.outcome("runs (2 protocols x 5 scripts x 504 seeds)")
}

fn broadcast_properties() -> Outcome {
    let mut tally = Tally::default();
    // exhaustive: every stall combination over the first choice points
    let depth = 7;
    let mut leaves = 0;
    for script in AdversaryScript::ALL {
        let mut setup = RunSetup::new(byzantine(3, 1, 3, 1));
        setup.limits.horizon = 800;
        setup.faults = vec![FaultSpec::byzantine(Pid(3), script)];
        let s = Scenario { options: ProtocolOptions { keys: 1, ..Default::default() }, ..scenario(ProtocolKind::ReliableBroadcast, setup.clone(), vec![0]) };
        let proto = s.build();
        let res = explore(&setup, &*proto, depth, |script, out| match evaluate(&s, out).into_iter().find(|v| !v.ok) {
            Some(v) => Err(format!("{} ({}) at {:?}, script {script:?}", v.property, v.detail, v.witness)),
            None => Ok(()),
        });
        match res {
            Ok(stats) => leaves += stats.runs,
            Err(e) => tally.fail(format!("exhaustive {script}: {e}")),
        }
    }
    // random schedules at n = 3..5
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for seed in 0..1000u64 {
        let n = 3 + (seed % 3) as usize;
        let f = (n - 1) / 2;
        let mut setup = RunSetup::new(byzantine(n, f, 3, 1));
        setup.synchrony = Synchrony::Asynchronous { stall_percent: rng.gen_range(0..40), max_stall: rng.gen_range(1..6) };
        setup.limits.horizon = 1500;
        let mut pids: Vec<Pid> = Pid::all(n).collect();
        pids.shuffle(&mut rng);
        for &p in &pids[..f] {
            setup.faults.push(FaultSpec::byzantine(p, *AdversaryScript::ALL.choose(&mut rng).unwrap()));
        }
        if rng.gen_bool(0.5) {
            setup.faults.push(FaultSpec::crash_memory(Mid(rng.gen_range(1..=3)), rng.gen_range(0..30)));
        }
        let s = Scenario { options: ProtocolOptions { keys: 2, ..Default::default() }, ..scenario(ProtocolKind::ReliableBroadcast, setup, vec![seed]) };
        tally.add(&format!("random n={n}"), &run_seed(&s, seed));
    }
    tally.outcome(&format!("checks ({leaves} exhaustive leaves at depth {depth} + 1000 random seeds)"))
}

fn crash_extremes() -> Outcome {
    let mut tally = Tally::default();
    // pmp: the leader crashes mid-run, one process is left
    for seed in 0..200u64 {
        let mut setup = asynchronous(SystemConfig::crash(2, 1, 3, 1));
        setup.faults = vec![FaultSpec::crash_process(Pid(1), seed % 9), FaultSpec::crash_memory(Mid::from_index(seed as usize % 3), seed % 13)];
        let r = run_seed(&scenario(ProtocolKind::Pmp, setup, vec![seed]), seed);
        if r.delay_of(2).is_none() {
            tally.fail(format!("pmp seed {seed}: p2 did not decide"));
        } else {
            tally.add("pmp", &r);
        }
    }
    // aligned paxos: five agents, any two crash
    for access in [MemoryAccess::Exclusive, MemoryAccess::ReadBack] {
        for seed in 0..200u64 {
            let (n, m) = [(1, 4), (2, 3), (3, 2), (4, 1)][seed as usize % 4];
            let agents: Vec<FaultSpec> = Pid::all(n)
                .map(|p| FaultSpec::crash_process(p, 0))
                .chain(Mid::all(m).map(|x| FaultSpec::crash_memory(x, 0)))
                .collect();
            let pairs: Vec<[usize; 2]> = (0..5)
                .flat_map(|i| (i + 1..5).map(move |j| [i, j]))
                .filter(|pair| pair.iter().filter(|&&k| k < n).count() < n)
                .collect();
            let pair = pairs[(seed as usize / 4) % pairs.len()];
            let faults: Vec<FaultSpec> = pair
                .iter()
                .enumerate()
                .map(|(k, &i)| FaultSpec { trigger: mnm_core::sim::Trigger::At((seed * 7 + k as u64 * 5) % 23), ..agents[i] })
                .collect();
            let procs = pair.iter().filter(|&&k| k < n).count();
            let mut setup = asynchronous(SystemConfig::crash(n, procs, m, 2 - procs));
            setup.omega = OmegaSpec { chaotic: true, stabilize_at: Some(60), ..Default::default() };
            setup.faults = faults;
            let s = Scenario {
                options: ProtocolOptions { access, ..Default::default() },
                ..scenario(ProtocolKind::AlignedPaxos, setup, vec![seed])
            };
            let r = run_seed(&s, seed);
            if r.stop != "done" {
                tally.fail(format!("aligned {access:?} seed {seed}: stopped with {}", r.stop));
            } else {
                tally.add(&format!("aligned {access:?}"), &r);
            }
        }
    }
    tally.outcome("runs (pmp 200, aligned 2 x 200)")
}

fn fast_then_backup() -> Outcome {
    let mut tally = Tally::default();
    let mut exercised = 0;
    let mut seed = 0u64;
    // a follower is held back until the others have given up on the fast
    // path, so the backup starts after a fast decision
    while exercised < 500 && seed < 20_000 {
        let mut setup = asynchronous(byzantine(3, 1, 3, 1));
        setup.synchrony = Synchrony::Asynchronous { stall_percent: 10, max_stall: 2 };
        setup.seed = seed;
        let from = 6 + seed % 12;
        let pid = Pid(2 + (seed % 2) as u16);
        setup.pauses = vec![Pause { pid, from, until: from + 100 }];
        let proto = mnm_core::fast_robust::FastRobustProtocol::new(inputs(3));
        match run(&setup, &proto) {
            Ok(out) => {
                let v = composition(&out.trace);
                if !v.ok {
                    tally.fail(format!("seed {seed}: {} at {:?}", v.detail, v.witness));
                } else if composition_exercised(&out.trace) {
                    exercised += 1;
                    tally.runs += 1;
                }
            }
            Err(e) => tally.fail(format!("seed {seed}: {e}")),
        }
        seed += 1;
    }
    if exercised < 500 {
        return Err(format!("only {exercised} of {seed} seeds reached the backup after a fast decision"));
    }
    tally.outcome(&format!("fast-then-backup runs (out of {seed} seeds)"))
}

fn priority_decisions() -> Outcome {
    let mut tally = Tally::default();
    let classes = [EvidenceClass::Bare, EvidenceClass::LeaderSigned, EvidenceClass::Unanimous];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for i in 0..400u64 {
        let n = if i % 2 == 0 { 3 } else { 5 };
        let f = (n - 1) / 2;
        let pool: Vec<Bytes> = (0..rng.gen_range(1..=4)).map(|k| Bytes::from(format!("x{k}"))).collect();
        let labelled: Vec<(EvidenceClass, Bytes)> =
            (0..n).map(|_| (*classes.choose(&mut rng).unwrap(), pool.choose(&mut rng).unwrap().clone())).collect();
        let all: Vec<oracle::Input> =
            labelled.iter().enumerate().map(|(k, (c, v))| (Pid::from_index(k), *c, v.clone())).collect();
        let top = oracle::top_values(&all, f + 1);
        let eligible = oracle::eligible(&all, n - f);
        let mut setup = asynchronous(byzantine(n, f, 3, 1));
        setup.seed = i;
        setup.synchrony = Synchrony::Asynchronous { stall_percent: rng.gen_range(0..40), max_stall: rng.gen_range(1..6) };
        let out = match run(&setup, &PreferentialProtocol::new(labelled.clone())) {
            Ok(out) => out,
            Err(e) => {
                tally.fail(format!("instance {i}: {e}"));
                continue;
            }
        };
        tally.runs += 1;
        let t = &out.trace;
        let verdicts = [agreement(t), termination(t), priority_decision(t, f)];
        if let Some(v) = verdicts.iter().find(|v| !v.ok) {
            tally.fail(format!("instance {i} {labelled:?}: {} ({})", v.property, v.detail));
            continue;
        }
        for d in t.decisions.values() {
            if !top.contains(&d.value) || !eligible.contains(&d.value) {
                tally.fail(format!("instance {i} {labelled:?}: decided {:?}, top {top:?}, eligible {eligible:?}", d.value));
                break;
            }
        }
    }
    tally.outcome("instances at n=3,5 checked against the oracle")
}

fn model_conformance() -> Outcome {
    let mut tally = Tally::default();
    for seed in 0..1000 {
        let w = common::workload(seed);
        tally.runs += 1;
        if let Some(v) = common::model_verdicts(&w).into_iter().find(|v| !v.ok) {
            tally.fail(format!("workload {seed}: {} ({}) at {:?}", v.property, v.detail, v.witness));
        }
    }
    tally.outcome("random model-only workloads (delays, permissions, policy gating, crashes, determinism)")
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Option<Duration>); 8] = [
        ("fast-path delay", fast_path_delay, Some(Duration::from_secs(1))),
        ("protected memory paxos delay", pmp_delay, Some(Duration::from_secs(1))),
        ("byzantine resilience", byzantine_resilience, Some(Duration::from_secs(300))),
        ("reliable broadcast properties", broadcast_properties, Some(Duration::from_secs(300))),
        ("crash resilience extremes", crash_extremes, Some(Duration::from_secs(120))),
        ("composition", fast_then_backup, None),
        ("priority decision", priority_decisions, None),
        ("model conformance", model_conformance, None),
    ];
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut failed = 0;
    for (i, (name, check, limit)) in criteria.iter().enumerate() {
        if filter.as_ref().is_some_and(|f| !name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = check();
        let took = start.elapsed();
        let outcome = match (outcome, limit) {
            (Ok(d), Some(l)) if took > *l => Err(format!("{d}, but took {took:.2?} (limit {l:?})")),
            (o, _) => o,
        };
        let (status, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {} {status} {name}: {detail} [{took:.2?}]", i + 1);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

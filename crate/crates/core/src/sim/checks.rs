//! Model-level trace checkers. Each replays a finished trace independently
//! of the simulator's own bookkeeping.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use bytes::Bytes;

use crate::ids::{Mid, Pid};
use crate::model::{ChangePolicy, OpRequest, OpResponse, Permission, RegId, RegionId};

use super::fault::{FaultKind, FaultTarget};
use super::trace::{Action, Actor, OpId, Trace};

/// Outcome of checking one property.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Verdict {
    pub property: String,
    pub ok: bool,
    /// Trace index of the first offending entry.
    pub witness: Option<usize>,
    pub detail: String,
}

impl Verdict {
    pub fn pass(property: impl Into<String>) -> Self {
        Self { property: property.into(), ok: true, witness: None, detail: String::new() }
    }

    pub fn fail(property: impl Into<String>, witness: Option<usize>, detail: impl Into<String>) -> Self {
        Self { property: property.into(), ok: false, witness, detail: detail.into() }
    }
}

/// Memory operations take two delays and messages one.
pub fn delay_accounting(trace: &Trace) -> Verdict {
    const NAME: &str = "delay-accounting";
    let mut sends = HashMap::new();
    for e in &trace.entries {
        match &e.action {
            Action::Complete { invoked_at, .. } if e.time != invoked_at + 2 => {
                return Verdict::fail(NAME, Some(e.index), format!("op invoked at {invoked_at} completed at {}", e.time));
            }
            Action::Send { msg, .. } => {
                sends.insert(*msg, e.time);
            }
            Action::Receive { msg, sent_at, .. } => {
                if e.time != sent_at + 1 || sends.get(msg) != Some(sent_at) {
                    return Verdict::fail(NAME, Some(e.index), format!("message sent at {sent_at} received at {}", e.time));
                }
            }
            _ => {}
        }
    }
    Verdict::pass(NAME)
}

struct ShadowRegion {
    perm: Permission,
    policy: ChangePolicy,
}

/// Replays every completed operation against a shadow copy of the memories
/// and checks that acks, naks, permission changes and read values all match.
/// This covers permission soundness and the atomicity of reads.
pub fn memory_semantics(trace: &Trace) -> Vec<Verdict> {
    const PERM: &str = "permission-soundness";
    const READS: &str = "read-consistency";
    let n = trace.n;
    let mut regions: BTreeMap<(Mid, RegionId), ShadowRegion> = BTreeMap::new();
    let mut values: HashMap<(Mid, RegId), Bytes> = HashMap::new();
    let mut invoked: HashMap<OpId, (Mid, &OpRequest)> = HashMap::new();
    let mut perm_verdict = Verdict::pass(PERM);
    let mut read_verdict = Verdict::pass(READS);

    let can = |regions: &BTreeMap<(Mid, RegionId), ShadowRegion>, mem: Mid, reg: &RegId, p: Pid, write: bool| {
        regions.get(&(mem, reg.region)).is_some_and(|r| {
            let rw = r.perm.read_writers().contains(&p);
            if write {
                rw || r.perm.writers().contains(&p)
            } else {
                rw || r.perm.readers().contains(&p)
            }
        })
    };

    for e in &trace.entries {
        match &e.action {
            Action::RegionInit { mem, region, permission, policy } => {
                regions.insert((*mem, *region), ShadowRegion { perm: permission.clone(), policy: *policy });
            }
            Action::Invoke { op, mem, request } => {
                invoked.insert(*op, (*mem, request));
            }
            Action::Complete { op, invoker, response, .. } => {
                let Some((mem, request)) = invoked.get(op).copied() else {
                    perm_verdict = Verdict::fail(PERM, Some(e.index), "completion without invocation");
                    break;
                };
                let p = *invoker;
                match (request, response) {
                    (OpRequest::Read(regs), OpResponse::Read(results)) if regs.len() == results.len() => {
                        for (reg, res) in regs.iter().zip(results) {
                            let allowed = can(&regions, mem, reg, p, false);
                            if allowed != res.is_ok() && perm_verdict.ok {
                                perm_verdict = Verdict::fail(PERM, Some(e.index), format!("read of {reg} by {p}: allowed={allowed}"));
                            }
                            if let Ok(v) = res {
                                if values.get(&(mem, *reg)) != v.as_ref() && read_verdict.ok {
                                    read_verdict = Verdict::fail(READS, Some(e.index), format!("read of {reg} on {mem} returned a stale or unknown value"));
                                }
                            }
                        }
                    }
                    (OpRequest::Write(items), OpResponse::Write(results)) if items.len() == results.len() => {
                        for ((reg, v), res) in items.iter().zip(results) {
                            let allowed = can(&regions, mem, reg, p, true);
                            if allowed != res.is_ok() && perm_verdict.ok {
                                perm_verdict = Verdict::fail(PERM, Some(e.index), format!("write of {reg} by {p}: allowed={allowed}"));
                            }
                            if allowed {
                                values.insert((mem, *reg), v.clone());
                            }
                        }
                    }
                    (OpRequest::ChangePermission { region, permission }, OpResponse::ChangePermission { applied }) => {
                        let legal = regions.get(&(mem, *region)).is_some_and(|r| match r.policy {
                            ChangePolicy::Static => false,
                            ChangePolicy::RevokeToReadOnly => *permission == Permission::read_only(n),
                            ChangePolicy::ExclusiveWriter => *permission == Permission::exclusive(p, n),
                        });
                        if legal != *applied && perm_verdict.ok {
                            perm_verdict = Verdict::fail(PERM, Some(e.index), format!("permission change by {p}: legal={legal} applied={applied}"));
                        }
                        if legal {
                            if let Some(r) = regions.get_mut(&(mem, *region)) {
                                r.perm = permission.clone();
                            }
                        }
                    }
                    _ => {
                        perm_verdict = Verdict::fail(PERM, Some(e.index), "response does not match request");
                    }
                }
            }
            _ => {}
        }
    }
    vec![perm_verdict, read_verdict]
}

/// Crashed processes take no further steps and crashed memories never
/// respond again.
pub fn crash_permanence(trace: &Trace) -> Verdict {
    const NAME: &str = "crash-permanence";
    let mut dead_procs = BTreeSet::new();
    let mut dead_mems = BTreeSet::new();
    for e in &trace.entries {
        if let Action::Fault { target, kind: FaultKind::Crash } = e.action {
            match target {
                FaultTarget::Process(p) => dead_procs.insert(p),
                FaultTarget::Memory(m) => dead_mems.insert(m),
            };
            continue;
        }
        let bad = match (&e.actor, &e.action) {
            (Actor::Process(p), _) => dead_procs.contains(p),
            (Actor::Memory(m), Action::Complete { invoker, .. }) => dead_mems.contains(m) || dead_procs.contains(invoker),
            _ => false,
        };
        if bad {
            return Verdict::fail(NAME, Some(e.index), "activity after crash");
        }
    }
    Verdict::pass(NAME)
}

/// No honest process decides two different values.
pub fn irrevocability(trace: &Trace) -> Verdict {
    const NAME: &str = "decision-irrevocability";
    let mut first: BTreeMap<Pid, &Bytes> = BTreeMap::new();
    for e in &trace.entries {
        if let (Actor::Process(p), Action::Decide { value, .. }) = (&e.actor, &e.action) {
            if trace.byzantine.contains(p) {
                continue;
            }
            if let Some(prev) = first.insert(*p, value) {
                if prev != value {
                    return Verdict::fail(NAME, Some(e.index), format!("{p} changed its decision"));
                }
            }
        }
    }
    Verdict::pass(NAME)
}

/// All model-level checks.
pub fn model_checks(trace: &Trace) -> Vec<Verdict> {
    let mut v = vec![delay_accounting(trace)];
    v.extend(memory_semantics(trace));
    v.push(crash_permanence(trace));
    v.push(irrevocability(trace));
    v
}

/// Two runs with the same setup must produce identical traces.
pub fn determinism(a: &Trace, b: &Trace) -> Verdict {
    const NAME: &str = "determinism";
    if a == b {
        return Verdict::pass(NAME);
    }
    let idx = a.entries.iter().zip(&b.entries).position(|(x, y)| x != y).unwrap_or(a.entries.len().min(b.entries.len()));
    Verdict::fail(NAME, Some(idx), "traces diverge")
}

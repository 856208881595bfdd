//! Trace predicates for reliable broadcast.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use bytes::Bytes;

use crate::ids::Pid;
use crate::model::OpRequest;
use crate::sim::checks::Verdict;
use crate::sim::{Action, Actor, ProtocolEvent, StopReason, Trace, Verifier};

use super::{proofs, RbLayout, KIND_L2};

/// Events closer than this to the end of a run cut off by the horizon are not
/// required to have propagated.
pub const GRACE: u64 = 120;

fn settled(trace: &Trace, t: u64) -> bool {
    match trace.stop {
        StopReason::Done | StopReason::Quiescent => true,
        StopReason::HorizonReached => t + GRACE <= trace.end_time,
        StopReason::BudgetExhausted => false,
    }
}

pub fn rb_properties(trace: &Trace, layout: &RbLayout, verifier: &Verifier) -> Vec<Verdict> {
    let correct: BTreeSet<Pid> = trace.correct().collect();
    let mut broadcasts: BTreeMap<(Pid, u64), (Bytes, u64)> = BTreeMap::new();
    let mut deliveries: BTreeMap<(Pid, u64), BTreeMap<Pid, (Bytes, u64, usize)>> = BTreeMap::new();
    let mut dup = None;
    for (e, ev) in trace.protocol_events() {
        let Actor::Process(p) = e.actor else { continue };
        match ev {
            ProtocolEvent::RbBroadcast { k, msg } if correct.contains(&p) => {
                broadcasts.insert((p, *k), (msg.clone(), e.time));
            }
            ProtocolEvent::RbDeliver { sender, k, msg } if correct.contains(&p) => {
                let slot = deliveries.entry((*sender, *k)).or_default();
                if slot.insert(p, (msg.clone(), e.time, e.index)).is_some() && dup.is_none() {
                    dup = Some(e.index);
                }
            }
            _ => {}
        }
    }

    let mut p1 = Verdict::pass("rb-validity");
    for ((q, k), (m, t)) in &broadcasts {
        if !settled(trace, *t) {
            continue;
        }
        for p in &correct {
            let got = deliveries.get(&(*q, *k)).and_then(|d| d.get(p));
            if got.map(|g| &g.0) != Some(m) {
                p1 = Verdict::fail("rb-validity", None, format!("{p} did not deliver {q}/{k}"));
            }
        }
    }

    let mut p2 = Verdict::pass("rb-agreement");
    let mut p3 = Verdict::pass("rb-integrity");
    let mut p4 = Verdict::pass("rb-totality");
    if let Some(i) = dup {
        p3 = Verdict::fail("rb-integrity", Some(i), "delivered twice");
    }
    for ((q, k), by) in &deliveries {
        let values: BTreeSet<&Bytes> = by.values().map(|d| &d.0).collect();
        if values.len() > 1 {
            let idx = by.values().map(|d| d.2).max();
            p2 = Verdict::fail("rb-agreement", idx, format!("correct processes delivered different values for {q}/{k}"));
        }
        if correct.contains(q) {
            for (m, _, idx) in by.values() {
                if broadcasts.get(&(*q, *k)).map(|b| &b.0) != Some(m) {
                    p3 = Verdict::fail("rb-integrity", Some(*idx), format!("delivered {q}/{k} that {q} never broadcast"));
                }
            }
        }
        let first = by.values().map(|d| d.1).min().unwrap();
        if settled(trace, first) {
            if let Some(p) = correct.iter().find(|p| !by.contains_key(p)) {
                p4 = Verdict::fail("rb-totality", None, format!("{p} never delivered {q}/{k}"));
            }
        }
    }
    vec![p1, p2, p3, p4, l2_uniqueness(trace, layout, verifier), single_write(trace, layout)]
}

/// No two valid L2 proofs ever written anywhere support different values for
/// the same key.
pub fn l2_uniqueness(trace: &Trace, layout: &RbLayout, verifier: &Verifier) -> Verdict {
    let mut seen: BTreeMap<(Pid, u64), Bytes> = BTreeMap::new();
    for e in &trace.entries {
        let Action::Invoke { request: OpRequest::Write(items), .. } = &e.action else { continue };
        for (reg, raw) in items {
            if reg.name.kind != KIND_L2 || layout.owner_of(reg.region).is_none() {
                continue;
            }
            let (q, k) = (Pid(reg.name.b as u16), reg.name.a as u64);
            if let Some(m) = proofs::check_l2(verifier, layout.n, q, k, raw) {
                if let Some(prev) = seen.insert((q, k), m.clone()) {
                    if prev != m {
                        return Verdict::fail("rb-l2-uniqueness", Some(e.index), format!("two L2 values for {q}/{k}"));
                    }
                }
            }
        }
    }
    Verdict::pass("rb-l2-uniqueness")
}

/// Correct processes write each of their slots at most once per memory.
pub fn single_write(trace: &Trace, layout: &RbLayout) -> Verdict {
    let mut written = HashSet::new();
    for e in &trace.entries {
        let (Actor::Process(p), Action::Invoke { mem, request: OpRequest::Write(items), .. }) = (&e.actor, &e.action) else {
            continue;
        };
        if trace.faulty.contains(p) && trace.byzantine.contains(p) {
            continue;
        }
        for (reg, _) in items {
            if layout.owner_of(reg.region) == Some(*p) && !written.insert((*mem, *reg)) {
                return Verdict::fail("rb-single-write", Some(e.index), format!("{p} rewrote {reg} on {mem}"));
            }
        }
    }
    Verdict::pass("rb-single-write")
}

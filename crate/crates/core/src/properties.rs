//! Consensus trace predicates shared by all agreement protocols.

use std::collections::BTreeSet;

use bytes::Bytes;

use crate::ids::Pid;
use crate::sim::checks::Verdict;
use crate::sim::{Action, Actor, DecisionPath, StopReason, Trace};

/// Every decide attempt of a correct process, in trace order.
pub fn correct_decides(trace: &Trace) -> impl Iterator<Item = (usize, Pid, &Bytes, DecisionPath)> {
    trace.entries.iter().filter_map(|e| match (&e.actor, &e.action) {
        (Actor::Process(p), Action::Decide { value, path }) if !trace.faulty.contains(p) => {
            Some((e.index, *p, value, *path))
        }
        _ => None,
    })
}

/// No two correct decide attempts carry different values.
pub fn agreement(trace: &Trace) -> Verdict {
    const NAME: &str = "agreement";
    let mut first: Option<&Bytes> = None;
    for (idx, p, v, _) in correct_decides(trace) {
        match first {
            None => first = Some(v),
            Some(f) if f == v => {}
            Some(_) => return Verdict::fail(NAME, Some(idx), format!("{p} decided a different value")),
        }
    }
    Verdict::pass(NAME)
}

/// Validity for crash faults: every decision is some process's input.
pub fn validity(trace: &Trace, inputs: &[Bytes]) -> Verdict {
    const NAME: &str = "validity";
    for (idx, p, v, _) in correct_decides(trace) {
        if !inputs.contains(v) {
            return Verdict::fail(NAME, Some(idx), format!("{p} decided a value nobody proposed"));
        }
    }
    Verdict::pass(NAME)
}

/// Weak validity: required only in runs without faulty processes.
pub fn weak_validity(trace: &Trace, inputs: &[Bytes]) -> Verdict {
    if !trace.faulty.is_empty() {
        return Verdict::pass("weak-validity");
    }
    Verdict { property: "weak-validity".into(), ..validity(trace, inputs) }
}

/// Every correct process decided and the run ended by its stop rule.
pub fn termination(trace: &Trace) -> Verdict {
    const NAME: &str = "termination";
    let undecided: BTreeSet<Pid> = trace.correct().filter(|p| !trace.decisions.contains_key(p)).collect();
    if !undecided.is_empty() {
        return Verdict::fail(NAME, None, format!("undecided: {undecided:?} ({:?})", trace.stop));
    }
    if trace.stop != StopReason::Done {
        return Verdict::fail(NAME, None, format!("run ended with {:?}", trace.stop));
    }
    Verdict::pass(NAME)
}

/// The standard trio for agreement protocols.
pub fn consensus(trace: &Trace, inputs: &[Bytes], weak: bool) -> Vec<Verdict> {
    vec![
        agreement(trace),
        if weak { weak_validity(trace, inputs) } else { validity(trace, inputs) },
        termination(trace),
    ]
}

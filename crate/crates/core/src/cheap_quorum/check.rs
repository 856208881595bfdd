//! Trace predicates for the fast path.

use bytes::Bytes;

use crate::ids::Pid;
use crate::properties::correct_decides;
use crate::sim::checks::Verdict;
use crate::sim::{Actor, DecisionPath, EvidenceClass, ProtocolEvent, Trace};

/// Correct fast-path decisions as `(trace index, process, value)`.
pub fn fast_decisions(trace: &Trace) -> Vec<(usize, Pid, Bytes)> {
    correct_decides(trace).filter(|d| d.3 == DecisionPath::Fast).map(|(i, p, v, _)| (i, p, v.clone())).collect()
}

/// Correct aborts as `(trace index, process, value, class)`.
pub fn aborts(trace: &Trace) -> Vec<(usize, Pid, Bytes, EvidenceClass)> {
    trace
        .protocol_events()
        .filter_map(|(e, ev)| match (e.actor, ev) {
            (Actor::Process(p), ProtocolEvent::Abort { value, class }) if !trace.faulty.contains(&p) => {
                Some((e.index, p, value.clone(), *class))
            }
            _ => None,
        })
        .collect()
}

/// Correct fast-path deciders agree.
pub fn decision_agreement(trace: &Trace) -> Verdict {
    const NAME: &str = "cq-decision-agreement";
    let ds = fast_decisions(trace);
    match ds.iter().find(|d| d.2 != ds[0].2) {
        Some((idx, p, _)) => Verdict::fail(NAME, Some(*idx), format!("{p} decided differently on the fast path")),
        None => Verdict::pass(NAME),
    }
}

/// If a correct process decided `v` on the fast path, every correct abort
/// carries `v`, with a unanimity proof if a follower decided.
pub fn abort_agreement(trace: &Trace) -> Verdict {
    const NAME: &str = "cq-abort-agreement";
    let ds = fast_decisions(trace);
    let Some((_, _, v)) = ds.first() else { return Verdict::pass(NAME) };
    let follower_decided = ds.iter().any(|d| d.1 != Pid::LEADER);
    for (idx, p, value, class) in aborts(trace) {
        if value != *v {
            return Verdict::fail(NAME, Some(idx), format!("{p} aborted with a value other than the decision"));
        }
        if follower_decided && class != EvidenceClass::Unanimous {
            return Verdict::fail(NAME, Some(idx), format!("{p} aborted without a unanimity proof"));
        }
    }
    Verdict::pass(NAME)
}

/// No correct process aborted (expected in synchronous failure-free runs).
pub fn progress(trace: &Trace) -> Verdict {
    const NAME: &str = "cq-progress";
    match aborts(trace).first() {
        Some((idx, p, ..)) => Verdict::fail(NAME, Some(*idx), format!("{p} aborted")),
        None => Verdict::pass(NAME),
    }
}

pub fn cq_properties(trace: &Trace) -> Vec<Verdict> {
    vec![decision_agreement(trace), abort_agreement(trace)]
}

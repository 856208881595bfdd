//! Trace predicates for the composed protocol and the preference phase.

use std::collections::BTreeMap;

use crate::cheap_quorum::check::fast_decisions;
use crate::properties::correct_decides;
use crate::sim::checks::Verdict;
use crate::sim::{DecisionPath, ProtocolEvent, Trace};

use super::priority::oracle::{self, Input};

/// Setups that entered the preference phase anywhere, one per origin.
pub fn setups(trace: &Trace) -> Vec<Input> {
    let mut by_origin = BTreeMap::new();
    for (_, ev) in trace.protocol_events() {
        if let ProtocolEvent::SetupSeen { origin, value, class } = ev {
            by_origin.entry(*origin).or_insert_with(|| (*origin, *class, value.clone()));
        }
    }
    by_origin.into_values().collect()
}

/// Whether a correct process decided on the fast path and the backup also
/// produced a decision.
pub fn composition_exercised(trace: &Trace) -> bool {
    !fast_decisions(trace).is_empty() && correct_decides(trace).any(|d| d.3 == DecisionPath::Backup)
}

/// A fast-path decision `v` is the only value the backup may decide.
pub fn composition(trace: &Trace) -> Verdict {
    const NAME: &str = "composition";
    let fast = fast_decisions(trace);
    let Some((_, _, v)) = fast.first() else { return Verdict::pass(NAME) };
    for (idx, p, value, path) in correct_decides(trace) {
        if path == DecisionPath::Backup && value != v {
            return Verdict::fail(NAME, Some(idx), format!("{p} decided another value in the backup"));
        }
    }
    Verdict::pass(NAME)
}

/// Backup decisions are among the `f + 1` best inputs and adoptable from
/// some `n - f` of them.
pub fn priority_decision(trace: &Trace, f: usize) -> Verdict {
    const NAME: &str = "priority-decision";
    let inputs = setups(trace);
    let top = oracle::top_values(&inputs, f + 1);
    let quorum = trace.n - f;
    let eligible = (inputs.len() <= 16).then(|| oracle::eligible(&inputs, quorum.min(inputs.len())));
    for (idx, p, value, path) in correct_decides(trace) {
        if path != DecisionPath::Backup {
            continue;
        }
        if !top.contains(value) {
            return Verdict::fail(NAME, Some(idx), format!("{p} decided outside the top {} inputs", f + 1));
        }
        if eligible.as_ref().is_some_and(|e| !e.contains(value)) {
            return Verdict::fail(NAME, Some(idx), format!("{p} decided a value no quorum of inputs selects"));
        }
    }
    Verdict::pass(NAME)
}

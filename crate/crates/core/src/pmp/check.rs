//! Trace predicates specific to the permission-based Paxos variants.

use std::collections::{BTreeMap, HashMap};

use bytes::Bytes;

use crate::ids::{Mid, Pid};
use crate::model::{OpRequest, OpResponse, RegionId};
use crate::sim::checks::Verdict;
use crate::sim::{Action, Actor, OpId, ProtocolEvent, Trace};

use super::slot::{PropNr, Slot};
use super::KIND_SLOT;

/// No proposal number enters phase 2 with two different values.
pub fn phase2_uniqueness(trace: &Trace) -> Verdict {
    const NAME: &str = "phase2-uniqueness";
    let mut seen: BTreeMap<u64, &Bytes> = BTreeMap::new();
    for (e, ev) in trace.protocol_events() {
        if let ProtocolEvent::Phase2 { proposal, value } = ev {
            if let Some(prev) = seen.insert(*proposal, value) {
                if prev != value {
                    return Verdict::fail(NAME, Some(e.index), format!("proposal {} wrote two values", PropNr::from_raw(*proposal)));
                }
            }
        }
    }
    Verdict::pass(NAME)
}

/// An acknowledged accept write by `p` on a memory implies that no other
/// process took the region's permission since `p` last did (or, for the
/// initial holder, since the start).
pub fn permission_atomicity(trace: &Trace, region: RegionId, initial: Pid) -> Verdict {
    const NAME: &str = "permission-atomicity";
    let mut invoked: HashMap<OpId, (Mid, &OpRequest)> = HashMap::new();
    let mut holder: BTreeMap<Mid, Pid> = BTreeMap::new();
    for e in &trace.entries {
        match &e.action {
            Action::Invoke { op, mem, request } => {
                invoked.insert(*op, (*mem, request));
            }
            Action::Complete { op, invoker, response, .. } => {
                let Some(&(mem, request)) = invoked.get(op) else { continue };
                match (request, response) {
                    (OpRequest::ChangePermission { region: r, .. }, OpResponse::ChangePermission { applied: true })
                        if *r == region =>
                    {
                        holder.insert(mem, *invoker);
                    }
                    (OpRequest::Write(items), OpResponse::Write(res)) => {
                        let accepts = items.iter().zip(res).any(|((reg, v), ok)| {
                            ok.is_ok()
                                && reg.region == region
                                && reg.name.kind == KIND_SLOT
                                && Slot::decode(v).is_ok_and(|s| s.value.is_some())
                        });
                        let current = holder.get(&mem).copied().unwrap_or(initial);
                        if accepts && current != *invoker {
                            return Verdict::fail(NAME, Some(e.index), format!("{invoker} accepted on {mem} while {current} held it"));
                        }
                    }
                    _ => {}
                }
            }
            _ => {}
        }
    }
    Verdict::pass(NAME)
}

/// Attempts aborted by each process.
pub fn aborted_attempts(trace: &Trace) -> BTreeMap<Pid, usize> {
    let mut out = BTreeMap::new();
    for (e, ev) in trace.protocol_events() {
        if let (Actor::Process(p), ProtocolEvent::AttemptAborted { .. }) = (e.actor, ev) {
            *out.entry(p).or_default() += 1;
        }
    }
    out
}

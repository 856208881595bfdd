//! Execution traces. A trace is the complete, ordered record of one run and
//! is what the property checkers consume.

use std::collections::{BTreeMap, BTreeSet};

use bytes::Bytes;

use crate::ids::{Mid, Pid};
use crate::model::{ChangePolicy, OpRequest, OpResponse, Permission, RegionId};

use super::fault::{FaultKind, FaultTarget};

pub type OpId = u64;
pub type MsgId = u64;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Actor {
    Process(Pid),
    Memory(Mid),
    Scheduler,
}

/// Which decision path a process took.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum DecisionPath {
    Fast,
    Backup,
}

/// Evidence class of an abort value, lowest to highest priority.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum EvidenceClass {
    Bare,
    LeaderSigned,
    Unanimous,
}

/// Protocol-level milestones recorded for the checkers and reports.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum ProtocolEvent {
    RbBroadcast { k: u64, msg: Bytes },
    RbDeliver { sender: Pid, k: u64, msg: Bytes },
    /// The fast path decided.
    FastDecide { value: Bytes },
    /// A process entered panic mode.
    Panic,
    /// A process left the fast path with this backup input.
    Abort { value: Bytes, class: EvidenceClass },
    /// A setup value accepted into the preference phase.
    SetupSeen { origin: Pid, value: Bytes, class: EvidenceClass },
    /// A trusted message was discarded and its sender silenced.
    Silenced { sender: Pid, reason: String },
    /// A Paxos-style proposer started phase 2 with this value.
    Phase2 { proposal: u64, value: Bytes },
    /// Exclusive write permission obtained on a memory.
    Acquired { mem: Mid, proposal: u64 },
    /// A proposal attempt was abandoned.
    AttemptAborted { proposal: u64 },
    Note(String),
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Action {
    RegionInit { mem: Mid, region: RegionId, permission: Permission, policy: ChangePolicy },
    Invoke { op: OpId, mem: Mid, request: OpRequest },
    Complete { op: OpId, invoker: Pid, invoked_at: u64, response: OpResponse },
    Send { msg: MsgId, to: Pid, payload: Bytes },
    Receive { msg: MsgId, from: Pid, sent_at: u64 },
    Fault { target: FaultTarget, kind: FaultKind },
    Decide { value: Bytes, path: DecisionPath },
    Protocol(ProtocolEvent),
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct TraceEntry {
    pub index: usize,
    pub time: u64,
    pub actor: Actor,
    pub action: Action,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Decision {
    pub value: Bytes,
    pub time: u64,
    pub index: usize,
    pub path: DecisionPath,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub enum StopReason {
    /// The protocol's stop condition held.
    #[default]
    Done,
    /// No events were left.
    Quiescent,
    BudgetExhausted,
    HorizonReached,
}

#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Trace {
    pub entries: Vec<TraceEntry>,
    /// First decision of each process.
    pub decisions: BTreeMap<Pid, Decision>,
    /// Processes that were faulty (crashed or Byzantine) at some point.
    pub faulty: BTreeSet<Pid>,
    pub byzantine: BTreeSet<Pid>,
    pub crashed_memories: BTreeSet<Mid>,
    pub stop: StopReason,
    pub end_time: u64,
    pub events: u64,
    pub n: usize,
    pub m: usize,
}

impl Trace {
    pub(crate) fn push(&mut self, time: u64, actor: Actor, action: Action) -> usize {
        let index = self.entries.len();
        self.entries.push(TraceEntry { index, time, actor, action });
        index
    }

    /// Processes that never faulted.
    pub fn correct(&self) -> impl Iterator<Item = Pid> + '_ {
        Pid::all(self.n).filter(|p| !self.faulty.contains(p))
    }

    pub fn protocol_events(&self) -> impl Iterator<Item = (&TraceEntry, &ProtocolEvent)> {
        self.entries.iter().filter_map(|e| match &e.action {
            Action::Protocol(ev) => Some((e, ev)),
            _ => None,
        })
    }

    pub fn decision_of(&self, p: Pid) -> Option<&Decision> {
        self.decisions.get(&p)
    }
}

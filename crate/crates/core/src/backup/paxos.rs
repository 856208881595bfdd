//! Deterministic single-decree Paxos node (proposer, acceptor and learner in
//! one). Every transition is a pure function of the node state and the
//! input, so a remote replica fed the same inputs produces byte-identical
//! outputs; the conformance checker relies on this.

use std::collections::{BTreeMap, BTreeSet};
use std::rc::Rc;

use bytes::Bytes;

use crate::ids::{majority, Pid};
use crate::wire::{Reader, WireError, Writer};

/// Ballot number: `round << 16 | proposer`. Zero means "none".
pub type Ballot = u64;

pub fn ballot(round: u64, proposer: Pid) -> Ballot {
    (round << 16) | proposer.0 as u64
}

pub fn ballot_owner(b: Ballot) -> Pid {
    Pid((b & 0xffff) as u16)
}

pub fn ballot_round(b: Ballot) -> u64 {
    b >> 16
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum PaxosMsg {
    /// Announces the sender's input to the preference phase.
    Setup(Bytes),
    Prepare(Ballot),
    Promise { ballot: Ballot, last: Option<(Ballot, Bytes)> },
    Accept { ballot: Ballot, value: Bytes },
    Accepted { ballot: Ballot, value: Bytes },
    Nack { ballot: Ballot, promised: Ballot },
    /// Replica-only: an Accept whose value is the proposer's own input, not
    /// yet known to the replica. Never encoded.
    AcceptOwnInput { ballot: Ballot },
}

impl PaxosMsg {
    pub fn encode(&self) -> Bytes {
        let mut w = Writer::new();
        match self {
            PaxosMsg::Setup(x) => {
                w.u8(0).bytes(x);
            }
            PaxosMsg::Prepare(b) => {
                w.u8(1).u64(*b);
            }
            PaxosMsg::Promise { ballot, last } => {
                w.u8(2).u64(*ballot);
                match last {
                    None => w.u8(0),
                    Some((b, v)) => w.u8(1).u64(*b).bytes(v),
                };
            }
            PaxosMsg::Accept { ballot, value } => {
                w.u8(3).u64(*ballot).bytes(value);
            }
            PaxosMsg::Accepted { ballot, value } => {
                w.u8(4).u64(*ballot).bytes(value);
            }
            PaxosMsg::Nack { ballot, promised } => {
                w.u8(5).u64(*ballot).u64(*promised);
            }
            PaxosMsg::AcceptOwnInput { .. } => unreachable!("replica-only message"),
        }
        w.finish()
    }

    pub fn decode(b: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(b);
        let bytes = |r: &mut Reader<'_>| r.bytes().map(Bytes::copy_from_slice);
        let msg = match r.u8()? {
            0 => PaxosMsg::Setup(bytes(&mut r)?),
            1 => PaxosMsg::Prepare(r.u64()?),
            2 => {
                let ballot = r.u64()?;
                let last = match r.u8()? {
                    0 => None,
                    1 => Some((r.u64()?, bytes(&mut r)?)),
                    t => return Err(WireError::BadTag(t)),
                };
                PaxosMsg::Promise { ballot, last }
            }
            3 => PaxosMsg::Accept { ballot: r.u64()?, value: bytes(&mut r)? },
            4 => PaxosMsg::Accepted { ballot: r.u64()?, value: bytes(&mut r)? },
            5 => PaxosMsg::Nack { ballot: r.u64()?, promised: r.u64()? },
            t => return Err(WireError::BadTag(t)),
        };
        r.finish()?;
        Ok(msg)
    }

    pub fn ballot(&self) -> Option<Ballot> {
        match self {
            PaxosMsg::Setup(_) => None,
            PaxosMsg::Prepare(b) => Some(*b),
            PaxosMsg::Promise { ballot, .. }
            | PaxosMsg::Accept { ballot, .. }
            | PaxosMsg::Accepted { ballot, .. }
            | PaxosMsg::Nack { ballot, .. }
            | PaxosMsg::AcceptOwnInput { ballot } => Some(*ballot),
        }
    }
}

/// How the preference phase validates and combines setup values.
pub trait SetupRule {
    /// Whether `setup` is well-formed evidence from `origin`.
    fn valid(&self, origin: Pid, setup: &[u8]) -> bool;
    /// The proposal input chosen from the first `n - f` setups received.
    fn choose(&self, setups: &[(Pid, Bytes)]) -> Bytes;
}

#[derive(Clone)]
pub enum InputMode {
    /// Classic Paxos: each proposer proposes its own input.
    Plain,
    /// Preferential Paxos: inputs are exchanged first and each proposer
    /// adopts the best of the first `quorum` it sees.
    Preferential { quorum: usize, rule: Rc<dyn SetupRule> },
}

#[derive(Clone, Debug)]
struct Proposal {
    ballot: Ballot,
    promises: BTreeMap<Pid, Option<(Ballot, Bytes)>>,
    accept_sent: bool,
}

#[derive(Clone)]
pub struct PaxosNode {
    me: Pid,
    n: usize,
    mode: InputMode,
    /// Own setup value (preferential mode).
    setup: Option<Bytes>,
    setups: Vec<(Pid, Bytes)>,
    /// Value proposed when no earlier value is locked in.
    input: Option<Bytes>,
    promised: Ballot,
    accepted: Option<(Ballot, Bytes)>,
    max_round: u64,
    proposal: Option<Proposal>,
    votes: BTreeMap<Ballot, (Bytes, BTreeSet<Pid>)>,
    decided: Option<Bytes>,
}

impl PaxosNode {
    /// A node with a known input (plain) or setup value (preferential).
    pub fn new(me: Pid, n: usize, mode: InputMode, input: Bytes) -> Self {
        let mut node = Self::replica(me, n, mode);
        match node.mode {
            InputMode::Plain => node.input = Some(input),
            InputMode::Preferential { .. } => node.setup = Some(input),
        }
        node
    }

    /// A node whose input is not (yet) known, for replaying a peer.
    pub fn replica(me: Pid, n: usize, mode: InputMode) -> Self {
        Self {
            me,
            n,
            mode,
            setup: None,
            setups: Vec::new(),
            input: None,
            promised: 0,
            accepted: None,
            max_round: 0,
            proposal: None,
            votes: BTreeMap::new(),
            decided: None,
        }
    }

    pub fn decided(&self) -> Option<&Bytes> {
        self.decided.as_ref()
    }

    pub fn input(&self) -> Option<&Bytes> {
        self.input.as_ref()
    }

    pub fn is_preferential(&self) -> bool {
        matches!(self.mode, InputMode::Preferential { .. })
    }

    pub fn setups(&self) -> &[(Pid, Bytes)] {
        &self.setups
    }

    /// Learns the input from the first free Accept of a replayed proposer.
    pub fn learn_input(&mut self, v: Bytes) {
        if self.input.is_none() {
            self.input = Some(v);
        }
    }

    pub fn set_setup(&mut self, v: Bytes) {
        self.setup = Some(v);
    }

    /// Initial outputs.
    pub fn start(&mut self) -> Vec<PaxosMsg> {
        match (&self.mode, &self.setup) {
            (InputMode::Preferential { .. }, Some(x)) => vec![PaxosMsg::Setup(x.clone())],
            _ => Vec::new(),
        }
    }

    /// Whether a ballot may be started: in preferential mode only after the
    /// input has been adopted.
    pub fn can_start_ballot(&self) -> bool {
        self.decided.is_none()
            && match self.mode {
                InputMode::Plain => true,
                InputMode::Preferential { .. } => self.input.is_some(),
            }
    }

    pub fn start_ballot(&mut self) -> Vec<PaxosMsg> {
        self.max_round += 1;
        let b = ballot(self.max_round, self.me);
        self.proposal = Some(Proposal { ballot: b, promises: BTreeMap::new(), accept_sent: false });
        vec![PaxosMsg::Prepare(b)]
    }

    fn observe(&mut self, b: Ballot) {
        self.max_round = self.max_round.max(ballot_round(b));
    }

    pub fn on_message(&mut self, from: Pid, msg: &PaxosMsg) -> Vec<PaxosMsg> {
        if let Some(b) = msg.ballot() {
            self.observe(b);
        }
        match msg {
            PaxosMsg::Setup(x) => {
                if let InputMode::Preferential { quorum, rule } = &self.mode {
                    if !self.setups.iter().any(|(p, _)| *p == from) && self.setups.len() < *quorum {
                        self.setups.push((from, x.clone()));
                        if self.setups.len() == *quorum {
                            self.input = Some(rule.choose(&self.setups));
                        }
                    }
                }
                Vec::new()
            }
            PaxosMsg::Prepare(b) => {
                if *b > self.promised {
                    self.promised = *b;
                    vec![PaxosMsg::Promise { ballot: *b, last: self.accepted.clone() }]
                } else {
                    vec![PaxosMsg::Nack { ballot: *b, promised: self.promised }]
                }
            }
            PaxosMsg::Promise { ballot, last } => {
                if let Some((lb, _)) = last {
                    self.observe(*lb);
                }
                let n = self.n;
                let Some(prop) = self.proposal.as_mut().filter(|p| p.ballot == *ballot && !p.accept_sent) else {
                    return Vec::new();
                };
                prop.promises.entry(from).or_insert_with(|| last.clone());
                if prop.promises.len() < majority(n) {
                    return Vec::new();
                }
                prop.accept_sent = true;
                let locked = prop.promises.values().flatten().max_by_key(|(b, _)| *b).map(|(_, v)| v.clone());
                match locked.or_else(|| self.input.clone()) {
                    Some(value) => vec![PaxosMsg::Accept { ballot: *ballot, value }],
                    None => vec![PaxosMsg::AcceptOwnInput { ballot: *ballot }],
                }
            }
            PaxosMsg::Accept { ballot, value } => {
                if *ballot >= self.promised {
                    self.promised = *ballot;
                    self.accepted = Some((*ballot, value.clone()));
                    vec![PaxosMsg::Accepted { ballot: *ballot, value: value.clone() }]
                } else {
                    vec![PaxosMsg::Nack { ballot: *ballot, promised: self.promised }]
                }
            }
            PaxosMsg::Accepted { ballot, value } => {
                let n = self.n;
                let entry = self.votes.entry(*ballot).or_insert_with(|| (value.clone(), BTreeSet::new()));
                if entry.0 == *value {
                    entry.1.insert(from);
                    if entry.1.len() >= majority(n) && self.decided.is_none() {
                        self.decided = Some(value.clone());
                    }
                }
                Vec::new()
            }
            PaxosMsg::Nack { promised, .. } => {
                self.observe(*promised);
                Vec::new()
            }
            PaxosMsg::AcceptOwnInput { .. } => Vec::new(),
        }
    }
}

//! Trusted messages: reliable-broadcast payloads that carry the sender's
//! hash-chained history so that receivers can replay the sender's protocol
//! state and reject anything a correct process could not have sent.
//!
//! Layout: `seq u64 | chain [32] | count u32 | entries | len u32 | payload`,
//! entry = `tag u8 | peer u16 | k u64 | hash [32]` (tag 1 = received,
//! tag 2 = ballot start; unused fields zero). The chain value is
//! `H(prev_chain | seq | entries | H(payload))`.

use std::collections::{BTreeMap, VecDeque};

use bytes::Bytes;

use crate::ids::Pid;
use crate::wire::{digest, Reader, WireError, Writer};

use super::paxos::{InputMode, PaxosMsg, PaxosNode};

pub type Hash = [u8; 32];

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum HistoryEntry {
    /// The sender processed message `k` of `peer`, whose raw broadcast bytes
    /// hash to `hash`.
    Received { peer: Pid, k: u64, hash: Hash },
    /// The sender started a new ballot.
    BallotStart,
}

impl HistoryEntry {
    fn encode_into(&self, w: &mut Writer) {
        match self {
            HistoryEntry::Received { peer, k, hash } => w.u8(1).u16(peer.0).u64(*k).raw(hash),
            HistoryEntry::BallotStart => w.u8(2).u16(0).u64(0).raw(&[0; 32]),
        };
    }

    fn decode_from(r: &mut Reader<'_>) -> Result<Self, WireError> {
        let tag = r.u8()?;
        let peer = r.u16()?;
        let k = r.u64()?;
        let hash = r.array::<32>()?;
        match tag {
            1 if peer != 0 => Ok(HistoryEntry::Received { peer: Pid(peer), k, hash }),
            2 => Ok(HistoryEntry::BallotStart),
            1 => Err(WireError::Range("peer")),
            t => Err(WireError::BadTag(t)),
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct TrustedMessage {
    pub seq: u64,
    pub chain: Hash,
    pub delta: Vec<HistoryEntry>,
    pub payload: Bytes,
}

pub fn chain_next(prev: &Hash, seq: u64, delta: &[HistoryEntry], payload: &[u8]) -> Hash {
    let mut w = Writer::new();
    w.raw(prev).u64(seq);
    for e in delta {
        e.encode_into(&mut w);
    }
    w.raw(&digest(payload));
    digest(&w.finish())
}

impl TrustedMessage {
    pub fn encode(&self) -> Bytes {
        let mut w = Writer::new();
        w.u64(self.seq).raw(&self.chain).u32(self.delta.len() as u32);
        for e in &self.delta {
            e.encode_into(&mut w);
        }
        w.bytes(&self.payload);
        w.finish()
    }

    pub fn decode(b: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(b);
        let seq = r.u64()?;
        let chain = r.array::<32>()?;
        let count = r.u32()?;
        let mut delta = Vec::new();
        for _ in 0..count {
            delta.push(HistoryEntry::decode_from(&mut r)?);
        }
        let payload = Bytes::copy_from_slice(r.bytes()?);
        r.finish()?;
        Ok(Self { seq, chain, delta, payload })
    }
}

/// The sender's own log, turned into deltas as messages are emitted.
#[derive(Default)]
pub struct HistoryLog {
    unsent: Vec<HistoryEntry>,
    next_seq: u64,
    chain: Hash,
}

impl HistoryLog {
    pub fn new() -> Self {
        Self { unsent: Vec::new(), next_seq: 1, chain: [0; 32] }
    }

    pub fn next_seq(&self) -> u64 {
        self.next_seq
    }

    pub fn record(&mut self, e: HistoryEntry) {
        self.unsent.push(e);
    }

    pub fn emit(&mut self, payload: Bytes) -> TrustedMessage {
        let seq = self.next_seq;
        self.next_seq += 1;
        let delta = std::mem::take(&mut self.unsent);
        self.chain = chain_next(&self.chain, seq, &delta, &payload);
        TrustedMessage { seq, chain: self.chain, delta, payload }
    }
}

/// Why a message was rejected.
pub type Rejection = String;

/// Result of checking the next message of a stream.
pub enum Check {
    Accept(Box<Replay>, PaxosMsg),
    /// Depends on a message this process has not processed yet but which
    /// has a valid broadcast proof.
    Wait { peer: Pid, k: u64, hash: Hash },
    Reject(Rejection),
}

/// Replayed state of one peer.
#[derive(Clone)]
pub struct Replay {
    node: PaxosNode,
    expected: VecDeque<PaxosMsg>,
    chain: Hash,
}

impl Replay {
    pub fn new(peer: Pid, n: usize, mode: InputMode) -> Self {
        Self { node: PaxosNode::replica(peer, n, mode), expected: VecDeque::new(), chain: [0; 32] }
    }
}

/// Per-sender receive state.
pub struct Stream {
    pub next_k: u64,
    pub buffered: BTreeMap<u64, Bytes>,
    pub silenced: bool,
    replay: Replay,
    /// Messages accepted from this sender: hash of the raw broadcast and the
    /// decoded protocol message.
    pub accepted: BTreeMap<u64, (Hash, PaxosMsg)>,
}

impl Stream {
    pub fn new(peer: Pid, n: usize, mode: InputMode) -> Self {
        Self { next_k: 1, buffered: BTreeMap::new(), silenced: false, replay: Replay::new(peer, n, mode), accepted: BTreeMap::new() }
    }

    pub fn commit(&mut self, replay: Replay, hash: Hash, msg: PaxosMsg) {
        self.replay = replay;
        self.accepted.insert(self.next_k, (hash, msg));
        self.next_k += 1;
    }

    /// Whether the message `k` of this stream is known to have been
    /// rejected (or will never be processed).
    pub fn rejected(&self, k: u64) -> bool {
        self.silenced && k >= self.next_k || (k < self.next_k && !self.accepted.contains_key(&k))
    }
}

/// Checks message `k` (raw broadcast bytes `raw`) of `sender` against its
/// replayed state. `lookup` resolves history references to already-accepted
/// messages of other streams: `Ok(Some(msg))` if accepted with a matching
/// hash, `Ok(None)` if not processed yet, `Err` if it can never match.
pub fn check_next(
    stream: &Stream,
    raw: &[u8],
    setup_valid: impl Fn(&[u8]) -> bool,
    lookup: impl Fn(Pid, u64, &Hash) -> Result<Option<PaxosMsg>, Rejection>,
) -> Check {
    let k = stream.next_k;
    let tm = match TrustedMessage::decode(raw) {
        Ok(tm) => tm,
        Err(e) => return Check::Reject(format!("malformed trusted message: {e}")),
    };
    if tm.seq != k {
        return Check::Reject(format!("sequence {} under broadcast key {k}", tm.seq));
    }
    if tm.chain != chain_next(&stream.replay.chain, tm.seq, &tm.delta, &tm.payload) {
        return Check::Reject("history chain mismatch".into());
    }
    let msg = match PaxosMsg::decode(&tm.payload) {
        Ok(m) => m,
        Err(e) => return Check::Reject(format!("malformed protocol message: {e}")),
    };
    let mut replay = stream.replay.clone();
    if k == 1 && replay.node.is_preferential() {
        match &msg {
            PaxosMsg::Setup(x) if setup_valid(x) => {
                replay.node.set_setup(x.clone());
                let out = replay.node.start();
                replay.expected.extend(out);
            }
            _ => return Check::Reject("first message is not a valid setup".into()),
        }
    }
    for e in &tm.delta {
        match *e {
            HistoryEntry::BallotStart => {
                if !replay.node.can_start_ballot() {
                    return Check::Reject("ballot started before input was fixed".into());
                }
                let out = replay.node.start_ballot();
                replay.expected.extend(out);
            }
            HistoryEntry::Received { peer, k: pk, hash } => match lookup(peer, pk, &hash) {
                Ok(Some(m)) => {
                    let out = replay.node.on_message(peer, &m);
                    replay.expected.extend(out);
                }
                Ok(None) => return Check::Wait { peer, k: pk, hash },
                Err(why) => return Check::Reject(why),
            },
        }
    }
    match (replay.expected.pop_front(), &msg) {
        (Some(PaxosMsg::AcceptOwnInput { ballot }), PaxosMsg::Accept { ballot: b, value }) if ballot == *b => {
            replay.node.learn_input(value.clone());
        }
        (Some(exp), m) if exp == *m => {}
        (exp, m) => return Check::Reject(format!("sent {m:?}, replay expected {exp:?}")),
    }
    replay.chain = tm.chain;
    Check::Accept(Box::new(replay), msg)
}

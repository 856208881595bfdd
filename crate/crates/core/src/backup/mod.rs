//! Byzantine-tolerant agreement from crash-tolerant Paxos.
//!
//! Every Paxos message is sent as a trusted message over reliable broadcast.
//! Receivers replay each sender's history through a local copy of the
//! sender's Paxos node and silence senders whose messages do not match,
//! which reduces Byzantine behaviour to crash-like behaviour.

pub mod paxos;
mod protocol;
pub mod trusted;

pub use protocol::RobustBackupProtocol;
pub(crate) use protocol::{grab_permissions, misbehaviour};

use std::cell::RefCell;
use std::collections::BTreeSet;
use std::rc::Rc;

use bytes::Bytes;
use futures::channel::{mpsc, oneshot};
use futures::future::{select, Either};
use futures::StreamExt;

use crate::broadcast::{self, Broadcaster, Delivery, Observer, RbLayout, RbShared};
use crate::ids::Pid;
use crate::sim::{Ctx, EvidenceClass, ProtocolEvent};
use crate::wire::digest;

use paxos::{ballot_owner, InputMode, PaxosMsg, PaxosNode};
use trusted::{check_next, Check, Hash, HistoryEntry, HistoryLog, Stream, TrustedMessage};

/// Reports accepted setup values for the trace.
pub trait SetupSummary {
    fn summarize(&self, origin: Pid, setup: &[u8]) -> (Bytes, EvidenceClass);
}

#[derive(Clone)]
pub struct BackupConfig {
    pub layout: RbLayout,
    pub mode: InputMode,
    /// Reporting hook for preferential mode.
    pub summary: Option<Rc<dyn SetupSummary>>,
    /// Initial wait before a leader retries a ballot; doubles on each retry.
    pub ballot_timeout: u64,
    /// Period of the leader check.
    pub tick: u64,
}

impl BackupConfig {
    pub fn plain(layout: RbLayout) -> Self {
        Self { layout, mode: InputMode::Plain, summary: None, ballot_timeout: 300, tick: 10 }
    }
}

/// Scripted deviations of a Byzantine participant.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Misbehaviour {
    None,
    /// Broadcasts two versions of each message to different memories.
    Equivocate,
    /// From its third message on, rebroadcasts its first message.
    ReplayStale,
    /// Starts ballots periodically regardless of the leader oracle.
    EagerBallots,
    /// Claims to have received a message that was never broadcast.
    ForgeHistory,
}

const MAX_TIMEOUT: u64 = 20_000;
const EAGER_PERIOD: u64 = 40;

struct Driver {
    ctx: Ctx,
    cfg: BackupConfig,
    node: PaxosNode,
    log: HistoryLog,
    streams: Vec<Stream>,
    out: mpsc::UnboundedSender<TrustedMessage>,
    shared: Rc<RefCell<RbShared>>,
    proven: BTreeSet<(Pid, u64, Hash)>,
    behaviour: Misbehaviour,
    decided: Option<oneshot::Sender<Bytes>>,
    next_ballot_at: u64,
    timeout: u64,
}

impl Driver {
    fn emit(&mut self, msgs: Vec<PaxosMsg>) {
        for m in msgs {
            if let PaxosMsg::Accept { ballot, value } = &m {
                self.ctx.event(ProtocolEvent::Phase2 { proposal: *ballot, value: value.clone() });
            }
            if self.behaviour == Misbehaviour::ForgeHistory && self.log.next_seq() == 2 {
                let other = Pid::from_index(self.ctx.pid().0 as usize % self.ctx.n());
                self.log.record(HistoryEntry::Received { peer: other, k: 1000, hash: [0xab; 32] });
            }
            let tm = self.log.emit(m.encode());
            let _ = self.out.unbounded_send(tm);
        }
    }

    fn check_decided(&mut self) {
        if let Some(v) = self.node.decided() {
            if let Some(tx) = self.decided.take() {
                let _ = tx.send(v.clone());
            }
        }
    }

    fn maybe_start_ballot(&mut self) {
        if !self.node.can_start_ballot() || self.ctx.now() < self.next_ballot_at {
            return;
        }
        let eager = self.behaviour == Misbehaviour::EagerBallots;
        if !eager && self.ctx.omega() != self.ctx.pid() {
            return;
        }
        self.log.record(HistoryEntry::BallotStart);
        let out = self.node.start_ballot();
        self.emit(out);
        if eager {
            self.next_ballot_at = self.ctx.now() + EAGER_PERIOD;
        } else {
            self.next_ballot_at = self.ctx.now() + self.timeout;
            self.timeout = (self.timeout * 2).min(MAX_TIMEOUT);
        }
    }

    fn apply(&mut self, from: Pid, k: u64, hash: Hash, msg: PaxosMsg) {
        // Prepares from processes the oracle does not consider leader are
        // dropped unlogged, as if still in transit.
        if let PaxosMsg::Prepare(b) = msg {
            if ballot_owner(b) != self.ctx.omega() {
                return;
            }
        }
        if let (PaxosMsg::Setup(x), Some(summary)) = (&msg, &self.cfg.summary) {
            let (value, class) = summary.summarize(from, x);
            self.ctx.event(ProtocolEvent::SetupSeen { origin: from, value, class });
        }
        let out = self.node.on_message(from, &msg);
        self.log.record(HistoryEntry::Received { peer: from, k, hash });
        self.emit(out);
        self.check_decided();
    }

    fn silence(&mut self, q: Pid, reason: String) {
        let s = &mut self.streams[q.index()];
        s.silenced = true;
        s.buffered.clear();
        self.ctx.event(ProtocolEvent::Silenced { sender: q, reason });
    }

    /// Processes buffered messages until no stream can make progress.
    async fn process(&mut self) {
        let n = self.ctx.n();
        loop {
            let mut progress = false;
            for q in Pid::all(n) {
                loop {
                    let s = &self.streams[q.index()];
                    if s.silenced {
                        break;
                    }
                    let Some(raw) = s.buffered.get(&s.next_k).cloned() else { break };
                    let setup_valid = |x: &[u8]| match &self.cfg.mode {
                        InputMode::Plain => false,
                        InputMode::Preferential { rule, .. } => rule.valid(q, x),
                    };
                    let streams = &self.streams;
                    let lookup = |peer: Pid, pk: u64, hash: &Hash| {
                        let Some(ps) = (peer.0 >= 1).then(|| streams.get(peer.index())).flatten() else {
                            return Err(format!("history names unknown {peer}"));
                        };
                        match ps.accepted.get(&pk) {
                            Some((h, m)) if h == hash => Ok(Some(m.clone())),
                            Some(_) => Err(format!("history hash mismatch for {peer}/{pk}")),
                            None if ps.rejected(pk) => Err(format!("history cites rejected {peer}/{pk}")),
                            None => Ok(None),
                        }
                    };
                    match check_next(s, &raw, setup_valid, lookup) {
                        Check::Accept(replay, msg) => {
                            let hash = digest(&raw);
                            let s = &mut self.streams[q.index()];
                            let k = s.next_k;
                            s.buffered.remove(&k);
                            s.commit(*replay, hash, msg.clone());
                            self.apply(q, k, hash, msg);
                            progress = true;
                        }
                        Check::Reject(why) => {
                            self.silence(q, why);
                            progress = true;
                            break;
                        }
                        Check::Wait { peer, k, hash } => {
                            if !self.proven.contains(&(peer, k, hash)) {
                                let m = broadcast::check_l2_proof(&self.ctx, self.cfg.layout, &self.shared, peer, k).await;
                                if m.is_some_and(|m| digest(&m) == hash) {
                                    self.proven.insert((peer, k, hash));
                                } else {
                                    self.silence(q, format!("history cites unproven {peer}/{k}"));
                                    progress = true;
                                }
                            }
                            break;
                        }
                    }
                }
            }
            if !progress {
                break;
            }
        }
    }

    fn on_delivery(&mut self, d: Delivery) {
        let s = &mut self.streams[d.sender.index()];
        if !s.silenced && d.k >= s.next_k {
            s.buffered.insert(d.k, d.msg);
        }
    }

    async fn run(mut self, mut deliveries: mpsc::UnboundedReceiver<Delivery>) {
        let start = self.node.start();
        self.emit(start);
        loop {
            self.maybe_start_ballot();
            let tick = Box::pin(self.ctx.sleep(self.cfg.tick));
            match select(deliveries.next(), tick).await {
                Either::Left((Some(d), _)) => {
                    self.on_delivery(d);
                    while let Ok(d) = deliveries.try_recv() {
                        self.on_delivery(d);
                    }
                    self.process().await;
                }
                Either::Left((None, _)) => return,
                Either::Right(_) => {}
            }
        }
    }
}

async fn send_lane(ctx: Ctx, layout: RbLayout, mut rx: mpsc::UnboundedReceiver<TrustedMessage>, behaviour: Misbehaviour) {
    let mut b = Broadcaster::new(layout);
    let mut first: Option<Bytes> = None;
    while let Some(tm) = rx.next().await {
        let raw = tm.encode();
        first.get_or_insert_with(|| raw.clone());
        match behaviour {
            Misbehaviour::Equivocate => {
                let twisted = TrustedMessage { payload: tamper(&tm.payload), ..tm.clone() };
                b.equivocate(&ctx, raw, twisted.encode()).await;
            }
            Misbehaviour::ReplayStale if tm.seq >= 3 => {
                b.broadcast_next(&ctx, first.clone().unwrap()).await;
            }
            _ => {
                b.broadcast_next(&ctx, raw).await;
            }
        }
    }
}

/// A plausible but different version of a protocol message.
fn tamper(payload: &Bytes) -> Bytes {
    let twisted = match PaxosMsg::decode(payload) {
        Ok(PaxosMsg::Setup(_)) => PaxosMsg::Setup(Bytes::from_static(b"equivocation")),
        Ok(PaxosMsg::Prepare(b)) => PaxosMsg::Prepare(b + (1 << 16)),
        Ok(PaxosMsg::Promise { ballot, .. }) => {
            PaxosMsg::Promise { ballot, last: Some((ballot, Bytes::from_static(b"equivocation"))) }
        }
        Ok(PaxosMsg::Accept { ballot, .. }) => PaxosMsg::Accept { ballot, value: Bytes::from_static(b"equivocation") },
        Ok(PaxosMsg::Accepted { ballot, .. }) => {
            PaxosMsg::Accepted { ballot, value: Bytes::from_static(b"equivocation") }
        }
        Ok(PaxosMsg::Nack { ballot, promised }) => PaxosMsg::Nack { ballot, promised: promised + 1 },
        _ => return payload.clone(),
    };
    twisted.encode()
}

/// Starts the backup protocol at this process (broadcast observer, sender
/// and protocol lanes). The receiver yields the decision; the lanes keep
/// running afterwards so that other processes can still finish.
pub fn start_backup(ctx: &Ctx, cfg: BackupConfig, input: Bytes, behaviour: Misbehaviour) -> oneshot::Receiver<Bytes> {
    let n = ctx.n();
    let shared = RbShared::new();
    let (dtx, drx) = mpsc::unbounded();
    let (stx, srx) = mpsc::unbounded();
    let (tx, rx) = oneshot::channel();

    let observer = Observer::new(ctx.clone(), cfg.layout, shared.clone(), Some(dtx));
    ctx.spawn(observer.run());
    ctx.spawn(send_lane(ctx.clone(), cfg.layout, srx, behaviour));

    let driver = Driver {
        ctx: ctx.clone(),
        node: PaxosNode::new(ctx.pid(), n, cfg.mode.clone(), input),
        streams: Pid::all(n).map(|p| Stream::new(p, n, cfg.mode.clone())).collect(),
        timeout: cfg.ballot_timeout,
        cfg,
        log: HistoryLog::new(),
        out: stx,
        shared,
        proven: BTreeSet::new(),
        behaviour,
        decided: Some(tx),
        next_ballot_at: 0,
    };
    ctx.spawn(driver.run(drx));
    rx
}

//! Cheap Quorum: a fast path that decides in two delays when the leader is
//! correct, the system is synchronous and nobody panics, and otherwise
//! aborts with a value and evidence for the backup protocol.
//!
//! The leader `p1` signs its input and writes it to the leader region, which
//! any process may turn read-only. Followers copy a correctly signed leader
//! value into their own region, assemble a unanimity proof once all `n`
//! copies exist, and decide once all `n` proofs exist. Anyone who times out
//! or sees a panic flag panics: it raises its own flag, revokes the leader's
//! write access and aborts with its own copy, the leader value or its input,
//! in that order.

pub mod check;
pub mod evidence;
mod protocol;

pub use evidence::{AbortOutcome, Candidate};
pub use protocol::{adversary, CheapQuorumProtocol};
pub(crate) use protocol::byzantine_resilience;

use bytes::Bytes;
use futures::stream::{FuturesUnordered, StreamExt};

use crate::ids::{majority, Mid, Pid};
use crate::model::{ChangePolicy, Permission, RegId, RegName, RegionId, RegionSpec, Value};
use crate::signatures::SignedValue;
use crate::sim::{Ctx, DecisionPath, ProtocolEvent};
use crate::swmr::{self, WriteOutcome};

use evidence::{check_unanimity, classify, open_copy, proof_body};

pub const KIND_VALUE: u8 = 1;
pub const KIND_PANIC: u8 = 2;
pub const KIND_PROOF: u8 = 3;
pub const KIND_LEADER: u8 = 4;

const PANIC_SET: &[u8] = &[1];

/// Region numbering: one static region per process starting at `base`,
/// then the revocable leader region.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CqLayout {
    pub base: u16,
    pub n: usize,
}

impl CqLayout {
    pub fn new(base: u16, n: usize) -> Self {
        Self { base, n }
    }

    pub fn region(&self, p: Pid) -> RegionId {
        RegionId(self.base + p.index() as u16)
    }

    pub fn leader_region(&self) -> RegionId {
        RegionId(self.base + self.n as u16)
    }

    /// First region id not used by this layout.
    pub fn end(&self) -> u16 {
        self.base + self.n as u16 + 1
    }

    fn reg(&self, p: Pid, kind: u8) -> RegId {
        RegId::new(self.region(p), RegName::new(kind, 0, 0))
    }

    pub fn value(&self, p: Pid) -> RegId {
        self.reg(p, KIND_VALUE)
    }

    pub fn panic(&self, p: Pid) -> RegId {
        self.reg(p, KIND_PANIC)
    }

    pub fn proof(&self, p: Pid) -> RegId {
        self.reg(p, KIND_PROOF)
    }

    pub fn leader_value(&self) -> RegId {
        RegId::new(self.leader_region(), RegName::new(KIND_LEADER, 0, 0))
    }

    pub fn regions(&self) -> Vec<RegionSpec> {
        let mut out: Vec<RegionSpec> = Pid::all(self.n)
            .map(|p| RegionSpec {
                id: self.region(p),
                permission: Permission::single_writer(p, self.n),
                policy: ChangePolicy::Static,
            })
            .collect();
        out.push(RegionSpec {
            id: self.leader_region(),
            permission: Permission::single_writer(Pid::LEADER, self.n),
            policy: ChangePolicy::RevokeToReadOnly,
        });
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CqConfig {
    pub layout: CqLayout,
    /// How long a follower waits at either stage before panicking.
    pub timeout: u64,
}

fn any_panic(flags: &[Value]) -> bool {
    flags.iter().any(|f| f.as_deref() == Some(PANIC_SET))
}

enum Stage {
    Panic,
    Decided,
}

/// Runs the fast path at this process. Returns only when the process
/// aborts; a decision is recorded through `ctx.decide` (and the process
/// marked finished) but the process keeps watching for panics afterwards so
/// that it can follow the others into the backup.
pub async fn cheap_quorum(ctx: &Ctx, cfg: CqConfig, input: Bytes) -> AbortOutcome {
    let mut known = None;
    if ctx.pid() == Pid::LEADER {
        let sv = ctx.sign(input.clone());
        match swmr::write_many(ctx, vec![(cfg.layout.leader_value(), sv.to_bytes())]).await {
            WriteOutcome::Ack => {
                decide(ctx, input.clone());
                known = Some(sv);
            }
            WriteOutcome::Nak => return panic_mode(ctx, cfg, input).await,
        }
    }
    if let Stage::Decided = follow(ctx, cfg, known).await {
        watch(ctx, cfg).await;
    }
    panic_mode(ctx, cfg, input).await
}

fn decide(ctx: &Ctx, v: Bytes) {
    if ctx.decided().is_none() {
        ctx.event(ProtocolEvent::FastDecide { value: v.clone() });
        ctx.decide(v, DecisionPath::Fast);
        ctx.finish();
    }
}

/// The follower part, run by every process including the leader, which
/// already knows the leader value.
async fn follow(ctx: &Ctx, cfg: CqConfig, known: Option<SignedValue>) -> Stage {
    let n = ctx.n();
    let lay = cfg.layout;
    let verifier = ctx.verifier();
    let me = ctx.pid();

    let start = ctx.now();
    let mut regs = vec![lay.leader_value()];
    regs.extend(Pid::all(n).map(|p| lay.panic(p)));
    let raw = loop {
        if let Some(sv) = &known {
            break sv.to_bytes();
        }
        let vals = swmr::read_many(ctx, regs.clone()).await;
        if any_panic(&vals[1..]) {
            return Stage::Panic;
        }
        if let Some(v) = &vals[0] {
            break v.clone();
        }
        if ctx.now() - start >= cfg.timeout {
            return Stage::Panic;
        }
    };
    let Some(lv) = SignedValue::from_bytes(&raw).ok().filter(|sv| verifier.verify(Pid::LEADER, sv)) else {
        return Stage::Panic;
    };
    let copy = ctx.sign(lv.to_bytes());
    swmr::write_many(ctx, vec![(lay.value(me), copy.to_bytes())]).await;

    let start = ctx.now();
    let mut regs: Vec<RegId> = Pid::all(n).map(|p| lay.value(p)).collect();
    regs.extend(Pid::all(n).map(|p| lay.proof(p)));
    regs.extend(Pid::all(n).map(|p| lay.panic(p)));
    let mut proof_written = false;
    loop {
        let vals = swmr::read_many(ctx, regs.clone()).await;
        if any_panic(&vals[2 * n..]) {
            return Stage::Panic;
        }
        let copies: Vec<Bytes> = Pid::all(n)
            .filter_map(|q| vals[q.index()].clone().filter(|c| open_copy(&verifier, q, c).as_ref() == Some(&lv)))
            .collect();
        if copies.len() >= n && !proof_written {
            let proof = ctx.sign(proof_body(&copies));
            swmr::write_many(ctx, vec![(lay.proof(me), proof.to_bytes())]).await;
            proof_written = true;
        }
        let proofs = Pid::all(n)
            .filter(|q| {
                vals[n + q.index()]
                    .as_ref()
                    .and_then(|b| SignedValue::from_bytes(b).ok())
                    .filter(|p| p.signer == *q)
                    .and_then(|p| check_unanimity(&verifier, n, &p))
                    .is_some_and(|x| x == lv)
            })
            .count();
        if proofs >= n {
            decide(ctx, lv.payload.clone());
            return Stage::Decided;
        }
        if ctx.now() - start >= cfg.timeout {
            return Stage::Panic;
        }
    }
}

/// After deciding: polls the panic flags until someone panics.
async fn watch(ctx: &Ctx, cfg: CqConfig) {
    let regs: Vec<RegId> = Pid::all(ctx.n()).map(|p| cfg.layout.panic(p)).collect();
    loop {
        if any_panic(&swmr::read_many(ctx, regs.clone()).await) {
            return;
        }
    }
}

/// Raises the panic flag, revokes the leader's write access and picks the
/// abort value. On each memory the revocation completes before that
/// memory's registers are read.
pub async fn panic_mode(ctx: &Ctx, cfg: CqConfig, input: Bytes) -> AbortOutcome {
    let n = ctx.n();
    let lay = cfg.layout;
    let me = ctx.pid();
    let verifier = ctx.verifier();
    ctx.event(ProtocolEvent::Panic);
    swmr::write_many(ctx, vec![(lay.panic(me), Bytes::from_static(PANIC_SET))]).await;

    let regs = vec![lay.value(me), lay.proof(me), lay.leader_value()];
    let mut pending: FuturesUnordered<_> = Mid::all(ctx.m())
        .map(|mem| {
            let regs = regs.clone();
            async move {
                ctx.change_permission(mem, lay.leader_region(), Permission::read_only(n)).await;
                ctx.read_many(mem, regs).await
            }
        })
        .collect();
    let mut responses: Vec<Vec<Value>> = Vec::new();
    for _ in 0..majority(ctx.m()) {
        let res = pending.next().await.expect("fewer memories than a majority");
        responses.push(res.into_iter().map(|r| r.unwrap_or(None)).collect());
    }
    drop(pending);
    let get = |i: usize| swmr::reduce(responses.iter().map(|r| &r[i]));

    let own = get(0).and_then(|c| open_copy(&verifier, me, &c));
    let outcome = match own {
        Some(lv) => AbortOutcome {
            candidate: Candidate::Signed(lv),
            proof: get(1).and_then(|p| SignedValue::from_bytes(&p).ok()),
        },
        None => match get(2)
            .and_then(|raw| SignedValue::from_bytes(&raw).ok())
            .filter(|sv| verifier.verify(Pid::LEADER, sv))
        {
            Some(lv) => AbortOutcome { candidate: Candidate::Signed(lv), proof: None },
            None => AbortOutcome::bare(input),
        },
    };
    ctx.event(ProtocolEvent::Abort { value: outcome.value().clone(), class: classify(&verifier, n, &outcome) });
    outcome
}

#[cfg(test)]
mod tests;

//! Byzantine reliable broadcast over replicated single-writer registers.
//!
//! Every process owns three families of slots per `(k, sender)`: a copy of
//! the sender's value, an L1 proof (a majority of matching copies) and an L2
//! proof (a majority of L1 proofs). A message is delivered once a valid L2
//! proof exists in the process's own slot. Slots are written at most once.

pub mod check;
pub mod proofs;
mod protocol;

pub use protocol::RbProtocol;

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::rc::Rc;

use bytes::Bytes;
use futures::channel::mpsc::UnboundedSender;
use thiserror::Error;

use crate::ids::{majority, Pid};
use crate::model::{ChangePolicy, Permission, RegId, RegName, RegionId, RegionSpec, Value};
use crate::sim::{Ctx, ProtocolEvent, Verifier};
use crate::swmr;

pub const KIND_VALUE: u8 = 1;
pub const KIND_L1: u8 = 2;
pub const KIND_L2: u8 = 3;

/// Where the broadcast slots live. Each owner has its own static
/// single-writer region, numbered from `base`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RbLayout {
    pub base: u16,
    pub n: usize,
}

impl RbLayout {
    pub fn new(base: u16, n: usize) -> Self {
        Self { base, n }
    }

    pub fn region(&self, owner: Pid) -> RegionId {
        RegionId(self.base + owner.index() as u16)
    }

    pub fn owner_of(&self, region: RegionId) -> Option<Pid> {
        let off = region.0.checked_sub(self.base)? as usize;
        (off < self.n).then(|| Pid::from_index(off))
    }

    pub fn regions(&self) -> Vec<RegionSpec> {
        Pid::all(self.n)
            .map(|p| RegionSpec {
                id: self.region(p),
                permission: Permission::single_writer(p, self.n),
                policy: ChangePolicy::Static,
            })
            .collect()
    }

    fn slot(&self, kind: u8, owner: Pid, k: u64, sender: Pid) -> RegId {
        RegId::new(self.region(owner), RegName::new(kind, k as u32, sender.0 as u32))
    }

    pub fn value(&self, owner: Pid, k: u64, sender: Pid) -> RegId {
        self.slot(KIND_VALUE, owner, k, sender)
    }

    pub fn l1(&self, owner: Pid, k: u64, sender: Pid) -> RegId {
        self.slot(KIND_L1, owner, k, sender)
    }

    pub fn l2(&self, owner: Pid, k: u64, sender: Pid) -> RegId {
        self.slot(KIND_L2, owner, k, sender)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum BroadcastError {
    #[error("broadcast key {got} out of sequence (expected {expected})")]
    Sequence { expected: u64, got: u64 },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Delivery {
    pub sender: Pid,
    pub k: u64,
    pub msg: Bytes,
}

/// State shared by all broadcast-related lanes of one process.
#[derive(Default)]
pub struct RbShared {
    /// Own slots already written (or about to be).
    claimed: BTreeSet<RegId>,
    delivered: BTreeMap<(Pid, u64), Bytes>,
}

impl RbShared {
    pub fn new() -> Rc<RefCell<Self>> {
        Rc::new(RefCell::new(Self::default()))
    }

    /// Reserves an own slot; false if it was already reserved.
    fn claim(&mut self, reg: RegId) -> bool {
        self.claimed.insert(reg)
    }

    pub fn delivered(&self, sender: Pid, k: u64) -> Option<&Bytes> {
        self.delivered.get(&(sender, k))
    }
}

/// Sender side: broadcasts with consecutive keys starting at 1.
pub struct Broadcaster {
    layout: RbLayout,
    next_k: u64,
}

impl Broadcaster {
    pub fn new(layout: RbLayout) -> Self {
        Self { layout, next_k: 1 }
    }

    pub fn next_key(&self) -> u64 {
        self.next_k
    }

    pub async fn broadcast(&mut self, ctx: &Ctx, k: u64, msg: Bytes) -> Result<(), BroadcastError> {
        if k != self.next_k {
            return Err(BroadcastError::Sequence { expected: self.next_k, got: k });
        }
        self.next_k += 1;
        ctx.event(ProtocolEvent::RbBroadcast { k, msg: msg.clone() });
        let signed = ctx.sign(proofs::encode_body(k, &msg));
        swmr::write_many(ctx, vec![(self.layout.value(ctx.pid(), k, ctx.pid()), signed.to_bytes())]).await;
        Ok(())
    }

    /// Adversary helper: writes a different signed message for the same key
    /// to the first half of the memories than to the rest.
    pub async fn equivocate(&mut self, ctx: &Ctx, first: Bytes, rest: Bytes) -> u64 {
        let k = self.next_k;
        self.next_k += 1;
        let reg = self.layout.value(ctx.pid(), k, ctx.pid());
        let a = ctx.sign(proofs::encode_body(k, &first)).to_bytes();
        let b = ctx.sign(proofs::encode_body(k, &rest)).to_bytes();
        let m = ctx.m();
        for mem in crate::ids::Mid::all(m) {
            let v = if mem.index() < m.div_ceil(2) { a.clone() } else { b.clone() };
            let _ = ctx.write(mem, reg, v).await;
        }
        k
    }

    /// Broadcasts with the next key and returns it.
    pub async fn broadcast_next(&mut self, ctx: &Ctx, msg: Bytes) -> u64 {
        let k = self.next_k;
        self.broadcast(ctx, k, msg).await.expect("next key is always in sequence");
        k
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Stage {
    WaitForSender,
    WaitForL1,
    WaitForL2,
}

/// Observer side: tracks every sender's next key and drives the proof
/// stages. One call to [`Observer::pass`] is one `try_deliver` round over all
/// senders.
pub struct Observer {
    ctx: Ctx,
    layout: RbLayout,
    verifier: Verifier,
    shared: Rc<RefCell<RbShared>>,
    last: Vec<u64>,
    stage: Vec<Stage>,
    parked: Vec<bool>,
    out: Option<UnboundedSender<Delivery>>,
}

impl Observer {
    pub fn new(ctx: Ctx, layout: RbLayout, shared: Rc<RefCell<RbShared>>, out: Option<UnboundedSender<Delivery>>) -> Self {
        let n = layout.n;
        Self {
            verifier: ctx.verifier(),
            ctx,
            layout,
            shared,
            last: vec![1; n],
            stage: vec![Stage::WaitForSender; n],
            parked: vec![false; n],
            out,
        }
    }

    /// Runs passes forever.
    pub async fn run(mut self) {
        loop {
            self.pass().await;
        }
    }

    /// Next expected key of `sender`.
    pub fn next_key(&self, sender: Pid) -> u64 {
        self.last[sender.index()]
    }

    pub async fn pass(&mut self) -> Vec<Delivery> {
        let n = self.layout.n;
        let me = self.ctx.pid();
        let lay = self.layout;
        let mut regs = Vec::with_capacity(3 * n * n);
        for q in Pid::all(n) {
            let k = self.last[q.index()];
            for i in Pid::all(n) {
                regs.push(lay.l2(i, k, q));
                regs.push(lay.value(i, k, q));
                regs.push(lay.l1(i, k, q));
            }
        }
        let vals = swmr::read_many(&self.ctx, regs).await;
        let at = |q: Pid, i: Pid, fam: usize| -> &Value { &vals[(q.index() * n + i.index()) * 3 + fam] };

        let mut writes = Vec::new();
        let mut found = Vec::new();
        for q in Pid::all(n) {
            let qi = q.index();
            let k = self.last[qi];
            let l2_order = std::iter::once(me).chain(Pid::all(n).filter(|&i| i != me));
            let mut l2 = None;
            for i in l2_order {
                if let Some(raw) = at(q, i, 0) {
                    if let Some(m) = proofs::check_l2(&self.verifier, n, q, k, raw) {
                        l2 = Some((raw.clone(), m));
                        break;
                    }
                }
            }
            if let Some((raw, m)) = l2 {
                let own = lay.l2(me, k, q);
                if self.shared.borrow_mut().claim(own) {
                    writes.push((own, raw));
                }
                found.push(Delivery { sender: q, k, msg: m });
                continue;
            }
            if self.parked[qi] {
                continue;
            }
            match self.stage[qi] {
                Stage::WaitForSender => {
                    if let Some(raw) = at(q, q, 1) {
                        if proofs::open_copy(&self.verifier, q, q, k, raw).is_some() {
                            let own = lay.value(me, k, q);
                            if q != me && self.shared.borrow_mut().claim(own) {
                                writes.push((own, self.ctx.sign(raw.clone()).to_bytes()));
                            }
                            self.stage[qi] = Stage::WaitForL1;
                        }
                    }
                }
                Stage::WaitForL1 => {
                    let mut copies = Vec::new();
                    let mut distinct = BTreeSet::new();
                    for i in Pid::all(n) {
                        if let Some(raw) = at(q, i, 1) {
                            if let Some(m) = proofs::open_copy(&self.verifier, i, q, k, raw) {
                                distinct.insert(m);
                                copies.push((i, raw.clone()));
                            }
                        }
                    }
                    if distinct.len() > 1 {
                        self.parked[qi] = true;
                        self.ctx.event(ProtocolEvent::Note(format!("conflicting copies for {q}/{k}; parked")));
                    } else if copies.len() >= majority(n) {
                        let own = lay.l1(me, k, q);
                        if self.shared.borrow_mut().claim(own) {
                            let proof = self.ctx.sign(proofs::l1_body(q, k, &copies));
                            writes.push((own, proof.to_bytes()));
                        }
                        self.stage[qi] = Stage::WaitForL2;
                    }
                }
                Stage::WaitForL2 => {
                    let mut by_msg: BTreeMap<Bytes, Vec<Bytes>> = BTreeMap::new();
                    let mut compilers = BTreeSet::new();
                    for i in Pid::all(n) {
                        if let Some(raw) = at(q, i, 2) {
                            if let Some((m, c)) = proofs::check_l1(&self.verifier, n, q, k, raw) {
                                if compilers.insert(c) {
                                    by_msg.entry(m).or_default().push(raw.clone());
                                }
                            }
                        }
                    }
                    if let Some((m, l1s)) = by_msg.into_iter().find(|(_, l1s)| l1s.len() >= majority(n)) {
                        let own = lay.l2(me, k, q);
                        if self.shared.borrow_mut().claim(own) {
                            let proof = self.ctx.sign(proofs::l2_body(q, k, &l1s));
                            writes.push((own, proof.to_bytes()));
                            found.push(Delivery { sender: q, k, msg: m });
                        }
                    }
                }
            }
        }
        if !writes.is_empty() {
            swmr::write_many(&self.ctx, writes).await;
        }
        for d in &found {
            let qi = d.sender.index();
            self.last[qi] += 1;
            self.stage[qi] = Stage::WaitForSender;
            self.parked[qi] = false;
            self.shared.borrow_mut().delivered.insert((d.sender, d.k), d.msg.clone());
            self.ctx.event(ProtocolEvent::RbDeliver { sender: d.sender, k: d.k, msg: d.msg.clone() });
            if let Some(tx) = &self.out {
                let _ = tx.unbounded_send(d.clone());
            }
        }
        found
    }
}

/// Returns the message supported by any valid L2 proof for `(sender, k)`,
/// copying that proof into the caller's own slot first. Never blocks on the
/// sender.
pub async fn check_l2_proof(
    ctx: &Ctx,
    layout: RbLayout,
    shared: &Rc<RefCell<RbShared>>,
    sender: Pid,
    k: u64,
) -> Option<Bytes> {
    if let Some(m) = shared.borrow().delivered(sender, k) {
        return Some(m.clone());
    }
    let n = layout.n;
    let me = ctx.pid();
    let verifier = ctx.verifier();
    let vals = swmr::read_many(ctx, Pid::all(n).map(|i| layout.l2(i, k, sender)).collect()).await;
    let own_first = std::iter::once(me).chain(Pid::all(n).filter(|&i| i != me));
    for i in own_first {
        let Some(raw) = &vals[i.index()] else { continue };
        if let Some(m) = proofs::check_l2(&verifier, n, sender, k, raw) {
            let own = layout.l2(me, k, sender);
            let fresh = shared.borrow_mut().claim(own);
            if fresh {
                swmr::write_many(ctx, vec![(own, raw.clone())]).await;
            }
            return Some(m);
        }
    }
    None
}

/// True iff a valid L2 proof for `(sender, k)` supports exactly `msg`.
pub async fn validate(
    ctx: &Ctx,
    layout: RbLayout,
    shared: &Rc<RefCell<RbShared>>,
    sender: Pid,
    k: u64,
    msg: &[u8],
) -> bool {
    check_l2_proof(ctx, layout, shared, sender, k).await.is_some_and(|m| m == msg)
}

#[cfg(test)]
mod tests;

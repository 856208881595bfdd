//! Runnable broadcast scenario: every listed sender broadcasts a fixed number
//! of messages and every process observes.

use std::collections::BTreeSet;

use bytes::Bytes;

use crate::ids::{Mid, Pid};
use crate::model::{Permission, RegionSpec};
use crate::signatures::SignedValue;
use crate::sim::{AdversaryScript, ConfigError, Ctx, Protocol, Role, StopRule, SystemConfig};

use super::{proofs, Broadcaster, Observer, RbLayout, RbShared};

pub struct RbProtocol {
    pub layout: RbLayout,
    /// Messages per sender.
    pub keys: u64,
    pub senders: BTreeSet<Pid>,
}

impl RbProtocol {
    pub fn new(n: usize, keys: u64) -> Self {
        Self { layout: RbLayout::new(0, n), keys, senders: Pid::all(n).collect() }
    }

    pub fn message(sender: Pid, k: u64) -> Bytes {
        Bytes::from(format!("{sender}:{k}"))
    }
}

impl Protocol for RbProtocol {
    fn regions(&self, _cfg: &SystemConfig) -> Vec<RegionSpec> {
        self.layout.regions()
    }

    fn stop_rule(&self) -> StopRule {
        StopRule::AllCorrectFinished
    }

    fn check_config(&self, cfg: &SystemConfig) -> Result<(), ConfigError> {
        if self.layout.n != cfg.n {
            return Err(ConfigError::Resilience(format!("layout for n={} in a system of {}", self.layout.n, cfg.n)));
        }
        if cfg.n < 2 * cfg.f_p + 1 || cfg.m < 2 * cfg.f_m + 1 {
            return Err(ConfigError::Resilience("reliable broadcast needs n >= 2f_P+1 and m >= 2f_M+1".into()));
        }
        Ok(())
    }

    fn start(&self, ctx: Ctx, role: Role) {
        let layout = self.layout;
        let keys = self.keys;
        let senders = self.senders.clone();
        let me = ctx.pid();
        match role {
            Role::Honest => {
                if senders.contains(&me) {
                    let c = ctx.clone();
                    ctx.spawn(async move {
                        let mut b = Broadcaster::new(layout);
                        for k in 1..=keys {
                            b.broadcast(&c, k, RbProtocol::message(me, k)).await.unwrap();
                        }
                    });
                }
                spawn_observer(&ctx, layout, keys, senders);
            }
            Role::Byzantine(script) => run_adversary(&ctx, layout, keys, script, senders),
        }
    }
}

fn spawn_observer(ctx: &Ctx, layout: RbLayout, keys: u64, senders: BTreeSet<Pid>) {
    let c = ctx.clone();
    ctx.spawn(async move {
        let mut obs = Observer::new(c.clone(), layout, RbShared::new(), None);
        loop {
            obs.pass().await;
            if senders.iter().all(|&q| obs.next_key(q) > keys) {
                c.finish();
            }
        }
    });
}

/// Writes `v` to each memory directly, bypassing replication.
async fn write_each(ctx: &Ctx, reg: crate::model::RegId, per_mem: impl Fn(Mid) -> Bytes) {
    for mem in Mid::all(ctx.m()) {
        let _ = ctx.write(mem, reg, per_mem(mem)).await;
    }
}

fn run_adversary(ctx: &Ctx, layout: RbLayout, keys: u64, script: AdversaryScript, senders: BTreeSet<Pid>) {
    let me = ctx.pid();
    let n = layout.n;
    let c = ctx.clone();
    match script {
        AdversaryScript::Silent => {}
        AdversaryScript::Equivocator => {
            ctx.spawn(async move {
                let half = c.m().div_ceil(2);
                for k in 1..=keys {
                    let a = c.sign(proofs::encode_body(k, b"A")).to_bytes();
                    let b = c.sign(proofs::encode_body(k, b"B")).to_bytes();
                    write_each(&c, layout.value(me, k, me), |mem| if mem.index() < half { a.clone() } else { b.clone() })
                        .await;
                }
            });
            spawn_observer(ctx, layout, keys, senders);
        }
        AdversaryScript::StaleProofReplayer => {
            ctx.spawn(async move {
                let mut b = Broadcaster::new(layout);
                b.broadcast(&c, 1, RbProtocol::message(me, 1)).await.unwrap();
                // Key 2 reuses the key-1 signature.
                let stale = c.sign(proofs::encode_body(1, &RbProtocol::message(me, 1))).to_bytes();
                write_each(&c, layout.value(me, 2, me), |_| stale.clone()).await;
                let v = c.verifier();
                let mut replayed = BTreeSet::new();
                loop {
                    let todo: Vec<Pid> = Pid::all(n).filter(|&q| q != me && !replayed.contains(&q)).collect();
                    for q in todo {
                        let regs = Pid::all(n).map(|i| layout.l2(i, 1, q)).collect();
                        let vals = crate::swmr::read_many(&c, regs).await;
                        if let Some(raw) = vals.into_iter().flatten().find(|r| proofs::check_l2(&v, n, q, 1, r).is_some()) {
                            for k in 2..=keys.max(2) {
                                write_each(&c, layout.l2(me, k, q), |_| raw.clone()).await;
                            }
                            replayed.insert(q);
                        }
                    }
                    c.sleep(10).await;
                }
            });
            spawn_observer(ctx, layout, keys, senders);
        }
        AdversaryScript::PermissionGrabber => {
            ctx.spawn(async move {
                for mem in Mid::all(c.m()) {
                    for owner in Pid::all(n).filter(|&p| p != me) {
                        c.change_permission(mem, layout.region(owner), Permission::open(n)).await;
                        c.change_permission(mem, layout.region(owner), Permission::exclusive(me, n)).await;
                        let junk = c.sign(proofs::encode_body(1, b"grab")).to_bytes();
                        let _ = c.write(mem, layout.value(owner, 1, owner), junk).await;
                    }
                }
                let mut b = Broadcaster::new(layout);
                for k in 1..=keys {
                    b.broadcast(&c, k, RbProtocol::message(me, k)).await.unwrap();
                }
            });
            spawn_observer(ctx, layout, keys, senders);
        }
        AdversaryScript::HistoryForger => {
            ctx.spawn(async move {
                for q in Pid::all(n) {
                    // A value claiming to come from q, with a made-up tag.
                    let fake = SignedValue::forged(proofs::encode_body(1, b"forged"), q, [7; 32]);
                    let copies: Vec<(Pid, Bytes)> =
                        Pid::all(n).map(|i| (i, c.sign(fake.to_bytes()).to_bytes())).collect();
                    let l1 = c.sign(proofs::l1_body(q, 1, &copies)).to_bytes();
                    let l2 = c.sign(proofs::l2_body(q, 1, &vec![l1.clone(); n])).to_bytes();
                    write_each(&c, layout.l1(me, 1, q), |_| l1.clone()).await;
                    write_each(&c, layout.l2(me, 1, q), |_| l2.clone()).await;
                    if q == me {
                        write_each(&c, layout.value(me, 1, me), |_| fake.to_bytes()).await;
                    }
                }
            });
            spawn_observer(ctx, layout, keys, senders);
        }
    }
}


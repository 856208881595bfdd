//! Aligned Paxos: one Paxos instance whose acceptors are the processes and
//! the memories together, so any majority of `n + m` agents suffices.
//!
//! Both phases talk to every agent at once and restart on any refusal. Processes are ordinary Paxos
//! acceptors reached by messages; memories are reached exactly as in
//! Protected Memory Paxos (take the permission, write the proposal number,
//! read all slots; then write the value). [`MemoryAccess::ReadBack`]
//! replaces the permissions with a Disk Paxos style read after each write.
//!
//! As in Protected Memory Paxos, `p1` skips the first phase on its first
//! attempt, since no smaller proposal number exists.

pub mod msg;

use std::cell::RefCell;
use std::rc::Rc;

use bytes::Bytes;
use futures::channel::mpsc;
use futures::future::LocalBoxFuture;
use futures::stream::{FuturesUnordered, StreamExt};
use serde::{Deserialize, Serialize};

use crate::ids::{majority, Mid, Pid};
use crate::model::{ChangePolicy, Permission, RegionSpec};
use crate::pmp::slot::{inspect, Inspection};
use crate::pmp::{await_leadership, slot_reg, slot_regs, PropNr, Slot, REGION};
use crate::sim::{ConfigError, Ctx, DecisionPath, Protocol, ProtocolEvent, Role, SystemConfig};

pub use msg::AlignedMsg;

/// How proposers access the memories.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MemoryAccess {
    /// Exclusive write permission taken before the first write.
    #[default]
    Exclusive,
    /// Static open permissions; every write is followed by a read of all
    /// slots.
    ReadBack,
}

/// A standard single-decree acceptor.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Acceptor {
    pub promised: PropNr,
    pub accepted: Option<(PropNr, Bytes)>,
}

impl Acceptor {
    pub fn on_prepare(&mut self, nr: PropNr) -> AlignedMsg {
        if nr > self.promised {
            self.promised = nr;
            AlignedMsg::Promise { nr, accepted: self.accepted.clone() }
        } else {
            AlignedMsg::Nack { nr, promised: self.promised }
        }
    }

    pub fn on_accept(&mut self, nr: PropNr, value: Bytes) -> AlignedMsg {
        if nr >= self.promised {
            self.promised = nr;
            self.accepted = Some((nr, value));
            AlignedMsg::Accepted { nr }
        } else {
            AlignedMsg::Nack { nr, promised: self.promised }
        }
    }
}

/// A phase-1 response from one agent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Heard {
    Memory(Vec<Slot>),
    Process(Option<(PropNr, Bytes)>),
}

/// Restart if a memory shows a higher proposal number, otherwise the
/// highest accepted value across both kinds of agents.
pub fn analyze1(resps: &[Heard], nr: PropNr) -> Inspection {
    let mut best: Option<(PropNr, Bytes)> = None;
    for r in resps {
        let found = match r {
            Heard::Memory(slots) => match inspect(slots, nr) {
                Inspection::Preempted(higher) => return Inspection::Preempted(higher),
                Inspection::Clear(found) => found,
            },
            Heard::Process(acc) => acc.clone(),
        };
        if found.as_ref().map(|f| f.0) > best.as_ref().map(|b| b.0) {
            best = found;
        }
    }
    Inspection::Clear(best)
}

type Replies = mpsc::UnboundedReceiver<(Pid, AlignedMsg)>;

struct Proposer {
    ctx: Ctx,
    access: MemoryAccess,
    /// This proposer's last accepted proposal, kept in its slots across
    /// attempts.
    own: Rc<RefCell<Slot>>,
}

fn memory_phase1(p: &Proposer, mem: Mid, nr: PropNr) -> LocalBoxFuture<'static, Option<Vec<Slot>>> {
    let ctx = p.ctx.clone();
    let access = p.access;
    let own = p.own.clone();
    Box::pin(async move {
        let me = ctx.pid();
        if access == MemoryAccess::Exclusive {
            ctx.change_permission(mem, REGION, Permission::exclusive(me, ctx.n())).await;
            ctx.event(ProtocolEvent::Acquired { mem, proposal: nr.raw() });
        }
        let block = Slot { min_prop: nr, ..own.borrow().clone() };
        ctx.write(mem, slot_reg(me), block.encode()).await.ok()?;
        let vals = ctx.read_many(mem, slot_regs(ctx.n())).await;
        vals.into_iter().map(|r| r.ok().map(|v| Slot::from_register(&v))).collect()
    })
}

fn memory_phase2(p: &Proposer, mem: Mid, nr: PropNr, v: Bytes) -> LocalBoxFuture<'static, bool> {
    let ctx = p.ctx.clone();
    let access = p.access;
    Box::pin(async move {
        if ctx.write(mem, slot_reg(ctx.pid()), Slot::accepted(nr, v).encode()).await.is_err() {
            return false;
        }
        if access == MemoryAccess::Exclusive {
            return true;
        }
        let vals = ctx.read_many(mem, slot_regs(ctx.n())).await;
        vals.into_iter().all(|r| r.is_ok_and(|v| Slot::from_register(&v).min_prop <= nr))
    })
}

impl Proposer {
    async fn phase1(&self, nr: PropNr, replies: &mut Replies) -> Result<Vec<Heard>, PropNr> {
        let ctx = &self.ctx;
        let quorum = majority(ctx.n() + ctx.m());
        let mut lanes: FuturesUnordered<_> = Mid::all(ctx.m()).map(|mem| memory_phase1(self, mem, nr)).collect();
        ctx.send_all(AlignedMsg::Prepare { nr }.encode());
        let mut heard = Vec::new();
        while heard.len() < quorum {
            futures::select! {
                r = lanes.select_next_some() => heard.push(Heard::Memory(r.ok_or(nr)?)),
                (_, m) = replies.select_next_some() => match m {
                    AlignedMsg::Promise { nr: r, accepted } if r == nr => heard.push(Heard::Process(accepted)),
                    AlignedMsg::Nack { nr: r, promised } if r == nr => return Err(promised),
                    _ => {}
                },
            }
        }
        Ok(heard)
    }

    async fn phase2(&self, nr: PropNr, v: &Bytes, replies: &mut Replies) -> Result<(), PropNr> {
        let ctx = &self.ctx;
        let quorum = majority(ctx.n() + ctx.m());
        ctx.event(ProtocolEvent::Phase2 { proposal: nr.raw(), value: v.clone() });
        *self.own.borrow_mut() = Slot::accepted(nr, v.clone());
        let mut lanes: FuturesUnordered<_> =
            Mid::all(ctx.m()).map(|mem| memory_phase2(self, mem, nr, v.clone())).collect();
        ctx.send_all(AlignedMsg::Accept { nr, value: v.clone() }.encode());
        let mut acks = 0;
        while acks < quorum {
            futures::select! {
                ok = lanes.select_next_some() => {
                    if !ok {
                        return Err(nr);
                    }
                    acks += 1;
                },
                (_, m) = replies.select_next_some() => match m {
                    AlignedMsg::Accepted { nr: r } if r == nr => acks += 1,
                    AlignedMsg::Nack { nr: r, promised } if r == nr => return Err(promised),
                    _ => {}
                },
            }
        }
        Ok(())
    }

    async fn attempt(&self, nr: PropNr, input: Bytes, skip: bool, replies: &mut Replies) -> Result<Bytes, PropNr> {
        let v = if skip {
            input
        } else {
            let heard = self.phase1(nr, replies).await?;
            match analyze1(&heard, nr) {
                Inspection::Preempted(higher) => return Err(higher),
                Inspection::Clear(best) => best.map_or(input, |b| b.1),
            }
        };
        self.phase2(nr, &v, replies).await?;
        Ok(v)
    }

    async fn run(self, input: Bytes, mut replies: Replies) {
        let me = self.ctx.pid();
        let mut seen = PropNr::ZERO;
        let mut first = true;
        while await_leadership(&self.ctx).await {
            let nr = PropNr::new(seen.next_round_for(me).max(1), me);
            let skip = first && me == Pid::LEADER;
            first = false;
            match self.attempt(nr, input.clone(), skip, &mut replies).await {
                Ok(v) => {
                    self.ctx.decide(v.clone(), DecisionPath::Backup);
                    self.ctx.send_all(AlignedMsg::Decided { value: v }.encode());
                    return;
                }
                Err(higher) => {
                    self.ctx.event(ProtocolEvent::AttemptAborted { proposal: nr.raw() });
                    seen = seen.max(higher).max(nr);
                }
            }
        }
    }
}

/// Routes incoming messages: acceptor requests are answered here, replies
/// go to the proposer.
async fn dispatch(ctx: Ctx, to_proposer: mpsc::UnboundedSender<(Pid, AlignedMsg)>) {
    let mut acceptor = Acceptor::default();
    loop {
        let msg = ctx.recv().await;
        let Ok(m) = AlignedMsg::decode(&msg.payload) else { continue };
        match m {
            AlignedMsg::Prepare { nr } => ctx.send(msg.from, acceptor.on_prepare(nr).encode()),
            AlignedMsg::Accept { nr, value } => ctx.send(msg.from, acceptor.on_accept(nr, value).encode()),
            AlignedMsg::Decided { value } => ctx.decide(value, DecisionPath::Backup),
            reply => {
                let _ = to_proposer.unbounded_send((msg.from, reply));
            }
        }
    }
}

pub struct AlignedPaxosProtocol {
    pub inputs: Vec<Bytes>,
    pub access: MemoryAccess,
}

impl AlignedPaxosProtocol {
    pub fn new(inputs: Vec<Bytes>, access: MemoryAccess) -> Self {
        Self { inputs, access }
    }
}

impl Protocol for AlignedPaxosProtocol {
    fn regions(&self, cfg: &SystemConfig) -> Vec<RegionSpec> {
        let spec = match self.access {
            MemoryAccess::Exclusive => {
                RegionSpec { id: REGION, permission: Permission::exclusive(Pid::LEADER, cfg.n), policy: ChangePolicy::ExclusiveWriter }
            }
            MemoryAccess::ReadBack => {
                RegionSpec { id: REGION, permission: Permission::open(cfg.n), policy: ChangePolicy::Static }
            }
        };
        vec![spec]
    }

    fn check_config(&self, cfg: &SystemConfig) -> Result<(), ConfigError> {
        if self.inputs.len() != cfg.n {
            return Err(ConfigError::Resilience(format!("{} inputs for n={}", self.inputs.len(), cfg.n)));
        }
        if cfg.byzantine || !cfg.links {
            return Err(ConfigError::Resilience("aligned paxos needs crash faults and message links".into()));
        }
        if 2 * (cfg.f_p + cfg.f_m) >= cfg.n + cfg.m {
            return Err(ConfigError::Resilience("aligned paxos needs f_P + f_M < (n + m) / 2".into()));
        }
        Ok(())
    }

    fn start(&self, ctx: Ctx, role: Role) {
        if role != Role::Honest {
            return;
        }
        let (tx, rx) = mpsc::unbounded();
        ctx.spawn(dispatch(ctx.clone(), tx));
        let proposer = Proposer { ctx: ctx.clone(), access: self.access, own: Rc::default() };
        ctx.spawn(proposer.run(self.inputs[ctx.pid().index()].clone(), rx));
    }
}

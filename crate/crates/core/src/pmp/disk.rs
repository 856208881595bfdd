//! Disk Paxos baseline: the same slots on memories everybody may write, and
//! therefore a read-back after every write to detect competing leaders.
//!
//! `p1`'s first ballot is the smallest possible one, so it skips the first
//! phase just like in Protected Memory Paxos; its decision still needs a
//! write followed by a read.

use std::cell::Cell;
use std::rc::Rc;

use bytes::Bytes;
use futures::future::LocalBoxFuture;
use futures::stream::{FuturesUnordered, StreamExt};

use crate::ids::{majority, Mid, Pid};
use crate::model::{ChangePolicy, Permission, RegionSpec};
use crate::sim::{ConfigError, Ctx, Protocol, ProtocolEvent, Role, SystemConfig};

use super::slot::{inspect, Inspection, PropNr, Slot};
use super::{announce, await_leadership, crash_resilience, learn, slot_reg, slot_regs, REGION};

/// Writes `block` to this process's slot on `mem`, then reads all slots.
/// `None` if the write was refused.
fn write_then_read(ctx: &Ctx, mem: Mid, block: Slot) -> LocalBoxFuture<'static, Option<Vec<Slot>>> {
    let ctx = ctx.clone();
    Box::pin(async move {
        ctx.write(mem, slot_reg(ctx.pid()), block.encode()).await.ok()?;
        let vals = ctx.read_many(mem, slot_regs(ctx.n())).await;
        vals.into_iter().map(|r| r.ok().map(|v| Slot::from_register(&v))).collect()
    })
}

/// Runs one phase on all memories until a majority finished. Returns the
/// highest accepted value seen, or the preempting proposal number.
async fn phase(ctx: &Ctx, nr: PropNr, block: Slot) -> Result<Option<(PropNr, Bytes)>, PropNr> {
    let mut lanes: FuturesUnordered<_> = Mid::all(ctx.m()).map(|mem| write_then_read(ctx, mem, block.clone())).collect();
    let mut best: Option<(PropNr, Bytes)> = None;
    let mut done = 0;
    while let Some(res) = lanes.next().await {
        let Some(slots) = res else { return Err(nr) };
        match inspect(&slots, nr) {
            Inspection::Preempted(higher) => return Err(higher),
            Inspection::Clear(found) => {
                if found.as_ref().map(|f| f.0) > best.as_ref().map(|b| b.0) {
                    best = found;
                }
            }
        }
        done += 1;
        if done >= majority(ctx.m()) {
            return Ok(best);
        }
    }
    std::future::pending().await
}

async fn propose(ctx: Ctx, input: Bytes, leading: Rc<Cell<bool>>) {
    let me = ctx.pid();
    let mut seen = PropNr::ZERO;
    let mut first = true;
    // this process's last accepted proposal, carried into later ballots
    let mut own = Slot::default();
    while await_leadership(&ctx).await {
        leading.set(true);
        let nr = PropNr::new(seen.next_round_for(me).max(1), me);
        let skip = first && me == Pid::LEADER;
        first = false;
        let value = if skip {
            Ok(input.clone())
        } else {
            let block = Slot { min_prop: nr, ..own.clone() };
            phase(&ctx, nr, block).await.map(|best| best.map_or(input.clone(), |b| b.1))
        };
        let result = match value {
            Ok(v) => {
                ctx.event(ProtocolEvent::Phase2 { proposal: nr.raw(), value: v.clone() });
                own = Slot::accepted(nr, v.clone());
                phase(&ctx, nr, own.clone()).await.map(|_| v)
            }
            Err(e) => Err(e),
        };
        match result {
            Ok(v) => {
                announce(&ctx, v).await;
                return;
            }
            Err(higher) => {
                ctx.event(ProtocolEvent::AttemptAborted { proposal: nr.raw() });
                seen = seen.max(higher).max(nr);
                leading.set(false);
            }
        }
    }
}

pub struct DiskPaxosProtocol {
    pub inputs: Vec<Bytes>,
}

impl DiskPaxosProtocol {
    pub fn new(inputs: Vec<Bytes>) -> Self {
        Self { inputs }
    }
}

impl Protocol for DiskPaxosProtocol {
    fn regions(&self, cfg: &SystemConfig) -> Vec<RegionSpec> {
        vec![RegionSpec { id: REGION, permission: Permission::open(cfg.n), policy: ChangePolicy::Static }]
    }

    fn check_config(&self, cfg: &SystemConfig) -> Result<(), ConfigError> {
        crash_resilience("disk paxos", self.inputs.len(), cfg)
    }

    fn start(&self, ctx: Ctx, role: Role) {
        if role != Role::Honest {
            return;
        }
        let input = self.inputs[ctx.pid().index()].clone();
        let leading = Rc::new(Cell::new(false));
        ctx.spawn(propose(ctx.clone(), input, leading.clone()));
        let c = ctx.clone();
        ctx.spawn(async move { learn(&c, leading).await });
    }
}

//! Protected Memory Paxos: crash-tolerant consensus for `n >= f_P + 1`
//! processes and `m >= 2f_M + 1` memories that decides in two delays when
//! the initial leader runs alone.
//!
//! Each memory has a single region with exclusive-writer permissions, held
//! initially by `p1`. A leader takes the permission on each memory, writes
//! its proposal number into its own slot, reads every slot and adopts the
//! highest accepted value; then it writes the value into its slot on a
//! majority. A successful write means nobody took the permission in
//! between, so no read-back is needed. On its first attempt `p1` already
//! holds all permissions and goes straight to the second write.
//!
//! [`disk`] is the Disk Paxos baseline over open memories.

pub mod check;
pub mod disk;
pub mod slot;

pub use slot::{PropNr, Slot};

use std::cell::Cell;
use std::rc::Rc;

use bytes::Bytes;
use futures::future::LocalBoxFuture;
use futures::stream::{FuturesUnordered, StreamExt};

use crate::ids::{majority, Mid, Pid};
use crate::model::{ChangePolicy, Permission, RegId, RegName, RegionId, RegionSpec};
use crate::sim::{ConfigError, Ctx, DecisionPath, Protocol, ProtocolEvent, Role, SystemConfig};
use crate::wire::{Reader, Writer};

use slot::{inspect, Inspection};

pub const REGION: RegionId = RegionId(0);
const KIND_SLOT: u8 = 1;
const KIND_DECISION: u8 = 2;
const MSG_DECIDED: u8 = 0xd0;

pub fn slot_reg(p: Pid) -> RegId {
    RegId::new(REGION, RegName::new(KIND_SLOT, u32::from(p.0), 0))
}

pub fn decision_reg(p: Pid) -> RegId {
    RegId::new(REGION, RegName::new(KIND_DECISION, u32::from(p.0), 0))
}

pub(crate) fn slot_regs(n: usize) -> Vec<RegId> {
    Pid::all(n).map(slot_reg).collect()
}

pub(crate) fn crash_resilience(name: &str, inputs: usize, cfg: &SystemConfig) -> Result<(), ConfigError> {
    if inputs != cfg.n {
        return Err(ConfigError::Resilience(format!("{inputs} inputs for n={}", cfg.n)));
    }
    if cfg.byzantine {
        return Err(ConfigError::Resilience(format!("{name} tolerates crash faults only")));
    }
    if cfg.f_p >= cfg.n || cfg.m < 2 * cfg.f_m + 1 {
        return Err(ConfigError::Resilience(format!("{name} needs n >= f_P+1 and m >= 2f_M+1")));
    }
    Ok(())
}

/// Waits until Ω names this process. Returns false once the process has
/// decided.
pub(crate) async fn await_leadership(ctx: &Ctx) -> bool {
    loop {
        if ctx.decided().is_some() {
            return false;
        }
        if ctx.omega() == ctx.pid() {
            return true;
        }
        ctx.sleep(1).await;
    }
}

/// Records the decision and makes it known: by message if links exist,
/// otherwise through this process's decision register.
pub(crate) async fn announce(ctx: &Ctx, v: Bytes) {
    ctx.decide(v.clone(), DecisionPath::Backup);
    if ctx.config().links {
        let mut w = Writer::new();
        w.u8(MSG_DECIDED).bytes(&v);
        ctx.send_all(w.finish());
    } else {
        // A competing leader may hold the permission by now; take it back
        // until the write sticks. Nobody else writes this register, so one
        // success per memory is enough.
        let mut pending: FuturesUnordered<_> = Mid::all(ctx.m())
            .map(|mem| {
                let v = v.clone();
                async move {
                    let reg = decision_reg(ctx.pid());
                    while ctx.write(mem, reg, v.clone()).await.is_err() {
                        ctx.change_permission(mem, REGION, Permission::exclusive(ctx.pid(), ctx.n())).await;
                    }
                }
            })
            .collect();
        while pending.next().await.is_some() {}
    }
}

/// Learns a decision announced by someone else. Without links the memories
/// are polled, except while this process is `leading` an attempt, so that
/// the polls never delay its own operations.
pub(crate) async fn learn(ctx: &Ctx, leading: Rc<Cell<bool>>) {
    if ctx.config().links {
        loop {
            let msg = ctx.recv().await;
            let mut r = Reader::new(&msg.payload);
            if r.u8() != Ok(MSG_DECIDED) {
                continue;
            }
            if let Ok(v) = r.bytes() {
                ctx.decide(Bytes::copy_from_slice(v), DecisionPath::Backup);
                return;
            }
        }
    }
    // one polling lane per memory, so crashed memories do not block
    let regs: Vec<RegId> = Pid::all(ctx.n()).map(decision_reg).collect();
    let mut lanes: FuturesUnordered<_> = Mid::all(ctx.m())
        .map(|mem| {
            let regs = regs.clone();
            let leading = leading.clone();
            async move {
                loop {
                    if ctx.decided().is_some() {
                        return None;
                    }
                    if leading.get() {
                        ctx.sleep(1).await;
                        continue;
                    }
                    let vals = ctx.read_many(mem, regs.clone()).await;
                    if let Some(v) = vals.into_iter().find_map(|r| r.ok().flatten()) {
                        return Some(v);
                    }
                }
            }
        })
        .collect();
    if let Some(Some(v)) = lanes.next().await {
        ctx.decide(v, DecisionPath::Backup);
    }
}

enum Step {
    Prepared(Mid, Option<Vec<Slot>>),
    Accepted(bool),
}

fn prepare(ctx: &Ctx, mem: Mid, nr: PropNr) -> LocalBoxFuture<'static, Step> {
    let ctx = ctx.clone();
    Box::pin(async move {
        let me = ctx.pid();
        ctx.change_permission(mem, REGION, Permission::exclusive(me, ctx.n())).await;
        ctx.event(ProtocolEvent::Acquired { mem, proposal: nr.raw() });
        if ctx.write(mem, slot_reg(me), Slot::prepared(nr).encode()).await.is_err() {
            return Step::Prepared(mem, None);
        }
        let slots = ctx.read_many(mem, slot_regs(ctx.n())).await;
        let slots = slots.into_iter().map(|r| r.ok().map(|v| Slot::from_register(&v))).collect();
        Step::Prepared(mem, slots)
    })
}

fn accept(ctx: &Ctx, mem: Mid, nr: PropNr, v: Bytes) -> LocalBoxFuture<'static, Step> {
    let ctx = ctx.clone();
    Box::pin(async move {
        let ok = ctx.write(mem, slot_reg(ctx.pid()), Slot::accepted(nr, v).encode()).await.is_ok();
        Step::Accepted(ok)
    })
}

/// One attempt with proposal `nr`. Returns the decided value, or the
/// highest proposal number seen if the attempt was aborted.
async fn attempt(ctx: &Ctx, nr: PropNr, input: Bytes, skip_prepare: bool) -> Result<Bytes, PropNr> {
    let m = ctx.m();
    let mut lanes: FuturesUnordered<LocalBoxFuture<'static, Step>> = FuturesUnordered::new();
    let mut current = input;
    let mut current_max = PropNr::ZERO;
    let mut ready = Vec::new();
    let mut phase2 = skip_prepare;
    let mut acks = 0;
    if skip_prepare {
        ctx.event(ProtocolEvent::Phase2 { proposal: nr.raw(), value: current.clone() });
        lanes.extend(Mid::all(m).map(|mem| accept(ctx, mem, nr, current.clone())));
    } else {
        lanes.extend(Mid::all(m).map(|mem| prepare(ctx, mem, nr)));
    }
    while let Some(step) = lanes.next().await {
        match step {
            Step::Prepared(_, None) | Step::Accepted(false) => return Err(nr),
            Step::Prepared(mem, Some(slots)) => {
                match inspect(&slots, nr) {
                    Inspection::Preempted(higher) => return Err(higher),
                    Inspection::Clear(Some((acc, v))) if acc > current_max => {
                        // a straggler with a newer value than the one
                        // already being written
                        if phase2 {
                            return Err(nr);
                        }
                        current = v;
                        current_max = acc;
                    }
                    Inspection::Clear(_) => {}
                }
                if phase2 {
                    lanes.push(accept(ctx, mem, nr, current.clone()));
                } else {
                    ready.push(mem);
                    if ready.len() >= majority(m) {
                        phase2 = true;
                        ctx.event(ProtocolEvent::Phase2 { proposal: nr.raw(), value: current.clone() });
                        for mem in ready.drain(..) {
                            lanes.push(accept(ctx, mem, nr, current.clone()));
                        }
                    }
                }
            }
            Step::Accepted(true) => {
                acks += 1;
                if acks >= majority(m) {
                    return Ok(current);
                }
            }
        }
    }
    // only crashed memories left
    std::future::pending().await
}

async fn propose(ctx: Ctx, input: Bytes, leading: Rc<Cell<bool>>) {
    let me = ctx.pid();
    let mut seen = PropNr::ZERO;
    let mut first = true;
    while await_leadership(&ctx).await {
        leading.set(true);
        let nr = PropNr::new(seen.next_round_for(me).max(1), me);
        let skip = first && me == Pid::LEADER;
        first = false;
        match attempt(&ctx, nr, input.clone(), skip).await {
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

pub struct PmpProtocol {
    pub inputs: Vec<Bytes>,
}

impl PmpProtocol {
    pub fn new(inputs: Vec<Bytes>) -> Self {
        Self { inputs }
    }
}

impl Protocol for PmpProtocol {
    fn regions(&self, cfg: &SystemConfig) -> Vec<RegionSpec> {
        vec![RegionSpec {
            id: REGION,
            permission: Permission::exclusive(Pid::LEADER, cfg.n),
            policy: ChangePolicy::ExclusiveWriter,
        }]
    }

    fn check_config(&self, cfg: &SystemConfig) -> Result<(), ConfigError> {
        crash_resilience("protected memory paxos", self.inputs.len(), cfg)
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

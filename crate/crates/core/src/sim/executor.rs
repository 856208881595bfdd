//! Deterministic discrete-event executor.
//!
//! Every process runs one or more async lanes. Lanes only block on simulator
//! futures (memory operations, messages, timers), so the executor fully
//! controls interleaving. Messages take exactly one delay and memory
//! operations exactly two; asynchrony is modelled by postponing process
//! steps, which keeps delay accounting exact in every mode.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap, HashMap, HashSet, VecDeque};
use std::rc::Rc;
use std::sync::{Arc, Mutex};
use std::task::{Context, Wake, Waker};

use bytes::Bytes;
use futures::future::LocalBoxFuture;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::ids::{Mid, Pid};
use crate::model::{Memory, ModelError, OpRequest, OpResponse, RegionSpec};
use crate::signatures::Keyring;

use super::config::{ConfigError, RunLimits, Synchrony, SystemConfig};
use super::ctx::{Ctx, Verifier};
use super::fault::{validate_faults, AdversaryScript, FaultKind, FaultSpec, FaultTarget, Pause, Trigger};
use super::omega::{Omega, OmegaSpec};
use super::trace::{Action, Actor, MsgId, OpId, StopReason, Trace};

/// Stall lengths selectable at each choice point of a scripted run.
pub const SCRIPTED_STALLS: [u64; 3] = [0, 1, 4];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{pid} invoked a second operation on {mem} while one was outstanding")]
    OutstandingOp { pid: Pid, mem: Mid },
    #[error("{0} sent a message but links are disabled")]
    LinksDisabled(Pid),
    #[error("{pid} addressed unknown {what}")]
    UnknownTarget { pid: Pid, what: String },
}

/// How a process behaves in a run.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Role {
    Honest,
    Byzantine(AdversaryScript),
}

/// When a run is complete.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum StopRule {
    /// Every live honest process has decided.
    AllCorrectDecided,
    /// Every live honest process called `Ctx::finish`.
    AllCorrectFinished,
    /// Only the horizon, budget or quiescence ends the run.
    Never,
}

/// A protocol as seen by the simulator.
pub trait Protocol {
    /// Regions to create on every memory.
    fn regions(&self, cfg: &SystemConfig) -> Vec<RegionSpec>;

    /// Spawns the lanes of one process.
    fn start(&self, ctx: Ctx, role: Role);

    fn stop_rule(&self) -> StopRule {
        StopRule::AllCorrectDecided
    }

    /// Protocol-specific resilience checks.
    fn check_config(&self, _cfg: &SystemConfig) -> Result<(), ConfigError> {
        Ok(())
    }
}

/// Everything needed to reproduce one run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunSetup {
    pub config: SystemConfig,
    pub synchrony: Synchrony,
    pub limits: RunLimits,
    pub seed: u64,
    pub faults: Vec<FaultSpec>,
    pub pauses: Vec<Pause>,
    pub omega: OmegaSpec,
    /// Scripted stall choices (indices into [`SCRIPTED_STALLS`]); choice
    /// points past the end of the script take no stall. Only used in
    /// asynchronous mode.
    pub script: Option<Vec<u8>>,
}

impl RunSetup {
    pub fn new(config: SystemConfig) -> Self {
        Self {
            config,
            synchrony: Synchrony::Synchronous,
            limits: RunLimits::default(),
            seed: 0,
            faults: Vec::new(),
            pauses: Vec::new(),
            omega: OmegaSpec::default(),
            script: None,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.config.validate()?;
        validate_faults(&self.config, &self.faults)?;
        for p in &self.pauses {
            if p.pid.0 == 0 || p.pid.index() >= self.config.n || p.from > p.until {
                return Err(ConfigError::Faults(format!("bad pause for {}", p.pid)));
            }
        }
        Ok(())
    }
}

pub struct RunOutcome {
    pub trace: Trace,
    /// Number of scheduling choice points encountered.
    pub choice_points: usize,
    pub memories: Vec<Memory>,
    /// Signature verification for the run's keys, for trace checkers.
    pub verifier: Verifier,
}

#[derive(Clone, Debug)]
pub struct Message {
    pub id: MsgId,
    pub from: Pid,
    pub to: Pid,
    pub payload: Bytes,
    pub sent_at: u64,
}

type TaskId = usize;

enum Event {
    Step(TaskId),
    OpComplete(OpId),
    Deliver(Message),
    Timer(u64),
    Fault(usize),
}

struct Scheduled {
    time: u64,
    tie: u64,
    seq: u64,
    event: Event,
}

impl Scheduled {
    fn key(&self) -> (u64, u64, u64) {
        (self.time, self.tie, self.seq)
    }
}

impl PartialEq for Scheduled {
    fn eq(&self, o: &Self) -> bool {
        self.key() == o.key()
    }
}
impl Eq for Scheduled {}
impl PartialOrd for Scheduled {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Scheduled {
    fn cmp(&self, o: &Self) -> Ordering {
        // BinaryHeap is a max-heap.
        o.key().cmp(&self.key())
    }
}

struct PendingOp {
    invoker: Pid,
    mem: Mid,
    request: OpRequest,
    invoked_at: u64,
}

#[derive(Default)]
struct Port {
    busy: bool,
    granted: Option<u64>,
    queue: VecDeque<(u64, Waker)>,
}

impl Port {
    fn grant_next(&mut self) {
        if self.busy || self.granted.is_some() {
            return;
        }
        if let Some((t, w)) = self.queue.pop_front() {
            self.granted = Some(t);
            w.wake();
        }
    }
}

struct Choices {
    rng: ChaCha8Rng,
    script: Option<Vec<u8>>,
    points: usize,
}

impl Choices {
    fn stall(&mut self, sync: Synchrony) -> u64 {
        match sync {
            Synchrony::Synchronous => 0,
            Synchrony::Asynchronous { stall_percent, max_stall } => {
                let point = self.points;
                self.points += 1;
                match &self.script {
                    Some(s) => SCRIPTED_STALLS[s.get(point).copied().unwrap_or(0) as usize % SCRIPTED_STALLS.len()],
                    None => {
                        if max_stall > 0 && self.rng.gen_range(0..100) < stall_percent {
                            self.rng.gen_range(1..=max_stall)
                        } else {
                            0
                        }
                    }
                }
            }
        }
    }

    fn tie(&mut self, sync: Synchrony) -> u64 {
        match (sync, &self.script) {
            (Synchrony::Asynchronous { .. }, None) => self.rng.gen(),
            _ => 0,
        }
    }
}

/// Simulator state shared with the process contexts.
pub(crate) struct World {
    pub cfg: SystemConfig,
    sync: Synchrony,
    pub now: u64,
    seq: u64,
    queue: BinaryHeap<Scheduled>,
    pub memories: Vec<Memory>,
    pub keyring: Rc<Keyring>,
    inbox: Vec<VecDeque<Message>>,
    inbox_wakers: Vec<Vec<Waker>>,
    pending_ops: HashMap<OpId, PendingOp>,
    op_results: HashMap<OpId, OpResponse>,
    op_wakers: HashMap<OpId, Waker>,
    ports: HashMap<(Pid, Mid), Port>,
    next_ticket: u64,
    fired_timers: HashSet<u64>,
    timer_wakers: HashMap<u64, Waker>,
    pub crashed: Vec<bool>,
    pub byzantine: Vec<bool>,
    pub finished: Vec<bool>,
    pub trace: Trace,
    omega: Omega,
    omega_rng: ChaCha8Rng,
    choices: Choices,
    pub spawn_queue: Vec<(Pid, LocalBoxFuture<'static, ()>)>,
    error: Option<SimError>,
    next_op: OpId,
    next_msg: MsgId,
    next_timer: u64,
}

impl World {
    fn schedule(&mut self, time: u64, event: Event) {
        let tie = self.choices.tie(self.sync);
        self.seq += 1;
        self.queue.push(Scheduled { time, tie, seq: self.seq, event });
    }

    pub fn fail(&mut self, e: SimError) {
        if self.error.is_none() {
            self.error = Some(e);
        }
    }

    /// Tries to acquire the (process, memory) port for a new operation.
    /// Waiters are served in FIFO order; `ticket` identifies a waiter that
    /// already queued.
    pub fn acquire_port(&mut self, pid: Pid, mem: Mid, ticket: &mut Option<u64>, w: &Waker) -> bool {
        let port = self.ports.entry((pid, mem)).or_default();
        match *ticket {
            None if !port.busy && port.granted.is_none() && port.queue.is_empty() => true,
            None => {
                self.next_ticket += 1;
                *ticket = Some(self.next_ticket);
                port.queue.push_back((self.next_ticket, w.clone()));
                false
            }
            Some(t) if port.granted == Some(t) => {
                port.granted = None;
                *ticket = None;
                true
            }
            Some(t) => {
                if let Some(slot) = port.queue.iter_mut().find(|(x, _)| *x == t) {
                    slot.1 = w.clone();
                }
                false
            }
        }
    }

    /// Withdraws a queued waiter that gave up.
    pub fn abandon_port(&mut self, pid: Pid, mem: Mid, ticket: u64) {
        let Some(port) = self.ports.get_mut(&(pid, mem)) else { return };
        if port.granted == Some(ticket) {
            port.granted = None;
            port.grant_next();
        } else {
            port.queue.retain(|(t, _)| *t != ticket);
        }
    }

    /// Starts a memory operation. Returns `None` (and records an error) on a
    /// contract violation; such an operation never completes.
    pub fn issue(&mut self, pid: Pid, mem: Mid, request: OpRequest) -> Option<OpId> {
        if mem.0 == 0 || mem.index() >= self.memories.len() {
            self.fail(SimError::UnknownTarget { pid, what: mem.to_string() });
            return None;
        }
        let port = self.ports.entry((pid, mem)).or_default();
        if port.busy {
            self.fail(SimError::OutstandingOp { pid, mem });
            return None;
        }
        port.busy = true;
        self.next_op += 1;
        let op = self.next_op;
        let now = self.now;
        self.trace.push(now, Actor::Process(pid), Action::Invoke { op, mem, request: request.clone() });
        self.pending_ops.insert(op, PendingOp { invoker: pid, mem, request, invoked_at: now });
        if !self.memories[mem.index()].is_crashed() {
            self.schedule(now + 2, Event::OpComplete(op));
        }
        Some(op)
    }

    pub fn poll_op(&mut self, op: OpId, w: &Waker) -> Option<OpResponse> {
        match self.op_results.remove(&op) {
            Some(r) => Some(r),
            None => {
                self.op_wakers.insert(op, w.clone());
                None
            }
        }
    }

    pub fn send(&mut self, from: Pid, to: Pid, payload: Bytes) {
        if !self.cfg.links {
            self.fail(SimError::LinksDisabled(from));
            return;
        }
        if to.0 == 0 || to.index() >= self.cfg.n {
            self.fail(SimError::UnknownTarget { pid: from, what: to.to_string() });
            return;
        }
        self.next_msg += 1;
        let id = self.next_msg;
        let now = self.now;
        self.trace.push(now, Actor::Process(from), Action::Send { msg: id, to, payload: payload.clone() });
        self.schedule(now + 1, Event::Deliver(Message { id, from, to, payload, sent_at: now }));
    }

    pub fn try_recv(&mut self, pid: Pid) -> Option<Message> {
        self.inbox[pid.index()].pop_front()
    }

    pub fn wait_inbox(&mut self, pid: Pid, w: &Waker) {
        self.inbox_wakers[pid.index()].push(w.clone());
    }

    pub fn set_timer(&mut self, delay: u64) -> u64 {
        self.next_timer += 1;
        let id = self.next_timer;
        let at = self.now + delay;
        self.schedule(at, Event::Timer(id));
        id
    }

    pub fn poll_timer(&mut self, id: u64, w: &Waker) -> bool {
        if self.fired_timers.remove(&id) {
            true
        } else {
            self.timer_wakers.insert(id, w.clone());
            false
        }
    }

    pub fn omega(&mut self) -> Pid {
        self.omega.leader(self.now, &mut self.omega_rng)
    }

    fn complete_op(&mut self, op: OpId) {
        let Some(p) = self.pending_ops.remove(&op) else { return };
        let mem = &mut self.memories[p.mem.index()];
        if mem.is_crashed() || self.crashed[p.invoker.index()] {
            return;
        }
        let response = mem.apply(p.invoker, &p.request);
        let now = self.now;
        self.trace.push(
            now,
            Actor::Memory(p.mem),
            Action::Complete { op, invoker: p.invoker, invoked_at: p.invoked_at, response: response.clone() },
        );
        self.op_results.insert(op, response);
        if let Some(w) = self.op_wakers.remove(&op) {
            w.wake();
        }
        if let Some(port) = self.ports.get_mut(&(p.invoker, p.mem)) {
            port.busy = false;
            port.grant_next();
        }
    }

    fn deliver(&mut self, msg: Message) {
        let to = msg.to;
        if self.crashed[to.index()] {
            return;
        }
        let now = self.now;
        self.trace.push(now, Actor::Process(to), Action::Receive { msg: msg.id, from: msg.from, sent_at: msg.sent_at });
        self.inbox[to.index()].push_back(msg);
        for w in std::mem::take(&mut self.inbox_wakers[to.index()]) {
            w.wake();
        }
    }

    fn fire_timer(&mut self, id: u64) {
        match self.timer_wakers.remove(&id) {
            Some(w) => {
                self.fired_timers.insert(id);
                w.wake();
            }
            None => {
                self.fired_timers.insert(id);
            }
        }
    }

    pub fn live_honest(&self) -> impl Iterator<Item = Pid> + '_ {
        Pid::all(self.cfg.n).filter(|p| !self.crashed[p.index()] && !self.byzantine[p.index()])
    }
}

struct ReadyQueue(Mutex<Vec<TaskId>>);

struct TaskWaker {
    id: TaskId,
    ready: Arc<ReadyQueue>,
}

impl Wake for TaskWaker {
    fn wake(self: Arc<Self>) {
        self.wake_by_ref();
    }

    fn wake_by_ref(self: &Arc<Self>) {
        self.ready.0.lock().unwrap().push(self.id);
    }
}

struct Task {
    pid: Pid,
    fut: Option<LocalBoxFuture<'static, ()>>,
    waker: Waker,
}

struct Executor {
    world: Rc<RefCell<World>>,
    tasks: Vec<Option<Task>>,
    step_pending: HashSet<TaskId>,
    ready: Arc<ReadyQueue>,
    pauses: Vec<Pause>,
    faults: Vec<FaultSpec>,
    fired: Vec<bool>,
}

impl Executor {
    fn spawn_pending(&mut self) {
        let spawned = std::mem::take(&mut self.world.borrow_mut().spawn_queue);
        for (pid, fut) in spawned {
            if self.world.borrow().crashed[pid.index()] {
                continue;
            }
            let id = self.tasks.len();
            let waker = Waker::from(Arc::new(TaskWaker { id, ready: self.ready.clone() }));
            self.tasks.push(Some(Task { pid, fut: Some(fut), waker }));
            self.ready.0.lock().unwrap().push(id);
        }
    }

    fn schedule_ready(&mut self) {
        let ready = std::mem::take(&mut *self.ready.0.lock().unwrap());
        let mut w = self.world.borrow_mut();
        for id in ready {
            if self.tasks.get(id).is_some_and(Option::is_some) && self.step_pending.insert(id) {
                let sync = w.sync;
                let stall = w.choices.stall(sync);
                let at = w.now + stall;
                w.schedule(at, Event::Step(id));
            }
        }
    }

    fn step(&mut self, id: TaskId) {
        self.step_pending.remove(&id);
        let Some(task) = self.tasks[id].as_mut() else { return };
        let pid = task.pid;
        let now = self.world.borrow().now;
        if let Some(p) = self.pauses.iter().find(|p| p.pid == pid && p.from <= now && now < p.until) {
            let until = p.until;
            self.step_pending.insert(id);
            self.world.borrow_mut().schedule(until, Event::Step(id));
            return;
        }
        let mut fut = task.fut.take().expect("task polled re-entrantly");
        let waker = task.waker.clone();
        let done = fut.as_mut().poll(&mut Context::from_waker(&waker)).is_ready();
        if done {
            drop(fut);
            self.tasks[id] = None;
        } else if let Some(task) = self.tasks[id].as_mut() {
            task.fut = Some(fut);
        }
    }

    fn apply_fault(&mut self, idx: usize) {
        if self.fired[idx] {
            return;
        }
        self.fired[idx] = true;
        let f = self.faults[idx];
        let mut dropped = Vec::new();
        {
            let mut w = self.world.borrow_mut();
            let now = w.now;
            match f.target {
                FaultTarget::Process(p) => {
                    if w.crashed[p.index()] {
                        return;
                    }
                    w.crashed[p.index()] = true;
                    w.trace.faulty.insert(p);
                    w.inbox[p.index()].clear();
                    for slot in self.tasks.iter_mut() {
                        if slot.as_ref().is_some_and(|t| t.pid == p) {
                            dropped.push(slot.take());
                        }
                    }
                }
                FaultTarget::Memory(m) => {
                    w.memories[m.index()].crash();
                    w.trace.crashed_memories.insert(m);
                }
            }
            w.trace.push(now, Actor::Scheduler, Action::Fault { target: f.target, kind: f.kind });
        }
        drop(dropped);
    }

    fn fire_decision_triggers(&mut self) {
        for idx in 0..self.faults.len() {
            if self.fired[idx] {
                continue;
            }
            if let Trigger::WhenDecided(p) = self.faults[idx].trigger {
                if self.world.borrow().trace.decisions.contains_key(&p) {
                    self.apply_fault(idx);
                }
            }
        }
    }

    fn stop_condition(&self, rule: StopRule) -> bool {
        let w = self.world.borrow();
        match rule {
            StopRule::AllCorrectDecided => w.live_honest().all(|p| w.trace.decisions.contains_key(&p)),
            StopRule::AllCorrectFinished => w.live_honest().all(|p| w.finished[p.index()]),
            StopRule::Never => false,
        }
    }
}

/// Runs `protocol` under `setup` to completion.
pub fn run(setup: &RunSetup, protocol: &dyn Protocol) -> Result<RunOutcome, SimError> {
    setup.validate()?;
    let cfg = setup.config.clone();
    protocol.check_config(&cfg)?;

    let scheduled_faulty: BTreeSet<Pid> = setup
        .faults
        .iter()
        .filter_map(|f| match f.target {
            FaultTarget::Process(p) => Some(p),
            FaultTarget::Memory(_) => None,
        })
        .collect();
    let last_fault_time = setup
        .faults
        .iter()
        .filter(|f| matches!(f.target, FaultTarget::Process(_)))
        .filter_map(|f| match f.trigger {
            Trigger::At(t) => Some(t),
            Trigger::WhenDecided(_) => None,
        })
        .max()
        .unwrap_or(0);
    let omega = Omega::resolve(&setup.omega, cfg.n, &scheduled_faulty, last_fault_time)?;

    let mut trace = Trace { n: cfg.n, m: cfg.m, ..Trace::default() };
    let regions = protocol.regions(&cfg);
    let mut memories = Vec::with_capacity(cfg.m);
    for mid in Mid::all(cfg.m) {
        let mut mem = Memory::new(mid, cfg.n);
        for spec in &regions {
            mem.add_region(spec.clone())?;
            trace.push(
                0,
                Actor::Memory(mid),
                Action::RegionInit {
                    mem: mid,
                    region: spec.id,
                    permission: spec.permission.clone(),
                    policy: spec.policy,
                },
            );
        }
        memories.push(mem);
    }

    let mut master = ChaCha8Rng::seed_from_u64(setup.seed);
    let keyring = Rc::new(Keyring::new(cfg.n, master.gen()));
    let omega_rng = ChaCha8Rng::seed_from_u64(master.gen());
    let choices = Choices { rng: ChaCha8Rng::seed_from_u64(master.gen()), script: setup.script.clone(), points: 0 };

    let world = Rc::new(RefCell::new(World {
        sync: setup.synchrony,
        now: 0,
        seq: 0,
        queue: BinaryHeap::new(),
        memories,
        keyring,
        inbox: vec![VecDeque::new(); cfg.n],
        inbox_wakers: vec![Vec::new(); cfg.n],
        pending_ops: HashMap::new(),
        op_results: HashMap::new(),
        op_wakers: HashMap::new(),
        ports: HashMap::new(),
        next_ticket: 0,
        fired_timers: HashSet::new(),
        timer_wakers: HashMap::new(),
        crashed: vec![false; cfg.n],
        byzantine: vec![false; cfg.n],
        finished: vec![false; cfg.n],
        trace,
        omega,
        omega_rng,
        choices,
        spawn_queue: Vec::new(),
        error: None,
        next_op: 0,
        next_msg: 0,
        next_timer: 0,
        cfg: cfg.clone(),
    }));

    let mut ex = Executor {
        world: world.clone(),
        tasks: Vec::new(),
        step_pending: HashSet::new(),
        ready: Arc::new(ReadyQueue(Mutex::new(Vec::new()))),
        pauses: setup.pauses.clone(),
        faults: setup.faults.clone(),
        fired: vec![false; setup.faults.len()],
    };

    // Byzantine processes are faulty from the start; everything else is
    // scheduled.
    let mut roles = vec![Role::Honest; cfg.n];
    for (idx, f) in setup.faults.iter().enumerate() {
        match (f.kind, f.trigger) {
            (FaultKind::Byzantine(script), _) => {
                let FaultTarget::Process(p) = f.target else { unreachable!() };
                roles[p.index()] = Role::Byzantine(script);
                ex.fired[idx] = true;
                let mut w = world.borrow_mut();
                w.byzantine[p.index()] = true;
                w.trace.faulty.insert(p);
                w.trace.byzantine.insert(p);
                w.trace.push(0, Actor::Scheduler, Action::Fault { target: f.target, kind: f.kind });
            }
            (FaultKind::Crash, Trigger::At(t)) => world.borrow_mut().schedule(t, Event::Fault(idx)),
            (FaultKind::Crash, Trigger::WhenDecided(_)) => {}
        }
    }

    for p in Pid::all(cfg.n) {
        protocol.start(Ctx::new(p, world.clone()), roles[p.index()]);
    }
    ex.spawn_pending();
    ex.schedule_ready();

    let rule = protocol.stop_rule();
    let stop = loop {
        if let Some(e) = world.borrow_mut().error.take() {
            return Err(e);
        }
        if ex.stop_condition(rule) {
            break StopReason::Done;
        }
        let next = world.borrow_mut().queue.pop();
        let Some(ev) = next else { break StopReason::Quiescent };
        if ev.time > setup.limits.horizon {
            break StopReason::HorizonReached;
        }
        {
            let mut w = world.borrow_mut();
            if w.trace.events >= setup.limits.budget {
                break StopReason::BudgetExhausted;
            }
            w.trace.events += 1;
            w.now = ev.time;
        }
        match ev.event {
            Event::Step(id) => ex.step(id),
            Event::OpComplete(op) => world.borrow_mut().complete_op(op),
            Event::Deliver(msg) => world.borrow_mut().deliver(msg),
            Event::Timer(id) => world.borrow_mut().fire_timer(id),
            Event::Fault(idx) => ex.apply_fault(idx),
        }
        ex.spawn_pending();
        ex.fire_decision_triggers();
        ex.schedule_ready();
    };

    // Drop lanes before taking the world apart; they hold references to it.
    ex.tasks.clear();
    let leftover = std::mem::take(&mut world.borrow_mut().spawn_queue);
    drop(leftover);
    let mut w = world.borrow_mut();
    w.trace.stop = stop;
    w.trace.end_time = w.now;
    let choice_points = w.choices.points;
    let trace = std::mem::take(&mut w.trace);
    let memories = std::mem::take(&mut w.memories);
    let verifier = Verifier::new(w.keyring.clone());
    Ok(RunOutcome { trace, choice_points, memories, verifier })
}

/// A protocol assembled from a region list and a start closure.
pub struct FnProtocol<F> {
    pub regions: Vec<RegionSpec>,
    pub stop: StopRule,
    pub start: F,
}

impl<F: Fn(Ctx, Role)> Protocol for FnProtocol<F> {
    fn regions(&self, _cfg: &SystemConfig) -> Vec<RegionSpec> {
        self.regions.clone()
    }

    fn start(&self, ctx: Ctx, role: Role) {
        (self.start)(ctx, role)
    }

    fn stop_rule(&self) -> StopRule {
        self.stop
    }
}

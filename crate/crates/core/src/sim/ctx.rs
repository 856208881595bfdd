//! The interface protocol code uses to act inside a run.

use std::cell::RefCell;
use std::future::Future;
use std::pin::Pin;
use std::rc::Rc;
use std::task::{Context, Poll};

use bytes::Bytes;

use crate::ids::{Mid, Pid};
use crate::model::{OpRequest, OpResponse, Permission, ReadResult, RegId, RegionId, WriteResult};
use crate::signatures::{Keyring, SignedValue};

use super::config::SystemConfig;
use super::executor::{Message, World};
use super::trace::{Action, Actor, DecisionPath, Decision, ProtocolEvent};

/// Handle of one process. Cheap to clone; every lane of the process gets one.
#[derive(Clone)]
pub struct Ctx {
    pid: Pid,
    world: Rc<RefCell<World>>,
}

/// Read-only access to signature verification.
#[derive(Clone)]
pub struct Verifier(Rc<Keyring>);

impl Verifier {
    pub fn new(keyring: Rc<Keyring>) -> Self {
        Self(keyring)
    }

    pub fn verify(&self, p: Pid, sv: &SignedValue) -> bool {
        self.0.verify(p, sv)
    }

    pub fn verify_any(&self, sv: &SignedValue) -> bool {
        self.0.verify_any(sv)
    }
}

impl Ctx {
    pub(crate) fn new(pid: Pid, world: Rc<RefCell<World>>) -> Self {
        Self { pid, world }
    }

    pub fn pid(&self) -> Pid {
        self.pid
    }

    pub fn config(&self) -> SystemConfig {
        self.world.borrow().cfg.clone()
    }

    pub fn n(&self) -> usize {
        self.world.borrow().cfg.n
    }

    pub fn m(&self) -> usize {
        self.world.borrow().cfg.m
    }

    pub fn now(&self) -> u64 {
        self.world.borrow().now
    }

    /// Starts another lane of this process.
    pub fn spawn(&self, fut: impl Future<Output = ()> + 'static) {
        self.world.borrow_mut().spawn_queue.push((self.pid, Box::pin(fut)));
    }

    /// Performs one memory operation, first waiting until this process has
    /// no other operation outstanding on `mem`.
    pub fn invoke(&self, mem: Mid, request: OpRequest) -> impl Future<Output = OpResponse> + 'static {
        let ctx = self.clone();
        async move {
            PortFree { ctx: &ctx, mem, ticket: None }.await;
            ctx.issue_and_wait(mem, request).await
        }
    }

    /// Like [`Ctx::invoke`] but without queueing: invoking while another
    /// operation on `mem` is outstanding is a simulator error.
    pub fn invoke_unqueued(&self, mem: Mid, request: OpRequest) -> impl Future<Output = OpResponse> + 'static {
        let ctx = self.clone();
        async move { ctx.issue_and_wait(mem, request).await }
    }

    async fn issue_and_wait(&self, mem: Mid, request: OpRequest) -> OpResponse {
        let op = self.world.borrow_mut().issue(self.pid, mem, request);
        match op {
            Some(op) => OpWait { ctx: self, op }.await,
            None => std::future::pending().await,
        }
    }

    pub async fn read(&self, mem: Mid, reg: RegId) -> ReadResult {
        self.invoke(mem, OpRequest::Read(vec![reg])).await.into_reads().pop().unwrap()
    }

    pub async fn read_many(&self, mem: Mid, regs: Vec<RegId>) -> Vec<ReadResult> {
        self.invoke(mem, OpRequest::Read(regs)).await.into_reads()
    }

    pub async fn write(&self, mem: Mid, reg: RegId, v: Bytes) -> WriteResult {
        self.invoke(mem, OpRequest::Write(vec![(reg, v)])).await.into_writes().pop().unwrap()
    }

    pub async fn write_many(&self, mem: Mid, items: Vec<(RegId, Bytes)>) -> Vec<WriteResult> {
        self.invoke(mem, OpRequest::Write(items)).await.into_writes()
    }

    /// Requests a permission change; returns whether it was applied.
    pub async fn change_permission(&self, mem: Mid, region: RegionId, permission: Permission) -> bool {
        match self.invoke(mem, OpRequest::ChangePermission { region, permission }).await {
            OpResponse::ChangePermission { applied } => applied,
            other => unreachable!("{other:?}"),
        }
    }

    pub fn send(&self, to: Pid, payload: Bytes) {
        self.world.borrow_mut().send(self.pid, to, payload);
    }

    /// Sends to every process, including this one.
    pub fn send_all(&self, payload: Bytes) {
        let n = self.n();
        for to in Pid::all(n) {
            self.send(to, payload.clone());
        }
    }

    pub fn try_recv(&self) -> Option<Message> {
        self.world.borrow_mut().try_recv(self.pid)
    }

    pub fn recv(&self) -> impl Future<Output = Message> + '_ {
        Recv { ctx: self }
    }

    pub fn sleep(&self, delays: u64) -> impl Future<Output = ()> + 'static {
        let id = self.world.borrow_mut().set_timer(delays);
        TimerWait { world: self.world.clone(), id }
    }

    /// Current output of the leader oracle.
    pub fn omega(&self) -> Pid {
        self.world.borrow_mut().omega()
    }

    /// Signs `payload` as this process.
    pub fn sign(&self, payload: Bytes) -> SignedValue {
        self.world.borrow().keyring.sign(self.pid, payload)
    }

    pub fn verifier(&self) -> Verifier {
        Verifier(self.world.borrow().keyring.clone())
    }

    /// Decides `value`. Later calls record the attempt but never change the
    /// first decision.
    pub fn decide(&self, value: Bytes, path: DecisionPath) {
        let mut w = self.world.borrow_mut();
        if w.byzantine[self.pid.index()] {
            return;
        }
        let now = w.now;
        let index = w.trace.push(now, Actor::Process(self.pid), Action::Decide { value: value.clone(), path });
        w.trace.decisions.entry(self.pid).or_insert(Decision { value, time: now, index, path });
    }

    pub fn decided(&self) -> Option<Bytes> {
        self.world.borrow().trace.decisions.get(&self.pid).map(|d| d.value.clone())
    }

    /// Marks this process as done for [`super::StopRule::AllCorrectFinished`].
    pub fn finish(&self) {
        self.world.borrow_mut().finished[self.pid.index()] = true;
    }

    pub fn event(&self, ev: ProtocolEvent) {
        let mut w = self.world.borrow_mut();
        let now = w.now;
        w.trace.push(now, Actor::Process(self.pid), Action::Protocol(ev));
    }
}

struct PortFree<'a> {
    ctx: &'a Ctx,
    mem: Mid,
    ticket: Option<u64>,
}

impl Future for PortFree<'_> {
    type Output = ();
    fn poll(mut self: Pin<&mut Self>, cx: &mut Context<'_>) -> Poll<()> {
        let this = &mut *self;
        let mut w = this.ctx.world.borrow_mut();
        if w.acquire_port(this.ctx.pid, this.mem, &mut this.ticket, cx.waker()) {
            Poll::Ready(())
        } else {
            Poll::Pending
        }
    }
}

impl Drop for PortFree<'_> {
    fn drop(&mut self) {
        if let Some(t) = self.ticket {
            if let Ok(mut w) = self.ctx.world.try_borrow_mut() {
                w.abandon_port(self.ctx.pid, self.mem, t);
            }
        }
    }
}

struct OpWait<'a> {
    ctx: &'a Ctx,
    op: u64,
}

impl Future for OpWait<'_> {
    type Output = OpResponse;
    fn poll(self: Pin<&mut Self>, cx: &mut Context<'_>) -> Poll<OpResponse> {
        match self.ctx.world.borrow_mut().poll_op(self.op, cx.waker()) {
            Some(r) => Poll::Ready(r),
            None => Poll::Pending,
        }
    }
}

struct Recv<'a> {
    ctx: &'a Ctx,
}

impl Future for Recv<'_> {
    type Output = Message;
    fn poll(self: Pin<&mut Self>, cx: &mut Context<'_>) -> Poll<Message> {
        let mut w = self.ctx.world.borrow_mut();
        match w.try_recv(self.ctx.pid) {
            Some(m) => Poll::Ready(m),
            None => {
                w.wait_inbox(self.ctx.pid, cx.waker());
                Poll::Pending
            }
        }
    }
}

struct TimerWait {
    world: Rc<RefCell<World>>,
    id: u64,
}

impl Future for TimerWait {
    type Output = ();
    fn poll(self: Pin<&mut Self>, cx: &mut Context<'_>) -> Poll<()> {
        if self.world.borrow_mut().poll_timer(self.id, cx.waker()) {
            Poll::Ready(())
        } else {
            Poll::Pending
        }
    }
}

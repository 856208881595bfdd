//! Single-writer multi-reader registers replicated over all memories.
//!
//! A replicated write goes to every memory and returns once a majority has
//! responded; it is acknowledged only if every one of those responses was.
//! A replicated read collects a majority of responses and returns the value
//! if exactly one distinct non-⊥ value was seen, and ⊥ otherwise. Readers
//! never write back, and late responses are ignored.

use bytes::Bytes;
use futures::stream::{FuturesUnordered, StreamExt};
use thiserror::Error;

use crate::ids::{majority, Mid, Pid};
use crate::model::{RegId, Value};
use crate::sim::Ctx;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum WriteOutcome {
    Ack,
    Nak,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum SwmrError {
    #[error("{caller} is not the writer of {reg} (owned by {writer})")]
    NotWriter { caller: Pid, writer: Pid, reg: RegId },
}

/// A logical register stored under the same id on every memory.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct ReplicatedRegister {
    pub reg: RegId,
    pub writer: Pid,
}

impl ReplicatedRegister {
    pub async fn write(&self, ctx: &Ctx, v: Bytes) -> Result<WriteOutcome, SwmrError> {
        if ctx.pid() != self.writer {
            return Err(SwmrError::NotWriter { caller: ctx.pid(), writer: self.writer, reg: self.reg });
        }
        Ok(write_many(ctx, vec![(self.reg, v)]).await)
    }

    pub async fn read(&self, ctx: &Ctx) -> Value {
        read_many(ctx, vec![self.reg]).await.pop().unwrap()
    }
}

/// Writes all `items` on every memory, one batched operation per memory.
pub async fn write_many(ctx: &Ctx, items: Vec<(RegId, Bytes)>) -> WriteOutcome {
    let m = ctx.m();
    let mut pending: FuturesUnordered<_> =
        Mid::all(m).map(|mem| ctx.write_many(mem, items.clone())).collect();
    let mut acked = true;
    for _ in 0..majority(m) {
        let res = pending.next().await.expect("fewer memories than a majority");
        acked &= res.iter().all(Result::is_ok);
    }
    if acked {
        WriteOutcome::Ack
    } else {
        WriteOutcome::Nak
    }
}

/// Per-memory results of a batched read from the first majority of memories
/// to respond, in response order. Naks read as ⊥.
pub async fn read_raw(ctx: &Ctx, regs: Vec<RegId>) -> Vec<(Mid, Vec<Value>)> {
    let m = ctx.m();
    let mut pending: FuturesUnordered<_> = Mid::all(m)
        .map(|mem| {
            let fut = ctx.read_many(mem, regs.clone());
            async move { (mem, fut.await) }
        })
        .collect();
    let mut out = Vec::with_capacity(majority(m));
    for _ in 0..majority(m) {
        let (mem, res) = pending.next().await.expect("fewer memories than a majority");
        out.push((mem, res.into_iter().map(|r| r.unwrap_or(None)).collect()));
    }
    out
}

/// Replicated read of several registers at once.
pub async fn read_many(ctx: &Ctx, regs: Vec<RegId>) -> Vec<Value> {
    let count = regs.len();
    let responses = read_raw(ctx, regs).await;
    (0..count).map(|i| reduce(responses.iter().map(|(_, vals)| &vals[i]))).collect()
}

/// The unique non-⊥ value among `values`, or ⊥ if there is none or more
/// than one.
pub fn reduce<'a>(values: impl IntoIterator<Item = &'a Value>) -> Value {
    let mut found: Option<&Bytes> = None;
    for v in values.into_iter().flatten() {
        match found {
            None => found = Some(v),
            Some(f) if f == v => {}
            Some(_) => return None,
        }
    }
    found.cloned()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(s: &'static str) -> Value {
        Some(Bytes::from_static(s.as_bytes()))
    }

    #[test]
    fn reduce_cases() {
        assert_eq!(reduce(&[None, None]), None);
        assert_eq!(reduce(&[None, v("a"), v("a")]), v("a"));
        assert_eq!(reduce(&[v("a"), v("b")]), None);
    }

    proptest! {
        #[test]
        fn reduce_matches_definition(vals in proptest::collection::vec(proptest::option::of(0u8..3), 0..6)) {
            let vals: Vec<Value> = vals.into_iter().map(|o| o.map(|b| Bytes::from(vec![b]))).collect();
            let mut distinct: Vec<&Bytes> = vals.iter().flatten().collect();
            distinct.sort();
            distinct.dedup();
            let expected = if distinct.len() == 1 { Some(distinct[0].clone()) } else { None };
            prop_assert_eq!(reduce(&vals), expected);
        }
    }
}

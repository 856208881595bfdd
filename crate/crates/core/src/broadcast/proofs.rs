//! Signed copies and the two proof tiers.
//!
//! Byte layouts (all integers big-endian):
//! - message body `enc(k, m)`: `k u64 | len u32 | m`
//! - copy in slot `Value[i,k,q]`: for `i == q` the sender's own
//!   `Sign_q(enc(k,m))`; otherwise `Sign_i(Sign_q(enc(k,m)))`
//! - L1 body: `sender u16 | k u64 | count u32 | (owner u16 | len u32 | copy)*`
//! - L2 body: `sender u16 | k u64 | count u32 | (len u32 | L1 proof)*`
//!
//! Every proof is the compiler's `SignedValue` over its body.

use std::collections::BTreeSet;

use bytes::Bytes;

use crate::ids::{majority, Pid};
use crate::signatures::SignedValue;
use crate::sim::Verifier;
use crate::wire::{Reader, WireError, Writer};

pub fn encode_body(k: u64, msg: &[u8]) -> Bytes {
    let mut w = Writer::new();
    w.u64(k).bytes(msg);
    w.finish()
}

pub fn decode_body(b: &[u8]) -> Result<(u64, Bytes), WireError> {
    let mut r = Reader::new(b);
    let k = r.u64()?;
    let m = Bytes::copy_from_slice(r.bytes()?);
    r.finish()?;
    Ok((k, m))
}

/// The message carried by the copy found in `owner`'s slot for
/// `(sender, k)`, if the copy is authentic.
pub fn open_copy(v: &Verifier, owner: Pid, sender: Pid, k: u64, raw: &[u8]) -> Option<Bytes> {
    let outer = SignedValue::from_bytes(raw).ok()?;
    if !v.verify(owner, &outer) {
        return None;
    }
    let inner = if owner == sender { outer } else { SignedValue::from_bytes(&outer.payload).ok()? };
    if !v.verify(sender, &inner) {
        return None;
    }
    let (key, m) = decode_body(&inner.payload).ok()?;
    (key == k).then_some(m)
}

pub fn l1_body(sender: Pid, k: u64, copies: &[(Pid, Bytes)]) -> Bytes {
    let mut w = Writer::new();
    w.u16(sender.0).u64(k).u32(copies.len() as u32);
    for (owner, c) in copies {
        w.u16(owner.0).bytes(c);
    }
    w.finish()
}

pub fn l2_body(sender: Pid, k: u64, l1s: &[Bytes]) -> Bytes {
    let mut w = Writer::new();
    w.u16(sender.0).u64(k).u32(l1s.len() as u32);
    for p in l1s {
        w.bytes(p);
    }
    w.finish()
}

fn header(r: &mut Reader<'_>, sender: Pid, k: u64) -> Option<u32> {
    let s = r.u16().ok()?;
    let key = r.u64().ok()?;
    (s == sender.0 && key == k).then_some(())?;
    r.u32().ok()
}

/// Validates an L1 proof for `(sender, k)` and returns its message and
/// compiler.
pub fn check_l1(v: &Verifier, n: usize, sender: Pid, k: u64, raw: &[u8]) -> Option<(Bytes, Pid)> {
    let sv = SignedValue::from_bytes(raw).ok()?;
    if !v.verify_any(&sv) {
        return None;
    }
    let mut r = Reader::new(&sv.payload);
    let count = header(&mut r, sender, k)?;
    let mut owners = BTreeSet::new();
    let mut msg: Option<Bytes> = None;
    for _ in 0..count {
        let owner = Pid(r.u16().ok()?);
        let copy = r.bytes().ok()?;
        if owner.0 == 0 || owner.index() >= n || !owners.insert(owner) {
            return None;
        }
        let m = open_copy(v, owner, sender, k, copy)?;
        match &msg {
            None => msg = Some(m),
            Some(prev) if *prev == m => {}
            Some(_) => return None,
        }
    }
    r.finish().ok()?;
    if owners.len() < majority(n) {
        return None;
    }
    msg.map(|m| (m, sv.signer))
}

/// Validates an L2 proof for `(sender, k)` and returns the message it
/// supports.
pub fn check_l2(v: &Verifier, n: usize, sender: Pid, k: u64, raw: &[u8]) -> Option<Bytes> {
    let sv = SignedValue::from_bytes(raw).ok()?;
    if !v.verify_any(&sv) {
        return None;
    }
    let mut r = Reader::new(&sv.payload);
    let count = header(&mut r, sender, k)?;
    let mut compilers = BTreeSet::new();
    let mut msg: Option<Bytes> = None;
    for _ in 0..count {
        let (m, compiler) = check_l1(v, n, sender, k, r.bytes().ok()?)?;
        if !compilers.insert(compiler) {
            return None;
        }
        match &msg {
            None => msg = Some(m),
            Some(prev) if *prev == m => {}
            Some(_) => return None,
        }
    }
    r.finish().ok()?;
    if compilers.len() < majority(n) {
        return None;
    }
    msg
}

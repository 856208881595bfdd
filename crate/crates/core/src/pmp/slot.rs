//! Proposal numbers and the per-process slot stored on each memory.

use std::fmt;

use bytes::Bytes;

use crate::ids::Pid;
use crate::wire::{Reader, WireError, Writer};

/// A proposal number: `(round, proposer)` compared lexicographically.
/// `PropNr::ZERO` is below every real proposal.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct PropNr {
    pub round: u32,
    pub pid: u16,
}

impl PropNr {
    pub const ZERO: PropNr = PropNr { round: 0, pid: 0 };

    pub fn new(round: u32, pid: Pid) -> Self {
        Self { round, pid: pid.0 }
    }

    /// Packed form, order-preserving.
    pub fn raw(self) -> u64 {
        (u64::from(self.round) << 16) | u64::from(self.pid)
    }

    pub fn from_raw(raw: u64) -> Self {
        Self { round: (raw >> 16) as u32, pid: raw as u16 }
    }

    /// Smallest round whose proposals by `p` exceed `self`.
    pub fn next_round_for(self, p: Pid) -> u32 {
        if PropNr::new(self.round, p) > self {
            self.round
        } else {
            self.round + 1
        }
    }
}

impl fmt::Display for PropNr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.round, self.pid)
    }
}

/// Contents of `slot[i, p]`. `value` is present exactly when
/// `acc_prop != ZERO`.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Slot {
    pub min_prop: PropNr,
    pub acc_prop: PropNr,
    pub value: Option<Bytes>,
}

impl Slot {
    pub fn prepared(nr: PropNr) -> Self {
        Self { min_prop: nr, acc_prop: PropNr::ZERO, value: None }
    }

    pub fn accepted(nr: PropNr, value: Bytes) -> Self {
        Self { min_prop: nr, acc_prop: nr, value: Some(value) }
    }

    /// `min u64 | acc u64 | len u32 | value`.
    pub fn encode(&self) -> Bytes {
        let mut w = Writer::new();
        w.u64(self.min_prop.raw()).u64(self.acc_prop.raw());
        w.bytes(self.value.as_deref().unwrap_or_default());
        w.finish()
    }

    pub fn decode(b: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(b);
        let min_prop = PropNr::from_raw(r.u64()?);
        let acc_prop = PropNr::from_raw(r.u64()?);
        let v = r.bytes()?;
        r.finish()?;
        let value = (acc_prop != PropNr::ZERO).then(|| Bytes::copy_from_slice(v));
        Ok(Self { min_prop, acc_prop, value })
    }

    /// Decodes a register; ⊥ and garbage both read as the empty slot.
    pub fn from_register(v: &Option<Bytes>) -> Self {
        v.as_deref().and_then(|b| Slot::decode(b).ok()).unwrap_or_default()
    }
}

/// Outcome of inspecting the slots read from one memory.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Inspection {
    /// Someone already prepared a higher proposal.
    Preempted(PropNr),
    /// Highest accepted value, if any.
    Clear(Option<(PropNr, Bytes)>),
}

pub fn inspect(slots: &[Slot], nr: PropNr) -> Inspection {
    if let Some(higher) = slots.iter().map(|s| s.min_prop).filter(|m| *m > nr).max() {
        return Inspection::Preempted(higher);
    }
    Inspection::Clear(
        slots
            .iter()
            .filter_map(|s| s.value.clone().map(|v| (s.acc_prop, v)))
            .max_by(|a, b| a.0.cmp(&b.0)),
    )
}

//! Input priorities for the preference phase.
//!
//! Inputs are ranked by evidence class (unanimity proof over leader
//! signature over bare value); within a class the smaller value bytes win,
//! then the smaller origin.

use std::cmp::Reverse;

use bytes::Bytes;

use crate::backup::paxos::SetupRule;
use crate::backup::SetupSummary;
use crate::cheap_quorum::evidence::classify;
use crate::cheap_quorum::AbortOutcome;
use crate::ids::Pid;
use crate::sim::{EvidenceClass, Verifier};
use crate::wire::{Reader, WireError, Writer};

/// Extracts the class and value from a setup.
pub trait Labeler {
    fn label(&self, setup: &[u8]) -> Option<(EvidenceClass, Bytes)>;
}

/// Setups are encoded abort outcomes, classified by checking their evidence.
pub struct AbortLabels {
    pub verifier: Verifier,
    pub n: usize,
}

impl Labeler for AbortLabels {
    fn label(&self, setup: &[u8]) -> Option<(EvidenceClass, Bytes)> {
        let o = AbortOutcome::decode(setup).ok()?;
        Some((classify(&self.verifier, self.n, &o), o.value().clone()))
    }
}

/// Setups carry their class explicitly: `class u8 | len u32 | value`.
pub struct ExplicitLabels;

pub fn encode_label(class: EvidenceClass, value: &[u8]) -> Bytes {
    let mut w = Writer::new();
    w.u8(class_code(class)).bytes(value);
    w.finish()
}

fn class_code(c: EvidenceClass) -> u8 {
    match c {
        EvidenceClass::Bare => 0,
        EvidenceClass::LeaderSigned => 1,
        EvidenceClass::Unanimous => 2,
    }
}

pub fn decode_label(b: &[u8]) -> Result<(EvidenceClass, Bytes), WireError> {
    let mut r = Reader::new(b);
    let class = match r.u8()? {
        0 => EvidenceClass::Bare,
        1 => EvidenceClass::LeaderSigned,
        2 => EvidenceClass::Unanimous,
        t => return Err(WireError::BadTag(t)),
    };
    let v = Bytes::copy_from_slice(r.bytes()?);
    r.finish()?;
    Ok((class, v))
}

impl Labeler for ExplicitLabels {
    fn label(&self, setup: &[u8]) -> Option<(EvidenceClass, Bytes)> {
        decode_label(setup).ok()
    }
}

pub type RankKey = (EvidenceClass, Reverse<Bytes>, Reverse<Pid>);

/// Larger is preferred.
pub fn rank(class: EvidenceClass, value: &Bytes, origin: Pid) -> RankKey {
    (class, Reverse(value.clone()), Reverse(origin))
}

/// Adapts a [`Labeler`] to the backup's setup hooks.
pub struct Preference<L>(pub L);

impl<L: Labeler> SetupRule for Preference<L> {
    fn valid(&self, _origin: Pid, setup: &[u8]) -> bool {
        self.0.label(setup).is_some()
    }

    fn choose(&self, setups: &[(Pid, Bytes)]) -> Bytes {
        setups
            .iter()
            .filter_map(|(p, x)| self.0.label(x).map(|(c, v)| (rank(c, &v, *p), v)))
            .max_by(|a, b| a.0.cmp(&b.0))
            .map(|(_, v)| v)
            .expect("choose needs at least one valid setup")
    }
}

impl<L: Labeler> SetupSummary for Preference<L> {
    fn summarize(&self, _origin: Pid, setup: &[u8]) -> (Bytes, EvidenceClass) {
        let (c, v) = self.0.label(setup).unwrap_or((EvidenceClass::Bare, Bytes::new()));
        (v, c)
    }
}

/// Brute-force reference for the preference phase, written independently
/// of [`Preference::choose`].
pub mod oracle {
    use std::collections::BTreeSet;

    use bytes::Bytes;

    use crate::ids::Pid;
    use crate::sim::EvidenceClass;

    pub type Input = (Pid, EvidenceClass, Bytes);

    /// Inputs sorted best first.
    pub fn ordered(inputs: &[Input]) -> Vec<Input> {
        let mut v = inputs.to_vec();
        v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.2.cmp(&b.2)).then_with(|| a.0.cmp(&b.0)));
        v
    }

    /// Values of the `k` best inputs.
    pub fn top_values(inputs: &[Input], k: usize) -> BTreeSet<Bytes> {
        ordered(inputs).into_iter().take(k).map(|i| i.2).collect()
    }

    /// Every value some process could adopt after hearing from exactly
    /// `quorum` of the inputs.
    pub fn eligible(inputs: &[Input], quorum: usize) -> BTreeSet<Bytes> {
        let k = inputs.len();
        assert!(k <= 20, "oracle is exponential");
        let mut out = BTreeSet::new();
        for mask in 0u32..(1 << k) {
            if mask.count_ones() as usize != quorum {
                continue;
            }
            let subset: Vec<Input> = (0..k).filter(|i| mask & (1 << i) != 0).map(|i| inputs[i].clone()).collect();
            if let Some(best) = ordered(&subset).into_iter().next() {
                out.insert(best.2);
            }
        }
        out
    }
}

//! Follower copies, unanimity proofs and abort outcomes.
//!
//! Byte layouts (integers big-endian):
//! - leader value in `Value[ℓ]`: `Sign_p1(v)`
//! - follower copy in `Value[q]`: `Sign_q(Sign_p1(v))`
//! - unanimity proof in `Proof[q]`: `Sign_q(count u32 | (len u32 | copy)*)`
//! - abort outcome: `kind u8 | len u32 | candidate | has_proof u8 [| len u32 | proof]`
//!   where kind 0 is a bare value and kind 1 a leader-signed value

use std::collections::BTreeSet;

use bytes::Bytes;

use crate::ids::Pid;
use crate::signatures::SignedValue;
use crate::sim::{EvidenceClass, Verifier};
use crate::wire::{Reader, WireError, Writer};

/// The value part of an abort outcome.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Candidate {
    /// A value without the leader's signature (normally the own input).
    Bare(Bytes),
    /// The leader's signed proposal.
    Signed(SignedValue),
}

impl Candidate {
    pub fn value(&self) -> &Bytes {
        match self {
            Candidate::Bare(v) => v,
            Candidate::Signed(sv) => &sv.payload,
        }
    }
}

/// What a process leaves the fast path with.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct AbortOutcome {
    pub candidate: Candidate,
    pub proof: Option<SignedValue>,
}

impl AbortOutcome {
    pub fn bare(v: Bytes) -> Self {
        Self { candidate: Candidate::Bare(v), proof: None }
    }

    pub fn value(&self) -> &Bytes {
        self.candidate.value()
    }

    pub fn encode(&self) -> Bytes {
        let mut w = Writer::new();
        match &self.candidate {
            Candidate::Bare(v) => w.u8(0).bytes(v),
            Candidate::Signed(sv) => w.u8(1).bytes(&sv.to_bytes()),
        };
        match &self.proof {
            None => w.u8(0),
            Some(p) => w.u8(1).bytes(&p.to_bytes()),
        };
        w.finish()
    }

    pub fn decode(b: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(b);
        let candidate = match r.u8()? {
            0 => Candidate::Bare(Bytes::copy_from_slice(r.bytes()?)),
            1 => Candidate::Signed(SignedValue::from_bytes(r.bytes()?)?),
            t => return Err(WireError::BadTag(t)),
        };
        let proof = match r.u8()? {
            0 => None,
            1 => Some(SignedValue::from_bytes(r.bytes()?)?),
            t => return Err(WireError::BadTag(t)),
        };
        r.finish()?;
        Ok(Self { candidate, proof })
    }
}

/// The leader value inside `owner`'s copy, if both signatures check out.
pub fn open_copy(v: &Verifier, owner: Pid, raw: &[u8]) -> Option<SignedValue> {
    let outer = SignedValue::from_bytes(raw).ok()?;
    if !v.verify(owner, &outer) {
        return None;
    }
    let inner = SignedValue::from_bytes(&outer.payload).ok()?;
    v.verify(Pid::LEADER, &inner).then_some(inner)
}

pub fn proof_body(copies: &[Bytes]) -> Bytes {
    let mut w = Writer::new();
    w.u32(copies.len() as u32);
    for c in copies {
        w.bytes(c);
    }
    w.finish()
}

fn decode_proof_body(b: &[u8]) -> Result<Vec<Bytes>, WireError> {
    let mut r = Reader::new(b);
    let count = r.u32()?;
    let mut out = Vec::new();
    for _ in 0..count {
        out.push(Bytes::copy_from_slice(r.bytes()?));
    }
    r.finish()?;
    Ok(out)
}

/// The leader value supported by `proof`: `n` copies of one leader-signed
/// value, each correctly signed by a different process, compiled and signed
/// by the proof's signer.
pub fn check_unanimity(v: &Verifier, n: usize, proof: &SignedValue) -> Option<SignedValue> {
    if !v.verify_any(proof) {
        return None;
    }
    let copies = decode_proof_body(&proof.payload).ok()?;
    let mut signers = BTreeSet::new();
    let mut value: Option<SignedValue> = None;
    for c in &copies {
        let outer = SignedValue::from_bytes(c).ok()?;
        let inner = open_copy(v, outer.signer, c)?;
        match &value {
            None => value = Some(inner),
            Some(x) if *x == inner => {}
            Some(_) => return None,
        }
        signers.insert(outer.signer);
    }
    (signers.len() >= n).then_some(value).flatten()
}

/// Priority class of an abort outcome. Malformed or unverifiable evidence
/// only ever lowers the class.
pub fn classify(v: &Verifier, n: usize, outcome: &AbortOutcome) -> EvidenceClass {
    let value = outcome.value();
    if let Some(proof) = &outcome.proof {
        if check_unanimity(v, n, proof).is_some_and(|lv| lv.payload == *value) {
            return EvidenceClass::Unanimous;
        }
    }
    match &outcome.candidate {
        Candidate::Signed(sv) if v.verify(Pid::LEADER, sv) => EvidenceClass::LeaderSigned,
        _ => EvidenceClass::Bare,
    }
}

#[cfg(test)]
mod tests {
    use std::rc::Rc;

    use super::*;
    use crate::signatures::Keyring;

    fn setup(n: usize) -> (Keyring, Verifier) {
        (Keyring::new(n, 9), Verifier::new(Rc::new(Keyring::new(n, 9))))
    }

    fn unanimity(k: &Keyring, n: usize, compiler: Pid, lv: &SignedValue) -> SignedValue {
        let copies: Vec<Bytes> = Pid::all(n).map(|p| k.sign(p, lv.to_bytes()).to_bytes()).collect();
        k.sign(compiler, proof_body(&copies))
    }

    #[test]
    fn classes() {
        let n = 3;
        let (k, v) = setup(n);
        let lv = k.sign(Pid(1), Bytes::from_static(b"x"));
        let proof = unanimity(&k, n, Pid(2), &lv);
        let t = AbortOutcome { candidate: Candidate::Signed(lv.clone()), proof: Some(proof.clone()) };
        assert_eq!(classify(&v, n, &t), EvidenceClass::Unanimous);
        let m = AbortOutcome { candidate: Candidate::Signed(lv.clone()), proof: None };
        assert_eq!(classify(&v, n, &m), EvidenceClass::LeaderSigned);
        assert_eq!(classify(&v, n, &AbortOutcome::bare(Bytes::from_static(b"x"))), EvidenceClass::Bare);
        // a proof for another value does not lift a bare candidate
        let other = AbortOutcome { candidate: Candidate::Bare(Bytes::from_static(b"y")), proof: Some(proof) };
        assert_eq!(classify(&v, n, &other), EvidenceClass::Bare);
        // a value signed by someone other than the leader is bare
        let fake = AbortOutcome { candidate: Candidate::Signed(k.sign(Pid(2), Bytes::from_static(b"x"))), proof: None };
        assert_eq!(classify(&v, n, &fake), EvidenceClass::Bare);
    }

    #[test]
    fn unanimity_needs_n_distinct_signers() {
        let n = 3;
        let (k, v) = setup(n);
        let lv = k.sign(Pid(1), Bytes::from_static(b"x"));
        let own = k.sign(Pid(2), lv.to_bytes()).to_bytes();
        let stale = k.sign(Pid(2), proof_body(&[own.clone(), own.clone(), own]));
        assert_eq!(check_unanimity(&v, n, &stale), None);
        let good = unanimity(&k, n, Pid(3), &lv);
        assert_eq!(check_unanimity(&v, n, &good), Some(lv.clone()));
        let forged = SignedValue::forged(good.payload.clone(), Pid(3), [0; 32]);
        assert_eq!(check_unanimity(&v, n, &forged), None);
        // mixed values
        let lw = k.sign(Pid(1), Bytes::from_static(b"w"));
        let copies = vec![
            k.sign(Pid(1), lv.to_bytes()).to_bytes(),
            k.sign(Pid(2), lv.to_bytes()).to_bytes(),
            k.sign(Pid(3), lw.to_bytes()).to_bytes(),
        ];
        assert_eq!(check_unanimity(&v, n, &k.sign(Pid(1), proof_body(&copies))), None);
    }

    #[test]
    fn outcome_roundtrip() {
        let (k, _) = setup(3);
        let lv = k.sign(Pid(1), Bytes::from_static(b"x"));
        for o in [
            AbortOutcome::bare(Bytes::from_static(b"in")),
            AbortOutcome { candidate: Candidate::Signed(lv.clone()), proof: Some(k.sign(Pid(2), Bytes::new())) },
        ] {
            assert_eq!(AbortOutcome::decode(&o.encode()).unwrap(), o);
        }
        assert!(AbortOutcome::decode(&[7]).is_err());
    }
}

//! Unforgeable signatures.
//!
//! Signatures are keyed SHA-256 tags. Each process has a secret key derived
//! from the run's key seed; only the [`Keyring`] can produce tags and it is
//! never handed to protocol code, which signs through its own `Ctx` (and thus
//! only as itself) and verifies through [`Keyring::verify`].

use bytes::Bytes;

use crate::ids::Pid;
use crate::wire::{digest, Reader, WireError, Writer};

/// `payload` signed by `signer`.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct SignedValue {
    pub payload: Bytes,
    pub signer: Pid,
    tag: [u8; 32],
}

impl SignedValue {
    /// Builds a value with an arbitrary tag. Verification of anything not
    /// produced by [`Keyring::sign`] fails.
    pub fn forged(payload: Bytes, signer: Pid, tag: [u8; 32]) -> Self {
        Self { payload, signer, tag }
    }

    pub fn encode_into(&self, w: &mut Writer) {
        w.u16(self.signer.0).raw(&self.tag).bytes(&self.payload);
    }

    /// Wire layout: `signer u16 | tag [32] | len u32 | payload`.
    pub fn to_bytes(&self) -> Bytes {
        let mut w = Writer::new();
        self.encode_into(&mut w);
        w.finish()
    }

    pub fn decode_from(r: &mut Reader<'_>) -> Result<Self, WireError> {
        let signer = Pid(r.u16()?);
        if signer.0 == 0 {
            return Err(WireError::Range("signer"));
        }
        let tag = r.array::<32>()?;
        let payload = Bytes::copy_from_slice(r.bytes()?);
        Ok(Self { payload, signer, tag })
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(b);
        let v = Self::decode_from(&mut r)?;
        r.finish()?;
        Ok(v)
    }
}

/// Holds every process's signing key.
pub struct Keyring {
    keys: Vec<[u8; 32]>,
}

impl Keyring {
    pub fn new(n: usize, key_seed: u64) -> Self {
        let keys = (0..n)
            .map(|i| {
                let mut w = Writer::new();
                w.raw(b"mnm-signing-key").u64(key_seed).u64(i as u64);
                digest(&w.finish())
            })
            .collect();
        Self { keys }
    }

    pub fn n(&self) -> usize {
        self.keys.len()
    }

    fn tag(&self, signer: Pid, payload: &[u8]) -> Option<[u8; 32]> {
        let key = self.keys.get(signer.index())?;
        let mut w = Writer::new();
        w.raw(key).u16(signer.0).raw(payload);
        Some(digest(&w.finish()))
    }

    /// Signs `payload` as `signer`. Protocol code reaches this only through
    /// `Ctx::sign`, which fixes `signer` to the calling process.
    pub fn sign(&self, signer: Pid, payload: Bytes) -> SignedValue {
        let tag = self.tag(signer, &payload).expect("signer out of range");
        SignedValue { payload, signer, tag }
    }

    /// True iff `sv` was produced by `sign(p, sv.payload)`.
    pub fn verify(&self, p: Pid, sv: &SignedValue) -> bool {
        sv.signer == p && self.tag(p, &sv.payload) == Some(sv.tag)
    }

    /// Verifies against the claimed signer.
    pub fn verify_any(&self, sv: &SignedValue) -> bool {
        self.verify(sv.signer, sv)
    }
}

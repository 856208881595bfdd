//! Messages between proposers and process acceptors.
//!
//! Layouts (tag byte first, integers big-endian, values length-prefixed):
//!
//! | tag | message    | fields                                   |
//! |-----|------------|------------------------------------------|
//! | 1   | Prepare    | nr u64                                   |
//! | 2   | Promise    | nr u64, acc u64, value (empty if acc=0)  |
//! | 3   | Accept     | nr u64, value                            |
//! | 4   | Accepted   | nr u64                                   |
//! | 5   | Nack       | nr u64, promised u64                     |
//! | 6   | Decided    | value                                    |

use bytes::Bytes;

use crate::pmp::PropNr;
use crate::wire::{Reader, WireError, Writer};

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum AlignedMsg {
    Prepare { nr: PropNr },
    /// Carries the acceptor's highest accepted proposal, if any.
    Promise { nr: PropNr, accepted: Option<(PropNr, Bytes)> },
    Accept { nr: PropNr, value: Bytes },
    Accepted { nr: PropNr },
    /// `nr` was refused because the acceptor promised `promised`.
    Nack { nr: PropNr, promised: PropNr },
    Decided { value: Bytes },
}

impl AlignedMsg {
    pub fn encode(&self) -> Bytes {
        let mut w = Writer::new();
        match self {
            AlignedMsg::Prepare { nr } => {
                w.u8(1).u64(nr.raw());
            }
            AlignedMsg::Promise { nr, accepted } => {
                let (acc, v) = accepted.clone().unwrap_or((PropNr::ZERO, Bytes::new()));
                w.u8(2).u64(nr.raw()).u64(acc.raw()).bytes(&v);
            }
            AlignedMsg::Accept { nr, value } => {
                w.u8(3).u64(nr.raw()).bytes(value);
            }
            AlignedMsg::Accepted { nr } => {
                w.u8(4).u64(nr.raw());
            }
            AlignedMsg::Nack { nr, promised } => {
                w.u8(5).u64(nr.raw()).u64(promised.raw());
            }
            AlignedMsg::Decided { value } => {
                w.u8(6).bytes(value);
            }
        }
        w.finish()
    }

    pub fn decode(b: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(b);
        let nr = |r: &mut Reader| r.u64().map(PropNr::from_raw);
        let msg = match r.u8()? {
            1 => AlignedMsg::Prepare { nr: nr(&mut r)? },
            2 => {
                let n = nr(&mut r)?;
                let acc = nr(&mut r)?;
                let v = Bytes::copy_from_slice(r.bytes()?);
                AlignedMsg::Promise { nr: n, accepted: (acc != PropNr::ZERO).then_some((acc, v)) }
            }
            3 => {
                let n = nr(&mut r)?;
                AlignedMsg::Accept { nr: n, value: Bytes::copy_from_slice(r.bytes()?) }
            }
            4 => AlignedMsg::Accepted { nr: nr(&mut r)? },
            5 => {
                let n = nr(&mut r)?;
                AlignedMsg::Nack { nr: n, promised: nr(&mut r)? }
            }
            6 => AlignedMsg::Decided { value: Bytes::copy_from_slice(r.bytes()?) },
            t => return Err(WireError::BadTag(t)),
        };
        r.finish()?;
        Ok(msg)
    }
}

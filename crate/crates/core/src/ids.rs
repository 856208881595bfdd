//! Process and memory identifiers.
//!
//! Both are 1-based so that `Pid(1)` is the fixed initial leader `p1` used by
//! the leader-based protocols.

use std::fmt;

use serde::{Deserialize, Serialize};

/// A process identifier, `p1..pn`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct Pid(pub u16);

impl Pid {
    pub const LEADER: Pid = Pid(1);

    /// Zero-based index for table lookups.
    pub fn index(self) -> usize {
        debug_assert!(self.0 >= 1);
        self.0 as usize - 1
    }

    pub fn from_index(i: usize) -> Pid {
        Pid(i as u16 + 1)
    }

    /// All processes `p1..pn` in increasing order.
    pub fn all(n: usize) -> impl Iterator<Item = Pid> + Clone {
        (0..n).map(Pid::from_index)
    }
}

impl fmt::Display for Pid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

/// A shared-memory identifier, `mu1..mum`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct Mid(pub u16);

impl Mid {
    pub fn index(self) -> usize {
        debug_assert!(self.0 >= 1);
        self.0 as usize - 1
    }

    pub fn from_index(i: usize) -> Mid {
        Mid(i as u16 + 1)
    }

    pub fn all(m: usize) -> impl Iterator<Item = Mid> + Clone {
        (0..m).map(Mid::from_index)
    }
}

impl fmt::Display for Mid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "mu{}", self.0)
    }
}

/// Size of a majority of `count` members: `floor(count/2) + 1`.
pub fn majority(count: usize) -> usize {
    count / 2 + 1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn majority_sizes() {
        assert_eq!(majority(1), 1);
        assert_eq!(majority(2), 2);
        assert_eq!(majority(3), 2);
        assert_eq!(majority(4), 3);
        assert_eq!(majority(5), 3);
    }

    #[test]
    fn pid_roundtrip_and_display() {
        assert_eq!(Pid::from_index(0), Pid::LEADER);
        assert_eq!(Pid(3).index(), 2);
        assert_eq!(Pid(2).to_string(), "p2");
        assert_eq!(Mid(1).to_string(), "mu1");
        assert_eq!(Pid::all(3).collect::<Vec<_>>(), vec![Pid(1), Pid(2), Pid(3)]);
    }
}

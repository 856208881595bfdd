use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ids::Pid;

use super::ModelError;

/// Access sets of a region. The three sets are pairwise disjoint; a process in
/// none of them has no access.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct Permission {
    read: BTreeSet<Pid>,
    write: BTreeSet<Pid>,
    read_write: BTreeSet<Pid>,
}

impl Permission {
    pub fn new(
        read: BTreeSet<Pid>,
        write: BTreeSet<Pid>,
        read_write: BTreeSet<Pid>,
    ) -> Result<Self, ModelError> {
        let overlap = read
            .intersection(&write)
            .chain(read.intersection(&read_write))
            .chain(write.intersection(&read_write))
            .next()
            .copied();
        match overlap {
            Some(p) => Err(ModelError::OverlappingPermission(p)),
            None => Ok(Self { read, write, read_write }),
        }
    }

    /// Everyone may read, `owner` may also write.
    pub fn single_writer(owner: Pid, n: usize) -> Self {
        Self {
            read: Pid::all(n).filter(|&p| p != owner).collect(),
            write: BTreeSet::new(),
            read_write: [owner].into(),
        }
    }

    /// Everyone may read and write.
    pub fn open(n: usize) -> Self {
        Self {
            read: BTreeSet::new(),
            write: BTreeSet::new(),
            read_write: Pid::all(n).collect(),
        }
    }

    /// Everyone may read, nobody may write.
    pub fn read_only(n: usize) -> Self {
        Self {
            read: Pid::all(n).collect(),
            write: BTreeSet::new(),
            read_write: BTreeSet::new(),
        }
    }

    /// Same sets as [`Permission::single_writer`]; named for regions whose
    /// writer changes over time.
    pub fn exclusive(owner: Pid, n: usize) -> Self {
        Self::single_writer(owner, n)
    }

    pub fn can_read(&self, p: Pid) -> bool {
        self.read.contains(&p) || self.read_write.contains(&p)
    }

    pub fn can_write(&self, p: Pid) -> bool {
        self.write.contains(&p) || self.read_write.contains(&p)
    }

    pub fn readers(&self) -> &BTreeSet<Pid> {
        &self.read
    }

    pub fn writers(&self) -> &BTreeSet<Pid> {
        &self.write
    }

    pub fn read_writers(&self) -> &BTreeSet<Pid> {
        &self.read_write
    }
}

impl fmt::Display for Permission {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |s: &BTreeSet<Pid>| s.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(",");
        write!(f, "R={{{}}} W={{{}}} RW={{{}}}", list(&self.read), list(&self.write), list(&self.read_write))
    }
}

/// Decides whether a permission change on a region is applied.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub enum ChangePolicy {
    /// Permissions never change.
    Static,
    /// Any process may turn the region read-only, removing the leader's write
    /// access. Nothing else is allowed.
    RevokeToReadOnly,
    /// A process may make itself the sole writer (everyone else keeps read
    /// access). Nothing else is allowed.
    ExclusiveWriter,
}

impl ChangePolicy {
    pub fn allows(self, requester: Pid, new: &Permission, n: usize) -> bool {
        match self {
            ChangePolicy::Static => false,
            ChangePolicy::RevokeToReadOnly => *new == Permission::read_only(n),
            ChangePolicy::ExclusiveWriter => *new == Permission::exclusive(requester, n),
        }
    }
}

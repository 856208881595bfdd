use std::collections::{BTreeMap, HashMap};
use std::fmt;

use bytes::Bytes;
use serde::{Deserialize, Serialize};

use crate::ids::{Mid, Pid};

use super::{ChangePolicy, ModelError, Permission};

/// Register contents; `None` is the initial value ⊥.
pub type Value = Option<Bytes>;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct RegionId(pub u16);

/// Name of a register inside a region. `kind` distinguishes register families
/// of one protocol, the remaining fields are family-specific indices.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct RegName {
    pub kind: u8,
    pub a: u32,
    pub b: u32,
}

impl RegName {
    pub const fn new(kind: u8, a: u32, b: u32) -> Self {
        Self { kind, a, b }
    }
}

/// A register address on a memory. Every register belongs to exactly one
/// region by construction, so regions never overlap.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct RegId {
    pub region: RegionId,
    pub name: RegName,
}

impl RegId {
    pub const fn new(region: RegionId, name: RegName) -> Self {
        Self { region, name }
    }
}

impl fmt::Display for RegId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}/{}.{}.{}", self.region.0, self.name.kind, self.name.a, self.name.b)
    }
}

/// Initial layout of one region.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct RegionSpec {
    pub id: RegionId,
    pub permission: Permission,
    pub policy: ChangePolicy,
}

/// Negative acknowledgement: the operation was refused for lack of permission.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct Nak;

pub type ReadResult = Result<Value, Nak>;
pub type WriteResult = Result<(), Nak>;

/// One memory operation. Multi-register reads and writes address a single
/// memory and take effect atomically.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum OpRequest {
    Read(Vec<RegId>),
    Write(Vec<(RegId, Bytes)>),
    ChangePermission { region: RegionId, permission: Permission },
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum OpResponse {
    Read(Vec<ReadResult>),
    Write(Vec<WriteResult>),
    /// Always acknowledged; `applied` says whether the policy accepted it.
    ChangePermission { applied: bool },
}

impl OpResponse {
    pub fn into_reads(self) -> Vec<ReadResult> {
        match self {
            OpResponse::Read(r) => r,
            other => panic!("expected read response, got {other:?}"),
        }
    }

    pub fn into_writes(self) -> Vec<WriteResult> {
        match self {
            OpResponse::Write(r) => r,
            other => panic!("expected write response, got {other:?}"),
        }
    }

    /// True if every register in a write was acknowledged.
    pub fn all_acked(&self) -> bool {
        match self {
            OpResponse::Write(r) => r.iter().all(Result::is_ok),
            OpResponse::Read(r) => r.iter().all(Result::is_ok),
            OpResponse::ChangePermission { .. } => true,
        }
    }
}

#[derive(Clone, Debug)]
struct Region {
    permission: Permission,
    policy: ChangePolicy,
}

/// State of one memory. Operations are applied atomically by [`Memory::apply`];
/// the simulator decides when.
#[derive(Clone, Debug)]
pub struct Memory {
    id: Mid,
    n: usize,
    crashed: bool,
    regions: BTreeMap<RegionId, Region>,
    registers: HashMap<RegId, Bytes>,
}

impl Memory {
    pub fn new(id: Mid, n: usize) -> Self {
        Self { id, n, crashed: false, regions: BTreeMap::new(), registers: HashMap::new() }
    }

    pub fn id(&self) -> Mid {
        self.id
    }

    pub fn add_region(&mut self, spec: RegionSpec) -> Result<(), ModelError> {
        if self.regions.contains_key(&spec.id) {
            return Err(ModelError::DuplicateRegion(spec.id));
        }
        self.regions.insert(spec.id, Region { permission: spec.permission, policy: spec.policy });
        Ok(())
    }

    pub fn permission(&self, region: RegionId) -> Option<&Permission> {
        self.regions.get(&region).map(|r| &r.permission)
    }

    pub fn is_crashed(&self) -> bool {
        self.crashed
    }

    pub fn crash(&mut self) {
        self.crashed = true;
    }

    /// Current contents, ignoring permissions. For inspection only.
    pub fn peek(&self, reg: RegId) -> Value {
        self.registers.get(&reg).cloned()
    }

    fn may_read(&self, p: Pid, reg: RegId) -> bool {
        self.regions.get(&reg.region).is_some_and(|r| r.permission.can_read(p))
    }

    fn may_write(&self, p: Pid, reg: RegId) -> bool {
        self.regions.get(&reg.region).is_some_and(|r| r.permission.can_write(p))
    }

    pub fn read(&self, p: Pid, reg: RegId) -> ReadResult {
        if self.may_read(p, reg) {
            Ok(self.peek(reg))
        } else {
            Err(Nak)
        }
    }

    pub fn write(&mut self, p: Pid, reg: RegId, v: Bytes) -> WriteResult {
        if self.may_write(p, reg) {
            self.registers.insert(reg, v);
            Ok(())
        } else {
            Err(Nak)
        }
    }

    /// Applies the change iff the region's policy allows it. Returns whether
    /// it was applied.
    pub fn change_permission(&mut self, p: Pid, region: RegionId, new: Permission) -> bool {
        let n = self.n;
        match self.regions.get_mut(&region) {
            Some(r) if r.policy.allows(p, &new, n) => {
                r.permission = new;
                true
            }
            _ => false,
        }
    }

    /// Applies a whole operation atomically on behalf of `p`.
    pub fn apply(&mut self, p: Pid, req: &OpRequest) -> OpResponse {
        match req {
            OpRequest::Read(regs) => OpResponse::Read(regs.iter().map(|&r| self.read(p, r)).collect()),
            OpRequest::Write(items) => {
                OpResponse::Write(items.iter().map(|(r, v)| self.write(p, *r, v.clone())).collect())
            }
            OpRequest::ChangePermission { region, permission } => OpResponse::ChangePermission {
                applied: self.change_permission(p, *region, permission.clone()),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const R0: RegionId = RegionId(0);

    fn reg(a: u32) -> RegId {
        RegId::new(R0, RegName::new(1, a, 0))
    }

    fn mem(policy: ChangePolicy) -> Memory {
        let mut m = Memory::new(Mid(1), 3);
        m.add_region(RegionSpec { id: R0, permission: Permission::single_writer(Pid(1), 3), policy })
            .unwrap();
        m
    }

    #[test]
    fn fresh_register_is_bottom() {
        let m = mem(ChangePolicy::Static);
        assert_eq!(m.read(Pid(2), reg(5)), Ok(None));
    }

    #[test]
    fn write_without_permission_naks_and_leaves_value() {
        let mut m = mem(ChangePolicy::Static);
        m.write(Pid(1), reg(0), Bytes::from_static(b"a")).unwrap();
        assert_eq!(m.write(Pid(2), reg(0), Bytes::from_static(b"b")), Err(Nak));
        assert_eq!(m.peek(reg(0)), Some(Bytes::from_static(b"a")));
    }

    #[test]
    fn unknown_region_naks() {
        let m = mem(ChangePolicy::Static);
        let r = RegId::new(RegionId(9), RegName::new(0, 0, 0));
        assert_eq!(m.read(Pid(1), r), Err(Nak));
    }

    #[test]
    fn duplicate_region_rejected() {
        let mut m = mem(ChangePolicy::Static);
        let again = RegionSpec { id: R0, permission: Permission::open(3), policy: ChangePolicy::Static };
        assert_eq!(m.add_region(again), Err(ModelError::DuplicateRegion(R0)));
    }

    #[test]
    fn revoke_blocks_leader_write() {
        let mut m = mem(ChangePolicy::RevokeToReadOnly);
        assert!(!m.change_permission(Pid(2), R0, Permission::exclusive(Pid(2), 3)));
        assert!(m.change_permission(Pid(2), R0, Permission::read_only(3)));
        assert_eq!(m.write(Pid(1), reg(0), Bytes::new()), Err(Nak));
        assert_eq!(m.read(Pid(1), reg(0)), Ok(None));
    }

    #[test]
    fn exclusive_writer_handover() {
        let mut m = mem(ChangePolicy::ExclusiveWriter);
        assert!(m.change_permission(Pid(3), R0, Permission::exclusive(Pid(3), 3)));
        assert_eq!(m.write(Pid(1), reg(0), Bytes::new()), Err(Nak));
        assert_eq!(m.write(Pid(3), reg(0), Bytes::new()), Ok(()));
    }

    #[test]
    fn batched_write_is_per_register() {
        let mut m = Memory::new(Mid(1), 2);
        m.add_region(RegionSpec { id: R0, permission: Permission::single_writer(Pid(1), 2), policy: ChangePolicy::Static })
            .unwrap();
        m.add_region(RegionSpec {
            id: RegionId(1),
            permission: Permission::single_writer(Pid(2), 2),
            policy: ChangePolicy::Static,
        })
        .unwrap();
        let other = RegId::new(RegionId(1), RegName::new(1, 0, 0));
        let resp = m.apply(
            Pid(1),
            &OpRequest::Write(vec![(reg(0), Bytes::from_static(b"x")), (other, Bytes::from_static(b"y"))]),
        );
        assert_eq!(resp, OpResponse::Write(vec![Ok(()), Err(Nak)]));
        assert!(!resp.all_acked());
    }
}

//! The shared-memory side of the model: permissioned regions of registers
//! hosted on crash-prone memories.

mod memory;
mod permission;

pub use memory::{
    Memory, Nak, OpRequest, OpResponse, ReadResult, RegId, RegName, RegionId, RegionSpec, Value,
    WriteResult,
};
pub use permission::{ChangePolicy, Permission};

use thiserror::Error;

use crate::ids::Pid;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("{0} appears in more than one access set")]
    OverlappingPermission(Pid),
    #[error("region {0:?} declared twice on the same memory")]
    DuplicateRegion(RegionId),
}

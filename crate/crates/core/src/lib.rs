//! Simulation and verification of agreement protocols in the message-and-memory
//! model: processes that communicate over both point-to-point links and
//! RDMA-style shared memories with per-region access permissions.
//!
//! The [`sim`] module provides a deterministic discrete-event executor; the
//! remaining modules implement protocols on top of it, and [`harness`] turns
//! scenario files into checked runs.

pub mod aligned;
pub mod backup;
pub mod broadcast;
pub mod cheap_quorum;
pub mod fast_robust;
pub mod harness;
pub mod ids;
pub mod model;
pub mod pmp;
pub mod properties;
pub mod signatures;
pub mod sim;
pub mod swmr;
pub mod wire;

pub use ids::{majority, Mid, Pid};
pub use model::{ChangePolicy, Nak, Permission, RegId, RegName, RegionId, RegionSpec, Value};
pub use signatures::{Keyring, SignedValue};
pub use sim::{Ctx, DecisionPath, RunSetup, Synchrony, SystemConfig, Trace};

//! Discrete-event simulation of processes, links and memories.

pub mod checks;
mod config;
mod ctx;
mod executor;
pub mod explore;
mod fault;
mod omega;
mod trace;

pub use config::{ConfigError, RunLimits, Synchrony, SystemConfig, DEFAULT_DELTA};
pub use ctx::{Ctx, Verifier};
pub use executor::{run, FnProtocol, Message, Protocol, Role, RunOutcome, RunSetup, SimError, StopRule, SCRIPTED_STALLS};
pub use fault::{validate_faults, AdversaryScript, FaultKind, FaultSpec, FaultTarget, Pause, Trigger};
pub use omega::OmegaSpec;
pub use trace::{
    Action, Actor, Decision, DecisionPath, EvidenceClass, MsgId, OpId, ProtocolEvent, StopReason, Trace,
    TraceEntry,
};

#[cfg(test)]
mod tests;

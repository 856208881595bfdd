//! Scenario files, experiment execution and reports.

pub mod report;
pub mod runner;
pub mod scenario;

pub use report::{emit_report, Format, Report, RunReport, SCHEMA_VERSION};
pub use runner::{evaluate, run_protocol, run_scenario, run_seed};
pub use scenario::{ProtocolKind, ProtocolOptions, Scenario, ScenarioError, Violation};

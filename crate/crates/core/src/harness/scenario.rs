//! Scenario files: a TOML description of one experiment.
//!
//! ```toml
//! name = "pmp-failure-free"
//! protocol = "pmp"
//!
//! [system]
//! n = 2
//! f_p = 1
//! m = 3
//! f_m = 1
//!
//! [schedule]
//! mode = "asynchronous"
//! stall_percent = 20
//! max_stall = 4
//!
//! [[faults]]
//! process = 1
//! at = 3
//!
//! [runs]
//! seed = 0
//! repetitions = 50
//! ```
//!
//! Everything except `protocol` and `[system]` is optional. The full schema
//! is documented in `docs/scenario-format.md`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use bytes::Bytes;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aligned::{AlignedPaxosProtocol, MemoryAccess};
use crate::backup::RobustBackupProtocol;
use crate::broadcast::RbProtocol;
use crate::cheap_quorum::CheapQuorumProtocol;
use crate::fast_robust::FastRobustProtocol;
use crate::ids::{Mid, Pid};
use crate::pmp::disk::DiskPaxosProtocol;
use crate::pmp::PmpProtocol;
use crate::sim::{
    validate_faults, AdversaryScript, FaultKind, FaultSpec, FaultTarget, OmegaSpec, Pause, Protocol, RunLimits,
    RunSetup, Synchrony, SystemConfig, Trigger, DEFAULT_DELTA,
};

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProtocolKind {
    ReliableBroadcast,
    CheapQuorum,
    FastRobust,
    RobustBackup,
    Pmp,
    DiskPaxos,
    AlignedPaxos,
}

impl ProtocolKind {
    pub const ALL: [ProtocolKind; 7] = [
        ProtocolKind::ReliableBroadcast,
        ProtocolKind::CheapQuorum,
        ProtocolKind::FastRobust,
        ProtocolKind::RobustBackup,
        ProtocolKind::Pmp,
        ProtocolKind::DiskPaxos,
        ProtocolKind::AlignedPaxos,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProtocolKind::ReliableBroadcast => "reliable-broadcast",
            ProtocolKind::CheapQuorum => "cheap-quorum",
            ProtocolKind::FastRobust => "fast-robust",
            ProtocolKind::RobustBackup => "robust-backup",
            ProtocolKind::Pmp => "pmp",
            ProtocolKind::DiskPaxos => "disk-paxos",
            ProtocolKind::AlignedPaxos => "aligned-paxos",
        }
    }

    /// Whether the protocol tolerates Byzantine processes at all.
    pub fn byzantine_tolerant(self) -> bool {
        matches!(
            self,
            ProtocolKind::ReliableBroadcast
                | ProtocolKind::CheapQuorum
                | ProtocolKind::FastRobust
                | ProtocolKind::RobustBackup
        )
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProtocolKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ProtocolKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| format!("unknown protocol `{s}`"))
    }
}

/// Knobs that only some protocols read.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolOptions {
    /// Messages per sender (reliable-broadcast).
    pub keys: u64,
    /// Memory access mode (aligned-paxos).
    pub access: MemoryAccess,
}

impl Default for ProtocolOptions {
    fn default() -> Self {
        Self { keys: 1, access: MemoryAccess::Exclusive }
    }
}

/// A validated scenario.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Scenario {
    pub name: String,
    pub protocol: ProtocolKind,
    /// Template for every run; the seed is replaced per run.
    pub setup: RunSetup,
    pub inputs: Vec<Bytes>,
    pub seeds: Vec<u64>,
    pub options: ProtocolOptions,
}

/// One constraint violation, located by field path.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("constraint violation: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Constraint(Vec<Violation>),
}

impl ScenarioError {
    pub fn violations(&self) -> &[Violation] {
        match self {
            ScenarioError::Constraint(v) => v,
            _ => &[],
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: Option<String>,
    protocol: ProtocolKind,
    system: RawSystem,
    inputs: Option<Vec<String>>,
    #[serde(default)]
    schedule: RawSchedule,
    #[serde(default)]
    limits: RawLimits,
    #[serde(default)]
    omega: RawOmega,
    #[serde(default)]
    faults: Vec<RawFault>,
    #[serde(default)]
    pauses: Vec<RawPause>,
    #[serde(default)]
    runs: RawRuns,
    #[serde(default)]
    options: ProtocolOptions,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    n: usize,
    f_p: usize,
    m: usize,
    f_m: usize,
    #[serde(default)]
    byzantine: bool,
    #[serde(default = "yes")]
    links: bool,
    #[serde(default = "default_delta")]
    delta: u64,
}

fn yes() -> bool {
    true
}

fn default_delta() -> u64 {
    DEFAULT_DELTA
}

#[derive(Deserialize, Default, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
enum Mode {
    #[default]
    Synchronous,
    Asynchronous,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawSchedule {
    mode: Mode,
    stall_percent: u32,
    max_stall: u64,
}

impl Default for RawSchedule {
    fn default() -> Self {
        Self { mode: Mode::Synchronous, stall_percent: 20, max_stall: 4 }
    }
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawLimits {
    budget: Option<u64>,
    horizon: Option<u64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawOmega {
    #[serde(default)]
    timeline: Vec<(u64, u16)>,
    stabilize_at: Option<u64>,
    eventual: Option<u16>,
    #[serde(default)]
    chaotic: bool,
}

#[derive(Deserialize, Default, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
enum RawFaultKind {
    #[default]
    Crash,
    Byzantine,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFault {
    process: Option<u16>,
    memory: Option<u16>,
    #[serde(default)]
    kind: RawFaultKind,
    script: Option<AdversaryScript>,
    at: Option<u64>,
    when_decided: Option<u16>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPause {
    process: u16,
    from: u64,
    until: u64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawRuns {
    seed: u64,
    repetitions: u64,
    seeds: Option<Vec<u64>>,
}

impl Default for RawRuns {
    fn default() -> Self {
        Self { seed: 0, repetitions: 1, seeds: None }
    }
}

/// Default inputs `v1..vn`.
pub fn default_inputs(n: usize) -> Vec<Bytes> {
    (1..=n).map(|i| Bytes::from(format!("v{i}"))).collect()
}

struct Violations(Vec<Violation>);

impl Violations {
    fn add(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.0.push(Violation { path: path.into(), message: message.into() });
    }
}

impl Scenario {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
        let mut s: Scenario = text.parse()?;
        if s.name.is_empty() {
            s.name = path.file_stem().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
        }
        Ok(s)
    }

    /// Builds a scenario from an already parsed table, e.g. one edited by a
    /// parameter sweep.
    pub fn from_table(table: toml::Table) -> Result<Self, ScenarioError> {
        let raw: RawScenario = table.try_into().map_err(|e: toml::de::Error| ScenarioError::Parse(e.to_string()))?;
        Self::from_raw(raw)
    }

    fn from_raw(raw: RawScenario) -> Result<Self, ScenarioError> {
        let mut bad = Violations(Vec::new());
        let sys = raw.system;
        let config = SystemConfig {
            n: sys.n,
            f_p: sys.f_p,
            m: sys.m,
            f_m: sys.f_m,
            byzantine: sys.byzantine,
            links: sys.links,
            delta: sys.delta,
        };
        if let Err(e) = config.validate() {
            bad.add("system", e.to_string());
        }

        let inputs = match raw.inputs {
            Some(v) => {
                if v.len() != sys.n {
                    bad.add("inputs", format!("{} inputs for n={}", v.len(), sys.n));
                }
                v.into_iter().map(Bytes::from).collect()
            }
            None => default_inputs(sys.n),
        };

        let synchrony = match raw.schedule.mode {
            Mode::Synchronous => Synchrony::Synchronous,
            Mode::Asynchronous => {
                if raw.schedule.stall_percent > 100 {
                    bad.add("schedule.stall_percent", "must be at most 100");
                }
                Synchrony::Asynchronous { stall_percent: raw.schedule.stall_percent, max_stall: raw.schedule.max_stall }
            }
        };

        let defaults = RunLimits::default();
        let limits = RunLimits {
            budget: raw.limits.budget.unwrap_or(defaults.budget),
            horizon: raw.limits.horizon.unwrap_or(defaults.horizon),
        };

        let process = |id: u16, path: String, bad: &mut Violations| {
            if id == 0 || id as usize > sys.n {
                bad.add(path, format!("no process {id} (processes are 1..={})", sys.n));
            }
            Pid(id)
        };

        let mut faults = Vec::new();
        for (i, f) in raw.faults.iter().enumerate() {
            let at = format!("faults[{i}]");
            let target = match (f.process, f.memory) {
                (Some(p), None) => FaultTarget::Process(process(p, format!("{at}.process"), &mut bad)),
                (None, Some(m)) => {
                    if m == 0 || m as usize > sys.m {
                        bad.add(format!("{at}.memory"), format!("no memory {m} (memories are 1..={})", sys.m));
                    }
                    FaultTarget::Memory(Mid(m))
                }
                _ => {
                    bad.add(&at, "needs exactly one of `process` and `memory`");
                    continue;
                }
            };
            let kind = match (&f.kind, f.script) {
                (RawFaultKind::Crash, None) => FaultKind::Crash,
                (RawFaultKind::Crash, Some(_)) => {
                    bad.add(format!("{at}.script"), "only Byzantine faults take a script");
                    continue;
                }
                (RawFaultKind::Byzantine, script) => {
                    if !raw.protocol.byzantine_tolerant() {
                        bad.add(format!("{at}.kind"), format!("{} tolerates crash faults only", raw.protocol));
                    } else if !sys.byzantine {
                        bad.add(format!("{at}.kind"), "Byzantine fault in a system with `byzantine = false`");
                    }
                    if matches!(target, FaultTarget::Memory(_)) {
                        bad.add(format!("{at}.kind"), "memories only crash");
                    }
                    FaultKind::Byzantine(script.unwrap_or(AdversaryScript::Silent))
                }
            };
            let trigger = match (f.at, f.when_decided) {
                (Some(t), None) => Trigger::At(t),
                (None, None) => Trigger::At(0),
                (None, Some(p)) => Trigger::WhenDecided(process(p, format!("{at}.when_decided"), &mut bad)),
                (Some(_), Some(_)) => {
                    bad.add(&at, "`at` and `when_decided` are exclusive");
                    continue;
                }
            };
            faults.push(FaultSpec { target, kind, trigger });
        }

        let mut pauses = Vec::new();
        for (i, p) in raw.pauses.iter().enumerate() {
            let pid = process(p.process, format!("pauses[{i}].process"), &mut bad);
            if p.from > p.until {
                bad.add(format!("pauses[{i}]"), "`from` is after `until`");
            }
            pauses.push(Pause { pid, from: p.from, until: p.until });
        }

        for (i, (_, p)) in raw.omega.timeline.iter().enumerate() {
            process(*p, format!("omega.timeline[{i}]"), &mut bad);
        }
        let eventual = raw.omega.eventual.map(|p| process(p, "omega.eventual".into(), &mut bad));
        if let Some(p) = eventual {
            if faults.iter().any(|f| f.target == FaultTarget::Process(p)) {
                bad.add("omega.eventual", format!("{p} is faulty"));
            }
        }
        let omega = OmegaSpec {
            timeline: raw.omega.timeline.iter().map(|&(t, p)| (t, Pid(p))).collect(),
            stabilize_at: raw.omega.stabilize_at,
            eventual,
            chaotic: raw.omega.chaotic,
        };

        let seeds = match raw.runs.seeds {
            Some(list) => {
                if raw.runs.repetitions != 1 || raw.runs.seed != 0 {
                    bad.add("runs.seeds", "give either `seeds` or `seed`/`repetitions`");
                }
                if list.is_empty() {
                    bad.add("runs.seeds", "empty");
                }
                list
            }
            None => {
                if raw.runs.repetitions == 0 {
                    bad.add("runs.repetitions", "must be at least 1");
                }
                (raw.runs.seed..raw.runs.seed.saturating_add(raw.runs.repetitions)).collect()
            }
        };
        if raw.options.keys == 0 {
            bad.add("options.keys", "must be at least 1");
        }

        if !bad.0.is_empty() {
            return Err(ScenarioError::Constraint(bad.0));
        }

        // Only reached with in-range identifiers, so the remaining checks
        // cannot trip over indexing.
        if let Err(e) = validate_faults(&config, &faults) {
            bad.add("faults", e.to_string());
        }
        let setup = RunSetup { config, synchrony, limits, seed: 0, faults, pauses, omega, script: None };
        let scenario = Scenario {
            name: raw.name.unwrap_or_default(),
            protocol: raw.protocol,
            setup,
            inputs,
            seeds,
            options: raw.options,
        };
        if let Err(e) = scenario.build().check_config(&scenario.setup.config) {
            bad.add("system", format!("{}: {e}", scenario.protocol));
        }
        if !bad.0.is_empty() {
            return Err(ScenarioError::Constraint(bad.0));
        }
        Ok(scenario)
    }

    /// The protocol instance for this scenario.
    pub fn build(&self) -> Box<dyn Protocol> {
        let inputs = self.inputs.clone();
        match self.protocol {
            ProtocolKind::ReliableBroadcast => Box::new(RbProtocol::new(self.setup.config.n, self.options.keys)),
            ProtocolKind::CheapQuorum => Box::new(CheapQuorumProtocol::new(inputs)),
            ProtocolKind::FastRobust => Box::new(FastRobustProtocol::new(inputs)),
            ProtocolKind::RobustBackup => Box::new(RobustBackupProtocol::new(inputs)),
            ProtocolKind::Pmp => Box::new(PmpProtocol::new(inputs)),
            ProtocolKind::DiskPaxos => Box::new(DiskPaxosProtocol::new(inputs)),
            ProtocolKind::AlignedPaxos => Box::new(AlignedPaxosProtocol::new(inputs, self.options.access)),
        }
    }

    /// Replaces the seed list with `count` consecutive seeds from `start`.
    pub fn with_seeds(mut self, start: u64, count: u64) -> Self {
        self.seeds = (start..start.saturating_add(count.max(1))).collect();
        self
    }

    pub fn with_budget(mut self, budget: u64) -> Self {
        self.setup.limits.budget = budget;
        self
    }

    /// The setup of the run with `seed`.
    pub fn setup_for(&self, seed: u64) -> RunSetup {
        RunSetup { seed, ..self.setup.clone() }
    }
}

impl FromStr for Scenario {
    type Err = ScenarioError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let raw: RawScenario = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        Self::from_raw(raw)
    }
}

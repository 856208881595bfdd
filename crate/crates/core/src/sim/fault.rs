use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ids::{Mid, Pid};

use super::config::{ConfigError, SystemConfig};

/// Scripted Byzantine behaviours. Each protocol interprets the script in its
/// own terms; none of them can produce a valid signature of another process.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdversaryScript {
    /// Takes no steps at all.
    Silent,
    /// Sends or writes conflicting values to different recipients or memories.
    Equivocator,
    /// Re-presents old signed values and proofs in new contexts.
    StaleProofReplayer,
    /// Repeatedly requests permissions it is not entitled to.
    PermissionGrabber,
    /// Fabricates evidence: unsigned proofs, fake histories.
    HistoryForger,
}

impl AdversaryScript {
    pub const ALL: [AdversaryScript; 5] = [
        AdversaryScript::Silent,
        AdversaryScript::Equivocator,
        AdversaryScript::StaleProofReplayer,
        AdversaryScript::PermissionGrabber,
        AdversaryScript::HistoryForger,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AdversaryScript::Silent => "silent",
            AdversaryScript::Equivocator => "equivocator",
            AdversaryScript::StaleProofReplayer => "stale-proof-replayer",
            AdversaryScript::PermissionGrabber => "permission-grabber",
            AdversaryScript::HistoryForger => "history-forger",
        }
    }
}

impl fmt::Display for AdversaryScript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub enum FaultTarget {
    Process(Pid),
    Memory(Mid),
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub enum FaultKind {
    Crash,
    Byzantine(AdversaryScript),
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub enum Trigger {
    /// At the given simulated time.
    At(u64),
    /// Right after the given process decides.
    WhenDecided(Pid),
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct FaultSpec {
    pub target: FaultTarget,
    pub kind: FaultKind,
    pub trigger: Trigger,
}

impl FaultSpec {
    pub fn crash_process(p: Pid, at: u64) -> Self {
        Self { target: FaultTarget::Process(p), kind: FaultKind::Crash, trigger: Trigger::At(at) }
    }

    pub fn crash_memory(m: Mid, at: u64) -> Self {
        Self { target: FaultTarget::Memory(m), kind: FaultKind::Crash, trigger: Trigger::At(at) }
    }

    pub fn byzantine(p: Pid, script: AdversaryScript) -> Self {
        Self { target: FaultTarget::Process(p), kind: FaultKind::Byzantine(script), trigger: Trigger::At(0) }
    }
}

/// A process that takes no steps during `[from, until)`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct Pause {
    pub pid: Pid,
    pub from: u64,
    pub until: u64,
}

/// Checks a fault schedule against the system's fault bounds.
pub fn validate_faults(cfg: &SystemConfig, faults: &[FaultSpec]) -> Result<(), ConfigError> {
    let err = |s: String| Err(ConfigError::Faults(s));
    let mut procs = BTreeSet::new();
    let mut mems = BTreeSet::new();
    for f in faults {
        match f.target {
            FaultTarget::Process(p) => {
                if p.0 == 0 || p.index() >= cfg.n {
                    return err(format!("{p} is not a process"));
                }
                if !procs.insert(p) {
                    return err(format!("{p} faulted twice"));
                }
                if let FaultKind::Byzantine(_) = f.kind {
                    if !cfg.byzantine {
                        return err(format!("{p} is Byzantine but the system is crash-only"));
                    }
                    if f.trigger != Trigger::At(0) {
                        return err(format!("Byzantine {p} must be faulty from time 0"));
                    }
                }
            }
            FaultTarget::Memory(m) => {
                if m.0 == 0 || m.index() >= cfg.m {
                    return err(format!("{m} is not a memory"));
                }
                if f.kind != FaultKind::Crash {
                    return err(format!("{m}: memories only crash"));
                }
                if !mems.insert(m) {
                    return err(format!("{m} faulted twice"));
                }
            }
        }
        if let Trigger::WhenDecided(p) = f.trigger {
            if p.0 == 0 || p.index() >= cfg.n {
                return err(format!("trigger refers to unknown {p}"));
            }
        }
    }
    if procs.len() > cfg.f_p {
        return err(format!("{} process faults exceed f_p={}", procs.len(), cfg.f_p));
    }
    if mems.len() > cfg.f_m {
        return err(format!("{} memory faults exceed f_m={}", mems.len(), cfg.f_m));
    }
    Ok(())
}

//! Fast & Robust: Cheap Quorum first, and on abort Preferential Paxos over
//! the robust backup, fed with the abort outcomes ranked by their evidence.
//!
//! A process that decided on the fast path keeps watching the panic flags;
//! if others panic it panics too and joins the backup with its decided value
//! and whatever evidence it holds.

pub mod check;
pub mod priority;

use std::rc::Rc;

use bytes::Bytes;

use crate::backup::paxos::InputMode;
use crate::backup::{self, start_backup, BackupConfig, Misbehaviour};
use crate::broadcast::RbLayout;
use crate::cheap_quorum::{self, cheap_quorum, CqConfig, CqLayout};
use crate::model::RegionSpec;
use crate::sim::{AdversaryScript, ConfigError, Ctx, DecisionPath, EvidenceClass, Protocol, Role, SystemConfig};

use priority::{encode_label, AbortLabels, ExplicitLabels, Preference};

fn preferential<L: priority::Labeler + 'static>(layout: RbLayout, quorum: usize, labels: L) -> BackupConfig {
    let rule = Rc::new(Preference(labels));
    BackupConfig {
        mode: InputMode::Preferential { quorum, rule: rule.clone() },
        summary: Some(rule),
        ..BackupConfig::plain(layout)
    }
}

fn spawn_backup(ctx: &Ctx, cfg: BackupConfig, setup: Bytes, behaviour: Misbehaviour) {
    let rx = start_backup(ctx, cfg, setup, behaviour);
    if behaviour == Misbehaviour::None {
        let c = ctx.clone();
        ctx.spawn(async move {
            if let Ok(v) = rx.await {
                c.decide(v, DecisionPath::Backup);
            }
        });
    }
}

/// The composed protocol.
pub struct FastRobustProtocol {
    pub inputs: Vec<Bytes>,
    pub cq: CqLayout,
    pub rb: RbLayout,
    /// Fast-path timeout; the system's `delta` when unset.
    pub timeout: Option<u64>,
}

impl FastRobustProtocol {
    pub fn new(inputs: Vec<Bytes>) -> Self {
        let n = inputs.len();
        let cq = CqLayout::new(0, n);
        Self { inputs, rb: RbLayout::new(cq.end(), n), cq, timeout: None }
    }
}

impl Protocol for FastRobustProtocol {
    fn regions(&self, _cfg: &SystemConfig) -> Vec<RegionSpec> {
        let mut r = self.cq.regions();
        r.extend(self.rb.regions());
        r
    }

    fn check_config(&self, cfg: &SystemConfig) -> Result<(), ConfigError> {
        cheap_quorum::byzantine_resilience("fast & robust", self.inputs.len(), cfg)
    }

    fn start(&self, ctx: Ctx, role: Role) {
        let sys = ctx.config();
        let cq = CqConfig { layout: self.cq, timeout: self.timeout.unwrap_or(sys.delta) };
        let bcfg = preferential(self.rb, sys.n - sys.f_p, AbortLabels { verifier: ctx.verifier(), n: sys.n });
        let input = self.inputs[ctx.pid().index()].clone();
        let behaviour = match role {
            Role::Honest => Misbehaviour::None,
            Role::Byzantine(script) => match backup::misbehaviour(script) {
                Some(b) => b,
                None => return,
            },
        };
        if role == Role::Byzantine(AdversaryScript::PermissionGrabber) {
            let c = ctx.clone();
            let regions = self.rb.regions();
            ctx.spawn(async move { backup::grab_permissions(&c, regions).await });
        }
        let c = ctx.clone();
        ctx.spawn(async move {
            let outcome = match role {
                Role::Honest => cheap_quorum(&c, cq, input).await,
                Role::Byzantine(script) => cheap_quorum::adversary(&c, cq, script, input).await,
            };
            spawn_backup(&c, bcfg, outcome.encode(), behaviour);
        });
    }
}

/// Preferential Paxos on its own, with explicitly labelled inputs.
pub struct PreferentialProtocol {
    pub inputs: Vec<(EvidenceClass, Bytes)>,
    pub layout: RbLayout,
}

impl PreferentialProtocol {
    pub fn new(inputs: Vec<(EvidenceClass, Bytes)>) -> Self {
        let n = inputs.len();
        Self { inputs, layout: RbLayout::new(0, n) }
    }
}

impl Protocol for PreferentialProtocol {
    fn regions(&self, _cfg: &SystemConfig) -> Vec<RegionSpec> {
        self.layout.regions()
    }

    fn check_config(&self, cfg: &SystemConfig) -> Result<(), ConfigError> {
        cheap_quorum::byzantine_resilience("preferential paxos", self.inputs.len(), cfg)
    }

    fn start(&self, ctx: Ctx, role: Role) {
        let sys = ctx.config();
        let cfg = preferential(self.layout, sys.n - sys.f_p, ExplicitLabels);
        let (class, value) = &self.inputs[ctx.pid().index()];
        let behaviour = match role {
            Role::Honest => Misbehaviour::None,
            Role::Byzantine(script) => match backup::misbehaviour(script) {
                Some(b) => b,
                None => return,
            },
        };
        spawn_backup(&ctx, cfg, encode_label(*class, value), behaviour);
    }
}

#[cfg(test)]
mod tests;

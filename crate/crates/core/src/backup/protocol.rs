use bytes::Bytes;

use crate::broadcast::RbLayout;
use crate::ids::Mid;
use crate::model::{Permission, RegionSpec};
use crate::sim::{AdversaryScript, Ctx, DecisionPath, Protocol, Role, SystemConfig};

use super::{start_backup, BackupConfig, Misbehaviour};

/// Standalone robust backup: every process proposes its input to Paxos run
/// over trusted messages.
pub struct RobustBackupProtocol {
    pub inputs: Vec<Bytes>,
    pub config: BackupConfig,
}

impl RobustBackupProtocol {
    pub fn new(inputs: Vec<Bytes>) -> Self {
        let n = inputs.len();
        Self { inputs, config: BackupConfig::plain(RbLayout::new(0, n)) }
    }
}

pub(crate) fn misbehaviour(script: AdversaryScript) -> Option<Misbehaviour> {
    match script {
        AdversaryScript::Silent => None,
        AdversaryScript::Equivocator => Some(Misbehaviour::Equivocate),
        AdversaryScript::StaleProofReplayer => Some(Misbehaviour::ReplayStale),
        AdversaryScript::PermissionGrabber => Some(Misbehaviour::EagerBallots),
        AdversaryScript::HistoryForger => Some(Misbehaviour::ForgeHistory),
    }
}

/// Tries to take over every region it can name on every memory.
pub(crate) async fn grab_permissions(ctx: &Ctx, regions: Vec<RegionSpec>) {
    let n = ctx.n();
    for mem in Mid::all(ctx.m()) {
        for spec in &regions {
            ctx.change_permission(mem, spec.id, Permission::exclusive(ctx.pid(), n)).await;
            ctx.change_permission(mem, spec.id, Permission::open(n)).await;
        }
    }
}

impl Protocol for RobustBackupProtocol {
    fn regions(&self, _cfg: &SystemConfig) -> Vec<RegionSpec> {
        self.config.layout.regions()
    }

    fn check_config(&self, cfg: &SystemConfig) -> Result<(), crate::sim::ConfigError> {
        use crate::sim::ConfigError;
        if self.inputs.len() != cfg.n {
            return Err(ConfigError::Resilience(format!("{} inputs for n={}", self.inputs.len(), cfg.n)));
        }
        if cfg.n < 2 * cfg.f_p + 1 || cfg.m < 2 * cfg.f_m + 1 {
            return Err(ConfigError::Resilience("robust backup needs n >= 2f_P+1 and m >= 2f_M+1".into()));
        }
        Ok(())
    }

    fn start(&self, ctx: Ctx, role: Role) {
        let input = self.inputs[ctx.pid().index()].clone();
        let behaviour = match role {
            Role::Honest => Misbehaviour::None,
            Role::Byzantine(script) => match misbehaviour(script) {
                Some(b) => b,
                None => return,
            },
        };
        if role == Role::Byzantine(AdversaryScript::PermissionGrabber) {
            let c = ctx.clone();
            let regions = self.config.layout.regions();
            ctx.spawn(async move { grab_permissions(&c, regions).await });
        }
        let rx = start_backup(&ctx, self.config.clone(), input, behaviour);
        let c = ctx.clone();
        ctx.spawn(async move {
            if let Ok(v) = rx.await {
                c.decide(v, DecisionPath::Backup);
            }
        });
    }
}

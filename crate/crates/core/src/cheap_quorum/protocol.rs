use bytes::Bytes;

use crate::ids::{Mid, Pid};
use crate::model::{Permission, RegId};
use crate::signatures::SignedValue;
use crate::sim::{AdversaryScript, ConfigError, Ctx, Protocol, Role, StopRule, SystemConfig};
use crate::swmr;

use super::evidence::proof_body;
use super::{cheap_quorum, AbortOutcome, Candidate, CqConfig, CqLayout};

/// Standalone fast path: every process runs Cheap Quorum and is done once it
/// has decided or aborted.
pub struct CheapQuorumProtocol {
    pub inputs: Vec<Bytes>,
    pub layout: CqLayout,
    /// Follower timeout; the system's `delta` when unset.
    pub timeout: Option<u64>,
}

impl CheapQuorumProtocol {
    pub fn new(inputs: Vec<Bytes>) -> Self {
        let n = inputs.len();
        Self { inputs, layout: CqLayout::new(0, n), timeout: None }
    }

    pub fn config(&self, sys: &SystemConfig) -> CqConfig {
        CqConfig { layout: self.layout, timeout: self.timeout.unwrap_or(sys.delta) }
    }
}

pub(crate) fn byzantine_resilience(name: &str, inputs: usize, cfg: &SystemConfig) -> Result<(), ConfigError> {
    if inputs != cfg.n {
        return Err(ConfigError::Resilience(format!("{inputs} inputs for n={}", cfg.n)));
    }
    if cfg.n < 2 * cfg.f_p + 1 || cfg.m < 2 * cfg.f_m + 1 {
        return Err(ConfigError::Resilience(format!("{name} needs n >= 2f_P+1 and m >= 2f_M+1")));
    }
    Ok(())
}

impl Protocol for CheapQuorumProtocol {
    fn regions(&self, _cfg: &SystemConfig) -> Vec<crate::model::RegionSpec> {
        self.layout.regions()
    }

    fn stop_rule(&self) -> StopRule {
        StopRule::AllCorrectFinished
    }

    fn check_config(&self, cfg: &SystemConfig) -> Result<(), ConfigError> {
        byzantine_resilience("cheap quorum", self.inputs.len(), cfg)
    }

    fn start(&self, ctx: Ctx, role: Role) {
        let cfg = self.config(&ctx.config());
        let input = self.inputs[ctx.pid().index()].clone();
        let c = ctx.clone();
        match role {
            Role::Honest => ctx.spawn(async move {
                cheap_quorum(&c, cfg, input).await;
                c.finish();
            }),
            Role::Byzantine(AdversaryScript::Silent) => {}
            Role::Byzantine(script) => ctx.spawn(async move {
                adversary(&c, cfg, script, input).await;
            }),
        }
    }
}

/// Writes a different value to each half of the memories.
async fn split_write(ctx: &Ctx, reg: RegId, first: Bytes, rest: Bytes) {
    let m = ctx.m();
    for mem in Mid::all(m) {
        let v = if mem.index() < m.div_ceil(2) { first.clone() } else { rest.clone() };
        let _ = ctx.write(mem, reg, v).await;
    }
}

/// Polls the leader region until a leader-signed value shows up.
async fn await_leader(ctx: &Ctx, cfg: CqConfig) -> Option<SignedValue> {
    let start = ctx.now();
    let verifier = ctx.verifier();
    while ctx.now() - start < cfg.timeout {
        if let Some(raw) = swmr::read_many(ctx, vec![cfg.layout.leader_value()]).await.pop().flatten() {
            return SignedValue::from_bytes(&raw).ok().filter(|sv| verifier.verify(Pid::LEADER, sv));
        }
    }
    None
}

/// Fast-path part of a scripted Byzantine process. Returns the abort outcome
/// it will later claim in the backup.
pub async fn adversary(ctx: &Ctx, cfg: CqConfig, script: AdversaryScript, input: Bytes) -> AbortOutcome {
    let lay = cfg.layout;
    let me = ctx.pid();
    let n = ctx.n();
    let leader = me == Pid::LEADER;
    match script {
        AdversaryScript::Silent => AbortOutcome::bare(input),
        AdversaryScript::Equivocator => {
            if leader {
                let a = ctx.sign(input.clone());
                let b = ctx.sign(twist(&input));
                split_write(ctx, lay.leader_value(), a.to_bytes(), b.to_bytes()).await;
                return AbortOutcome { candidate: Candidate::Signed(b), proof: None };
            }
            match await_leader(ctx, cfg).await {
                Some(lv) => {
                    let good = ctx.sign(lv.to_bytes()).to_bytes();
                    let bad = ctx.sign(twist(&lv.to_bytes())).to_bytes();
                    split_write(ctx, lay.value(me), good, bad).await;
                    AbortOutcome { candidate: Candidate::Signed(lv), proof: None }
                }
                None => AbortOutcome::bare(input),
            }
        }
        AdversaryScript::StaleProofReplayer => {
            if leader {
                let sv = ctx.sign(input.clone());
                swmr::write_many(ctx, vec![(lay.leader_value(), sv.to_bytes())]).await;
            }
            let Some(lv) = await_leader(ctx, cfg).await else { return AbortOutcome::bare(input) };
            let copy = ctx.sign(lv.to_bytes()).to_bytes();
            swmr::write_many(ctx, vec![(lay.value(me), copy.clone())]).await;
            // A proof made of its own copy only, as if replayed from an
            // incomplete round.
            let stale = ctx.sign(proof_body(&vec![copy; n]));
            swmr::write_many(ctx, vec![(lay.proof(me), stale.to_bytes())]).await;
            AbortOutcome { candidate: Candidate::Signed(lv), proof: Some(stale) }
        }
        AdversaryScript::PermissionGrabber => {
            for mem in Mid::all(ctx.m()) {
                ctx.change_permission(mem, lay.leader_region(), Permission::read_only(n)).await;
                for p in Pid::all(n) {
                    ctx.change_permission(mem, lay.region(p), Permission::exclusive(me, n)).await;
                }
            }
            AbortOutcome::bare(input)
        }
        AdversaryScript::HistoryForger => {
            let fake = SignedValue::forged(input.clone(), Pid::LEADER, [0x5a; 32]);
            let copies: Vec<Bytes> =
                Pid::all(n).map(|p| SignedValue::forged(fake.to_bytes(), p, [0xa5; 32]).to_bytes()).collect();
            let proof = ctx.sign(proof_body(&copies));
            swmr::write_many(ctx, vec![(lay.proof(me), proof.to_bytes())]).await;
            AbortOutcome { candidate: Candidate::Signed(fake), proof: Some(proof) }
        }
    }
}

fn twist(v: &[u8]) -> Bytes {
    let mut out = v.to_vec();
    out.extend_from_slice(b"'");
    Bytes::from(out)
}

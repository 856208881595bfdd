use std::collections::BTreeSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ids::Pid;

use super::config::ConfigError;

/// Leader oracle behaviour for one run.
///
/// Before `stabilize_at` the oracle follows `timeline` (or answers randomly
/// when `chaotic`). From `stabilize_at` on it returns `eventual` forever,
/// which defaults to the smallest process that no fault ever targets.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OmegaSpec {
    /// `(from, leader)` pairs; the latest entry with `from <= now` applies.
    pub timeline: Vec<(u64, Pid)>,
    pub stabilize_at: Option<u64>,
    pub eventual: Option<Pid>,
    pub chaotic: bool,
}

pub(crate) struct Omega {
    timeline: Vec<(u64, Pid)>,
    stabilize_at: u64,
    eventual: Pid,
    chaotic: bool,
    n: usize,
}

impl Omega {
    pub fn resolve(
        spec: &OmegaSpec,
        n: usize,
        faulty: &BTreeSet<Pid>,
        last_fault_time: u64,
    ) -> Result<Self, ConfigError> {
        let eventual = match spec.eventual {
            Some(p) if faulty.contains(&p) => {
                return Err(ConfigError::Omega(format!("eventual leader {p} is faulty")))
            }
            Some(p) if p.0 == 0 || p.index() >= n => {
                return Err(ConfigError::Omega(format!("{p} is not a process")))
            }
            Some(p) => p,
            None => Pid::all(n)
                .find(|p| !faulty.contains(p))
                .ok_or_else(|| ConfigError::Omega("no correct process".into()))?,
        };
        let mut timeline = spec.timeline.clone();
        if timeline.iter().any(|(_, p)| p.0 == 0 || p.index() >= n) {
            return Err(ConfigError::Omega("timeline names an unknown process".into()));
        }
        timeline.sort_by_key(|(t, _)| *t);
        Ok(Self {
            timeline,
            stabilize_at: spec.stabilize_at.unwrap_or(last_fault_time),
            eventual,
            chaotic: spec.chaotic,
            n,
        })
    }

    pub fn leader(&self, now: u64, rng: &mut ChaCha8Rng) -> Pid {
        if now >= self.stabilize_at {
            return self.eventual;
        }
        if self.chaotic {
            return Pid::from_index(rng.gen_range(0..self.n));
        }
        self.timeline
            .iter()
            .rev()
            .find(|(t, _)| *t <= now)
            .map(|(_, p)| *p)
            .unwrap_or(Pid::LEADER)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn timeline_then_stable() {
        let spec = OmegaSpec {
            timeline: vec![(10, Pid(3)), (0, Pid(2))],
            stabilize_at: Some(50),
            eventual: None,
            chaotic: false,
        };
        let faulty = [Pid(1)].into();
        let o = Omega::resolve(&spec, 3, &faulty, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(o.leader(0, &mut rng), Pid(2));
        assert_eq!(o.leader(12, &mut rng), Pid(3));
        assert_eq!(o.leader(50, &mut rng), Pid(2));
    }

    #[test]
    fn default_is_p1_and_faulty_eventual_rejected() {
        let o = Omega::resolve(&OmegaSpec::default(), 3, &BTreeSet::new(), 0).unwrap();
        assert_eq!(o.leader(0, &mut ChaCha8Rng::seed_from_u64(0)), Pid(1));
        let bad = OmegaSpec { eventual: Some(Pid(1)), ..Default::default() };
        assert!(Omega::resolve(&bad, 3, &[Pid(1)].into(), 0).is_err());
    }
}

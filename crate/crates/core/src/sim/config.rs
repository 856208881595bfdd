use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Static parameters of the modelled system.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemConfig {
    /// Number of processes.
    pub n: usize,
    /// Maximum number of faulty processes.
    pub f_p: usize,
    /// Number of memories.
    pub m: usize,
    /// Maximum number of crashed memories.
    pub f_m: usize,
    /// Whether faulty processes may be Byzantine rather than crash-only.
    pub byzantine: bool,
    /// Whether point-to-point message links exist. Memory-only protocols run
    /// with links disabled.
    pub links: bool,
    /// Synchrony bound in delays; protocols derive their timeouts from it.
    #[serde(default = "default_delta")]
    pub delta: u64,
}

pub const DEFAULT_DELTA: u64 = 32;

fn default_delta() -> u64 {
    DEFAULT_DELTA
}

impl SystemConfig {
    pub fn crash(n: usize, f_p: usize, m: usize, f_m: usize) -> Self {
        Self { n, f_p, m, f_m, byzantine: false, links: true, delta: DEFAULT_DELTA }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n == 0 {
            return Err(ConfigError::NoProcesses);
        }
        if self.n > u16::MAX as usize - 1 || self.m > u16::MAX as usize - 1 {
            return Err(ConfigError::TooLarge);
        }
        if self.f_p > self.n {
            return Err(ConfigError::Resilience(format!("f_p={} exceeds n={}", self.f_p, self.n)));
        }
        if self.f_m > self.m {
            return Err(ConfigError::Resilience(format!("f_m={} exceeds m={}", self.f_m, self.m)));
        }
        if self.delta < 2 {
            return Err(ConfigError::Resilience("delta must cover one memory operation (>= 2)".into()));
        }
        Ok(())
    }
}

/// How the scheduler orders and delays process steps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Synchrony {
    /// Every step runs as soon as it is enabled; equal-time events run in
    /// creation order.
    Synchronous,
    /// With probability `stall_percent`/100 an enabled step is postponed by
    /// 1..=`max_stall` delays; equal-time events run in seeded random order.
    Asynchronous { stall_percent: u32, max_stall: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunLimits {
    /// Maximum number of processed events.
    pub budget: u64,
    /// Maximum simulated time, in delays.
    pub horizon: u64,
}

impl Default for RunLimits {
    fn default() -> Self {
        Self { budget: 1_000_000, horizon: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("system needs at least one process")]
    NoProcesses,
    #[error("too many processes or memories")]
    TooLarge,
    #[error("resilience constraint violated: {0}")]
    Resilience(String),
    #[error("invalid fault schedule: {0}")]
    Faults(String),
    #[error("invalid leader oracle: {0}")]
    Omega(String),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(SystemConfig::crash(3, 1, 3, 1).validate().is_ok());
        assert_eq!(SystemConfig::crash(0, 0, 1, 0).validate(), Err(ConfigError::NoProcesses));
        assert!(matches!(SystemConfig::crash(2, 3, 1, 0).validate(), Err(ConfigError::Resilience(_))));
        assert!(matches!(SystemConfig::crash(2, 1, 1, 2).validate(), Err(ConfigError::Resilience(_))));
    }
}

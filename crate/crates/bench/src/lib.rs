//! Benchmark fixtures: ready-to-run scenarios for each protocol.

use mnm_core::harness::{ProtocolKind, ProtocolOptions, Scenario};
use mnm_core::sim::{AdversaryScript, FaultSpec, RunSetup, Synchrony};
use bytes::Bytes;
use mnm_core::{Mid, Pid, SystemConfig};

fn inputs(n: usize) -> Vec<Bytes> {
    (1..=n).map(|i| Bytes::from(format!("v{i}"))).collect()
}

fn scenario(protocol: ProtocolKind, setup: RunSetup) -> Scenario {
    Scenario {
        name: protocol.name().into(),
        protocol,
        inputs: inputs(setup.config.n),
        setup,
        seeds: vec![0],
        options: ProtocolOptions::default(),
    }
}

/// The tolerated process faults for `protocol` at `n` processes, with three
/// memories of which one may fail.
pub fn config(protocol: ProtocolKind, n: usize) -> SystemConfig {
    let f_p = match protocol {
        ProtocolKind::CheapQuorum | ProtocolKind::FastRobust | ProtocolKind::RobustBackup | ProtocolKind::ReliableBroadcast => (n - 1) / 2,
        // any minority of the n + 3 agents, at most one of them a memory
        ProtocolKind::AlignedPaxos => ((n + 3 - 1) / 2 - 1).min(n - 1),
        _ => n - 1,
    };
    SystemConfig { byzantine: protocol.byzantine_tolerant(), ..SystemConfig::crash(n, f_p, 3, 1) }
}

/// Failure-free synchronous run.
pub fn failure_free(protocol: ProtocolKind, n: usize) -> Scenario {
    scenario(protocol, RunSetup::new(config(protocol, n)))
}

/// Asynchronous run with a crashed memory and, for Byzantine-tolerant
/// protocols, an equivocating last process; otherwise the leader crashes.
pub fn adversarial(protocol: ProtocolKind, n: usize) -> Scenario {
    let mut setup = RunSetup::new(config(protocol, n));
    setup.synchrony = Synchrony::Asynchronous { stall_percent: 20, max_stall: 4 };
    setup.limits.horizon = 20_000;
    setup.faults.push(FaultSpec::crash_memory(Mid(1), 0));
    if protocol.byzantine_tolerant() {
        setup.faults.push(FaultSpec::byzantine(Pid(n as u16), AdversaryScript::Equivocator));
    } else {
        setup.faults.push(FaultSpec::crash_process(Pid::LEADER, 3));
    }
    scenario(protocol, setup)
}

#[cfg(test)]
mod tests {
    use mnm_core::harness::run_seed;

    use super::*;

    const ALL: [ProtocolKind; 7] = [
        ProtocolKind::ReliableBroadcast,
        ProtocolKind::CheapQuorum,
        ProtocolKind::FastRobust,
        ProtocolKind::RobustBackup,
        ProtocolKind::Pmp,
        ProtocolKind::DiskPaxos,
        ProtocolKind::AlignedPaxos,
    ];

    #[test]
    fn fixtures_run_clean() {
        for protocol in ALL {
            for n in [3, 5] {
                let r = run_seed(&failure_free(protocol, n), 0);
                assert!(r.passed(), "{protocol} n={n}: {r:?}");
                if protocol != ProtocolKind::CheapQuorum {
                    let r = run_seed(&adversarial(protocol, n), 1);
                    assert!(r.passed(), "{protocol} n={n} adversarial: {r:?}");
                }
            }
        }
    }
}

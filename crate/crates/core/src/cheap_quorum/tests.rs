use bytes::Bytes;

use super::check::{aborts, cq_properties, fast_decisions, progress};
use super::*;
use crate::properties::validity;
use crate::sim::checks::model_checks;
use crate::sim::{run, AdversaryScript, EvidenceClass, FaultSpec, Pause, RunSetup, StopReason, Synchrony, SystemConfig};

fn inputs(n: usize) -> Vec<Bytes> {
    (0..n).map(|i| Bytes::from(format!("in{i}"))).collect()
}

fn setup(n: usize) -> RunSetup {
    let mut s = RunSetup::new(SystemConfig { byzantine: true, ..SystemConfig::crash(n, (n - 1) / 2, 3, 1) });
    s.limits.horizon = 2_000;
    s
}

#[test]
fn failure_free_leader_decides_in_two_delays() {
    for n in [3, 5] {
        let out = run(&setup(n), &CheapQuorumProtocol::new(inputs(n))).unwrap();
        assert_eq!(out.trace.stop, StopReason::Done);
        let leader = out.trace.decision_of(Pid::LEADER).unwrap();
        assert_eq!(leader.time, 2);
        assert_eq!(leader.value, inputs(n)[0]);
        assert_eq!(fast_decisions(&out.trace).len(), n);
        assert!(progress(&out.trace).ok);
        assert!(validity(&out.trace, &inputs(n)).ok);
        for v in model_checks(&out.trace).into_iter().chain(cq_properties(&out.trace)) {
            assert!(v.ok, "{v:?}");
        }
    }
}

#[test]
fn crashed_leader_makes_followers_abort_with_inputs() {
    let mut s = setup(3);
    s.faults = vec![FaultSpec::crash_process(Pid(1), 0)];
    let out = run(&s, &CheapQuorumProtocol::new(inputs(3))).unwrap();
    assert_eq!(out.trace.stop, StopReason::Done);
    let ab = aborts(&out.trace);
    assert_eq!(ab.len(), 2);
    for (_, p, v, class) in ab {
        assert_eq!(v, inputs(3)[p.index()]);
        assert_eq!(class, EvidenceClass::Bare);
    }
}

#[test]
fn revoked_leader_write_naks_and_panics() {
    // The leader is held back while p2 revokes its write access.
    let mut s = setup(3);
    s.faults = vec![FaultSpec::byzantine(Pid(2), AdversaryScript::PermissionGrabber)];
    s.pauses = vec![Pause { pid: Pid(1), from: 0, until: 20 }];
    let out = run(&s, &CheapQuorumProtocol::new(inputs(3))).unwrap();
    assert!(out.trace.decision_of(Pid::LEADER).is_none());
    assert!(aborts(&out.trace).iter().any(|a| a.1 == Pid::LEADER));
    for v in cq_properties(&out.trace) {
        assert!(v.ok, "{v:?}");
    }
}

#[test]
fn follower_decision_then_panic_gives_unanimous_aborts() {
    // p3 is paused after it wrote its proof, so it times out and panics
    // while the others decide.
    let n = 3;
    let mut found = false;
    for from in 8..16 {
        let mut s = setup(n);
        s.pauses = vec![Pause { pid: Pid(3), from, until: from + 100 }];
        let out = run(&s, &CheapQuorumProtocol::new(inputs(n))).unwrap();
        for v in cq_properties(&out.trace) {
            assert!(v.ok, "pause at {from}: {v:?}");
        }
        let follower_decided = fast_decisions(&out.trace).iter().any(|d| d.1 != Pid::LEADER);
        let ab = aborts(&out.trace);
        if follower_decided && !ab.is_empty() {
            found = true;
            assert!(ab.iter().all(|a| a.3 == EvidenceClass::Unanimous && a.2 == inputs(n)[0]));
        }
    }
    assert!(found, "no pause produced a decide-then-abort run");
}

#[test]
fn byzantine_scripts_keep_fast_path_safe() {
    for script in AdversaryScript::ALL {
        for byz in 1..=3u16 {
            for seed in 0..4 {
                let mut s = setup(3);
                s.seed = seed;
                s.synchrony = Synchrony::Asynchronous { stall_percent: 15, max_stall: 3 };
                s.faults = vec![FaultSpec::byzantine(Pid(byz), script), FaultSpec::crash_memory(Mid(2), 0)];
                let out = run(&s, &CheapQuorumProtocol::new(inputs(3))).unwrap();
                assert_eq!(out.trace.stop, StopReason::Done, "{script} p{byz} seed {seed}");
                for v in model_checks(&out.trace).into_iter().chain(cq_properties(&out.trace)) {
                    assert!(v.ok, "{script} p{byz} seed {seed}: {v:?}");
                }
            }
        }
    }
}

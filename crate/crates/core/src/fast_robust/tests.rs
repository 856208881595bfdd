use bytes::Bytes;

use super::check::{composition, composition_exercised, priority_decision, setups};
use super::priority::oracle;
use super::*;
use crate::cheap_quorum::check::{cq_properties, fast_decisions};
use crate::ids::{Mid, Pid};
use crate::properties::{agreement, consensus};
use crate::sim::checks::model_checks;
use crate::sim::{run, FaultSpec, Pause, RunSetup, StopReason, Synchrony};

fn inputs(n: usize) -> Vec<Bytes> {
    (0..n).map(|i| Bytes::from(format!("in{i}"))).collect()
}

fn setup(n: usize) -> RunSetup {
    let mut s = RunSetup::new(SystemConfig { byzantine: true, ..SystemConfig::crash(n, (n - 1) / 2, 3, 1) });
    s.limits.horizon = 20_000;
    s
}

fn assert_all(trace: &crate::sim::Trace, ins: &[Bytes], what: &str) {
    let f = (trace.n - 1) / 2;
    let mut vs = model_checks(trace);
    vs.extend(cq_properties(trace));
    vs.extend(consensus(trace, ins, true));
    vs.push(composition(trace));
    vs.push(priority_decision(trace, f));
    for v in vs {
        assert!(v.ok, "{what}: {v:?}");
    }
}

#[test]
fn failure_free_decides_on_fast_path() {
    for n in [3, 5] {
        let out = run(&setup(n), &FastRobustProtocol::new(inputs(n))).unwrap();
        assert_eq!(out.trace.stop, StopReason::Done);
        assert_eq!(out.trace.decision_of(Pid::LEADER).unwrap().time, 2);
        assert_eq!(fast_decisions(&out.trace).len(), n);
        assert_all(&out.trace, &inputs(n), "failure free");
    }
}

#[test]
fn crashed_leader_falls_back_to_backup() {
    let mut s = setup(3);
    s.faults = vec![FaultSpec::crash_process(Pid(1), 0), FaultSpec::crash_memory(Mid(1), 0)];
    let out = run(&s, &FastRobustProtocol::new(inputs(3))).unwrap();
    assert_eq!(out.trace.stop, StopReason::Done);
    assert!(fast_decisions(&out.trace).is_empty());
    for p in [Pid(2), Pid(3)] {
        assert_eq!(out.trace.decision_of(p).unwrap().path, DecisionPath::Backup);
    }
    // both remaining inputs are bare, so the smaller one wins
    assert_eq!(out.trace.decision_of(Pid(2)).unwrap().value, inputs(3)[1]);
    assert_all(&out.trace, &inputs(3), "crashed leader");
}

#[test]
fn byzantine_scripts_keep_agreement() {
    for script in AdversaryScript::ALL {
        for byz in 1..=3u16 {
            for seed in 0..3 {
                let mut s = setup(3);
                s.seed = seed;
                s.synchrony = Synchrony::Asynchronous { stall_percent: 15, max_stall: 3 };
                s.faults = vec![FaultSpec::byzantine(Pid(byz), script), FaultSpec::crash_memory(Mid(2), 0)];
                let out = run(&s, &FastRobustProtocol::new(inputs(3))).unwrap();
                let what = format!("{script} p{byz} seed {seed}");
                assert_eq!(out.trace.stop, StopReason::Done, "{what}");
                assert_all(&out.trace, &inputs(3), &what);
            }
        }
    }
}

#[test]
fn fast_decision_survives_into_backup() {
    let n = 3;
    let mut exercised = false;
    for from in 8..16 {
        let mut s = setup(n);
        s.pauses = vec![Pause { pid: Pid(3), from, until: from + 100 }];
        let out = run(&s, &FastRobustProtocol::new(inputs(n))).unwrap();
        assert_eq!(out.trace.stop, StopReason::Done, "pause at {from}");
        assert_all(&out.trace, &inputs(n), &format!("pause at {from}"));
        exercised |= composition_exercised(&out.trace);
    }
    assert!(exercised, "no pause made the backup run after a fast decision");
}

#[test]
fn preferential_decisions_match_oracle() {
    use EvidenceClass::*;
    let cases: Vec<Vec<(EvidenceClass, &str)>> = vec![
        vec![(Bare, "c"), (LeaderSigned, "b"), (Bare, "a")],
        vec![(Unanimous, "z"), (Bare, "a"), (Unanimous, "z")],
        vec![(Bare, "d"), (Bare, "c"), (LeaderSigned, "x"), (Unanimous, "y"), (Bare, "a")],
    ];
    for case in cases {
        let n = case.len();
        let labelled: Vec<(EvidenceClass, Bytes)> =
            case.iter().map(|(c, v)| (*c, Bytes::copy_from_slice(v.as_bytes()))).collect();
        let all: Vec<oracle::Input> =
            labelled.iter().enumerate().map(|(i, (c, v))| (Pid::from_index(i), *c, v.clone())).collect();
        let f = (n - 1) / 2;
        let allowed = oracle::eligible(&all, n - f);
        for seed in 0..5 {
            let mut s = setup(n);
            s.seed = seed;
            s.synchrony = Synchrony::Asynchronous { stall_percent: 20, max_stall: 4 };
            let out = run(&s, &PreferentialProtocol::new(labelled.clone())).unwrap();
            assert_eq!(out.trace.stop, StopReason::Done);
            assert!(agreement(&out.trace).ok);
            assert_eq!(setups(&out.trace).len(), n);
            assert!(priority_decision(&out.trace, f).ok);
            for d in out.trace.decisions.values() {
                assert!(allowed.contains(&d.value), "{:?} not in {allowed:?}", d.value);
            }
        }
    }
}

use std::rc::Rc;

use bytes::Bytes;

use super::check::rb_properties;
use super::proofs::*;
use super::*;
use crate::sim::{run, AdversaryScript, FaultSpec, RunSetup, StopReason, Synchrony, SystemConfig};
use crate::signatures::{Keyring, SignedValue};

fn fixture(n: usize) -> (Keyring, Verifier) {
    let kr = Keyring::new(n, 5);
    let v = Verifier::new(Rc::new(Keyring::new(n, 5)));
    (kr, v)
}

fn copies_for(kr: &Keyring, n: usize, sender: Pid, k: u64, msg: &[u8], owners: &[u16]) -> Vec<(Pid, Bytes)> {
    let orig = kr.sign(sender, encode_body(k, msg));
    owners
        .iter()
        .map(|&o| {
            let o = Pid(o);
            let raw = if o == sender { orig.to_bytes() } else { kr.sign(o, orig.to_bytes()).to_bytes() };
            assert!(o.index() < n);
            (o, raw)
        })
        .collect()
}

#[test]
fn l1_needs_majority_of_distinct_matching_copies() {
    let n = 3;
    let (kr, v) = fixture(n);
    let q = Pid(1);
    let good = copies_for(&kr, n, q, 1, b"m", &[1, 2]);
    let l1 = kr.sign(Pid(2), l1_body(q, 1, &good)).to_bytes();
    assert_eq!(check_l1(&v, n, q, 1, &l1), Some((Bytes::from_static(b"m"), Pid(2))));
    assert_eq!(check_l1(&v, n, q, 2, &l1), None, "wrong key");

    let short = kr.sign(Pid(2), l1_body(q, 1, &good[..1])).to_bytes();
    assert_eq!(check_l1(&v, n, q, 1, &short), None);

    let dup = vec![good[1].clone(), good[1].clone()];
    assert_eq!(check_l1(&v, n, q, 1, &kr.sign(Pid(2), l1_body(q, 1, &dup)).to_bytes()), None);

    let mut mixed = copies_for(&kr, n, q, 1, b"m", &[2]);
    mixed.extend(copies_for(&kr, n, q, 1, b"x", &[3]));
    assert_eq!(check_l1(&v, n, q, 1, &kr.sign(Pid(2), l1_body(q, 1, &mixed)).to_bytes()), None);

    let mut forged = good.clone();
    forged[1].1 = SignedValue::forged(forged[1].1.slice(38..), Pid(2), [0; 32]).to_bytes();
    assert_eq!(check_l1(&v, n, q, 1, &kr.sign(Pid(2), l1_body(q, 1, &forged)).to_bytes()), None);
}

#[test]
fn l2_needs_majority_of_distinct_compilers() {
    let n = 3;
    let (kr, v) = fixture(n);
    let q = Pid(3);
    let copies = copies_for(&kr, n, q, 4, b"m", &[1, 3]);
    let l1a = kr.sign(Pid(1), l1_body(q, 4, &copies)).to_bytes();
    let l1b = kr.sign(Pid(2), l1_body(q, 4, &copies)).to_bytes();
    let l2 = kr.sign(Pid(2), l2_body(q, 4, &[l1a.clone(), l1b.clone()])).to_bytes();
    assert_eq!(check_l2(&v, n, q, 4, &l2), Some(Bytes::from_static(b"m")));
    let same = kr.sign(Pid(2), l2_body(q, 4, &[l1a.clone(), l1a.clone()])).to_bytes();
    assert_eq!(check_l2(&v, n, q, 4, &same), None);

    let other = copies_for(&kr, n, q, 4, b"x", &[2, 3]);
    let l1x = kr.sign(Pid(3), l1_body(q, 4, &other)).to_bytes();
    let mixed = kr.sign(Pid(2), l2_body(q, 4, &[l1a, l1x])).to_bytes();
    assert_eq!(check_l2(&v, n, q, 4, &mixed), None);
}

fn setup(n: usize, f: usize, m: usize) -> RunSetup {
    let mut s = RunSetup::new(SystemConfig { byzantine: true, ..SystemConfig::crash(n, f, m, (m - 1) / 2) });
    s.limits.horizon = 800;
    s
}

#[test]
fn sync_all_correct_deliver_everything() {
    let n = 3;
    let proto = RbProtocol::new(n, 2);
    let out = run(&setup(n, 1, 3), &proto).unwrap();
    assert_eq!(out.trace.stop, StopReason::Done);
    for v in rb_properties(&out.trace, &proto.layout, &out.verifier) {
        assert!(v.ok, "{v:?}");
    }
    let delivered = out
        .trace
        .protocol_events()
        .filter(|(_, e)| matches!(e, ProtocolEvent::RbDeliver { .. }))
        .count();
    assert_eq!(delivered, n * n * 2);
}

#[test]
fn adversaries_never_break_properties() {
    for script in AdversaryScript::ALL {
        for seed in 0..4 {
            let n = 3;
            let proto = RbProtocol::new(n, 2);
            let mut s = setup(n, 1, 3);
            s.seed = seed;
            s.synchrony = Synchrony::Asynchronous { stall_percent: 30, max_stall: 6 };
            s.faults = vec![FaultSpec::byzantine(Pid(3), script), FaultSpec::crash_memory(crate::ids::Mid(2), 5)];
            let out = run(&s, &proto).unwrap();
            for v in rb_properties(&out.trace, &proto.layout, &out.verifier) {
                assert!(v.ok, "{script} seed {seed}: {v:?}");
            }
            // Honest senders are always delivered.
            for p in [Pid(1), Pid(2)] {
                for q in [Pid(1), Pid(2)] {
                    assert!(out.trace.protocol_events().any(|(e, ev)| e.actor == crate::sim::Actor::Process(p)
                        && matches!(ev, ProtocolEvent::RbDeliver { sender, k: 2, .. } if *sender == q)));
                }
            }
        }
    }
}

#[test]
fn broadcast_sequence_is_enforced() {
    let proto = crate::sim::FnProtocol {
        regions: RbLayout::new(0, 1).regions(),
        stop: crate::sim::StopRule::AllCorrectDecided,
        start: |ctx: Ctx, _| {
            let c = ctx.clone();
            ctx.spawn(async move {
                let mut b = Broadcaster::new(RbLayout::new(0, 1));
                let gap = b.broadcast(&c, 2, Bytes::new()).await;
                assert_eq!(gap, Err(BroadcastError::Sequence { expected: 1, got: 2 }));
                b.broadcast(&c, 1, Bytes::new()).await.unwrap();
                let again = b.broadcast(&c, 1, Bytes::new()).await;
                assert_eq!(again, Err(BroadcastError::Sequence { expected: 2, got: 1 }));
                c.decide(Bytes::new(), crate::sim::DecisionPath::Fast);
            });
        },
    };
    let out = run(&RunSetup::new(SystemConfig::crash(1, 0, 1, 0)), &proto).unwrap();
    assert_eq!(out.trace.decisions.len(), 1);
}

#[test]
fn validate_returns_without_sender() {
    let layout = RbLayout::new(0, 3);
    let proto = crate::sim::FnProtocol {
        regions: layout.regions(),
        stop: crate::sim::StopRule::AllCorrectDecided,
        start: move |ctx: Ctx, _| {
            let c = ctx.clone();
            ctx.spawn(async move {
                let shared = RbShared::new();
                let ok = validate(&c, layout, &shared, Pid(2), 1, b"m").await;
                c.decide(Bytes::from(vec![ok as u8]), crate::sim::DecisionPath::Fast);
            });
        },
    };
    let out = run(&RunSetup::new(SystemConfig::crash(3, 0, 3, 1)), &proto).unwrap();
    assert!(out.trace.decisions.values().all(|d| d.value[..] == [0] && d.time == 2));
}

#[test]
fn validate_sees_delivered_message_and_rejects_others() {
    let layout = RbLayout::new(0, 3);
    let proto = crate::sim::FnProtocol {
        regions: layout.regions(),
        stop: crate::sim::StopRule::AllCorrectDecided,
        start: move |ctx: Ctx, _| {
            let c = ctx.clone();
            ctx.spawn(async move {
                let shared = RbShared::new();
                if c.pid() == Pid(1) {
                    Broadcaster::new(layout).broadcast(&c, 1, Bytes::from_static(b"m")).await.unwrap();
                }
                let mut obs = Observer::new(c.clone(), layout, shared.clone(), None);
                while obs.next_key(Pid(1)) == 1 {
                    obs.pass().await;
                }
                let fresh = RbShared::new();
                let good = validate(&c, layout, &fresh, Pid(1), 1, b"m").await;
                let bad = validate(&c, layout, &fresh, Pid(1), 1, b"x").await;
                c.decide(Bytes::from(vec![good as u8, bad as u8]), crate::sim::DecisionPath::Fast);
            });
        },
    };
    let out = run(&RunSetup::new(SystemConfig::crash(3, 0, 3, 1)), &proto).unwrap();
    assert!(out.trace.decisions.values().all(|d| d.value[..] == [1, 0]));
}

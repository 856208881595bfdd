use bytes::Bytes;

use super::*;
use crate::ids::{Mid, Pid};
use crate::model::{ChangePolicy, Nak, OpRequest, Permission, RegId, RegName, RegionId, RegionSpec};

const REGION: RegionId = RegionId(0);
const REG: RegId = RegId::new(REGION, RegName::new(0, 0, 0));

fn p1_region(n: usize) -> Vec<RegionSpec> {
    vec![RegionSpec { id: REGION, permission: Permission::single_writer(Pid(1), n), policy: ChangePolicy::Static }]
}

fn b(s: &'static str) -> Bytes {
    Bytes::from_static(s.as_bytes())
}

fn setup(n: usize, m: usize) -> RunSetup {
    RunSetup::new(SystemConfig::crash(n, 1, m, 1))
}

#[test]
fn local_decision_takes_zero_delays() {
    let proto = FnProtocol {
        regions: vec![],
        stop: StopRule::AllCorrectDecided,
        start: |ctx: Ctx, _| {
            let c = ctx.clone();
            ctx.spawn(async move { c.decide(b("v"), DecisionPath::Fast) });
        },
    };
    let out = run(&setup(2, 1), &proto).unwrap();
    assert_eq!(out.trace.stop, StopReason::Done);
    assert!(out.trace.decisions.values().all(|d| d.time == 0));
}

#[test]
fn message_then_decide_takes_one_delay() {
    let proto = FnProtocol {
        regions: vec![],
        stop: StopRule::AllCorrectDecided,
        start: |ctx: Ctx, _| {
            let c = ctx.clone();
            ctx.spawn(async move {
                if c.pid() == Pid(1) {
                    c.send(Pid(2), b("v"));
                    c.decide(b("v"), DecisionPath::Fast);
                } else {
                    let m = c.recv().await;
                    c.decide(m.payload, DecisionPath::Fast);
                }
            });
        },
    };
    let out = run(&setup(2, 1), &proto).unwrap();
    assert_eq!(out.trace.decisions[&Pid(2)].time, 1);
    assert!(checks::delay_accounting(&out.trace).ok);
}

#[test]
fn write_then_decide_takes_two_delays() {
    let proto = FnProtocol {
        regions: p1_region(1),
        stop: StopRule::AllCorrectDecided,
        start: |ctx: Ctx, _| {
            let c = ctx.clone();
            ctx.spawn(async move {
                c.write(Mid(1), REG, b("v")).await.unwrap();
                c.decide(b("v"), DecisionPath::Fast);
            });
        },
    };
    let out = run(&setup(1, 1), &proto).unwrap();
    assert_eq!(out.trace.decisions[&Pid(1)].time, 2);
    for v in checks::model_checks(&out.trace) {
        assert!(v.ok, "{v:?}");
    }
}

#[test]
fn crashed_memory_never_responds() {
    let proto = FnProtocol {
        regions: p1_region(1),
        stop: StopRule::AllCorrectDecided,
        start: |ctx: Ctx, _| {
            let c = ctx.clone();
            ctx.spawn(async move {
                c.write(Mid(1), REG, b("v")).await.unwrap();
                c.decide(b("v"), DecisionPath::Fast);
            });
        },
    };
    let mut s = setup(1, 1);
    s.config.f_p = 0;
    s.faults = vec![FaultSpec::crash_memory(Mid(1), 0)];
    let out = run(&s, &proto).unwrap();
    assert!(out.trace.decisions.is_empty());
    assert_eq!(out.trace.stop, StopReason::Quiescent);
    assert!(checks::crash_permanence(&out.trace).ok);
}

#[test]
fn write_without_permission_is_nakked() {
    let proto = FnProtocol {
        regions: p1_region(2),
        stop: StopRule::AllCorrectDecided,
        start: |ctx: Ctx, _| {
            let c = ctx.clone();
            ctx.spawn(async move {
                let r = c.write(Mid(1), REG, b("x")).await;
                let tag = if r == Err(Nak) { "nak" } else { "ack" };
                c.decide(b(tag), DecisionPath::Fast);
            });
        },
    };
    let out = run(&setup(2, 1), &proto).unwrap();
    assert_eq!(out.trace.decisions[&Pid(1)].value, b("ack"));
    assert_eq!(out.trace.decisions[&Pid(2)].value, b("nak"));
    assert!(checks::memory_semantics(&out.trace).iter().all(|v| v.ok));
}

#[test]
fn second_unqueued_op_is_an_error() {
    let proto = FnProtocol {
        regions: p1_region(1),
        stop: StopRule::AllCorrectDecided,
        start: |ctx: Ctx, _| {
            let (a, c) = (ctx.clone(), ctx.clone());
            ctx.spawn(async move {
                a.invoke_unqueued(Mid(1), OpRequest::Read(vec![REG])).await;
            });
            ctx.spawn(async move {
                c.invoke_unqueued(Mid(1), OpRequest::Read(vec![REG])).await;
            });
        },
    };
    let err = run(&setup(1, 1), &proto).err().unwrap();
    assert_eq!(err, SimError::OutstandingOp { pid: Pid(1), mem: Mid(1) });
}

#[test]
fn queued_ops_run_back_to_back() {
    let proto = FnProtocol {
        regions: p1_region(1),
        stop: StopRule::AllCorrectDecided,
        start: |ctx: Ctx, _| {
            let (a, c) = (ctx.clone(), ctx.clone());
            ctx.spawn(async move {
                a.write(Mid(1), REG, b("1")).await.unwrap();
            });
            ctx.spawn(async move {
                c.write(Mid(1), REG, b("2")).await.unwrap();
                c.decide(b("done"), DecisionPath::Fast);
            });
        },
    };
    let out = run(&setup(1, 1), &proto).unwrap();
    assert_eq!(out.trace.decisions[&Pid(1)].time, 4);
    assert_eq!(out.memories[0].peek(REG), Some(b("2")));
}

#[test]
fn links_can_be_disabled() {
    let proto = FnProtocol {
        regions: vec![],
        stop: StopRule::AllCorrectDecided,
        start: |ctx: Ctx, _| ctx.send(Pid(1), Bytes::new()),
    };
    let mut s = setup(1, 1);
    s.config.links = false;
    assert_eq!(run(&s, &proto).err(), Some(SimError::LinksDisabled(Pid(1))));
}

fn pingpong() -> FnProtocol<impl Fn(Ctx, Role)> {
    FnProtocol {
        regions: p1_region(3),
        stop: StopRule::AllCorrectDecided,
        start: |ctx: Ctx, _| {
            let c = ctx.clone();
            ctx.spawn(async move {
                for _ in 0..3 {
                    let _ = c.read(Mid(1), REG).await;
                    c.send_all(Bytes::from(vec![c.pid().0 as u8]));
                }
                let mut got = 0;
                while got < 9 {
                    c.recv().await;
                    got += 1;
                }
                c.decide(b("ok"), DecisionPath::Fast);
            });
        },
    }
}

#[test]
fn async_runs_are_reproducible() {
    let mut s = setup(3, 2);
    s.synchrony = Synchrony::Asynchronous { stall_percent: 50, max_stall: 5 };
    s.seed = 17;
    let a = run(&s, &pingpong()).unwrap().trace;
    let b2 = run(&s, &pingpong()).unwrap().trace;
    assert!(checks::determinism(&a, &b2).ok);
    s.seed = 18;
    let c = run(&s, &pingpong()).unwrap().trace;
    assert_ne!(a.entries, c.entries);
    for v in checks::model_checks(&c) {
        assert!(v.ok, "{v:?}");
    }
}

#[test]
fn pause_postpones_steps() {
    let mut s = setup(3, 2);
    s.pauses = vec![Pause { pid: Pid(2), from: 0, until: 30 }];
    let out = run(&s, &pingpong()).unwrap();
    assert!(out.trace.decisions.values().all(|d| d.time >= 30));
}

#[test]
fn crash_after_decision_stops_process() {
    let mut s = setup(3, 2);
    s.faults = vec![FaultSpec {
        target: FaultTarget::Process(Pid(1)),
        kind: FaultKind::Crash,
        trigger: Trigger::WhenDecided(Pid(1)),
    }];
    let proto = FnProtocol {
        regions: vec![],
        stop: StopRule::Never,
        start: |ctx: Ctx, _| {
            let c = ctx.clone();
            ctx.spawn(async move {
                loop {
                    c.decide(b("x"), DecisionPath::Fast);
                    c.send_all(Bytes::new());
                    c.sleep(5).await;
                }
            });
        },
    };
    s.limits.horizon = 50;
    let out = run(&s, &proto).unwrap();
    assert!(out.trace.faulty.contains(&Pid(1)));
    assert!(checks::crash_permanence(&out.trace).ok);
    assert_eq!(out.trace.stop, StopReason::HorizonReached);
}

#[test]
fn budget_is_enforced() {
    let mut s = setup(3, 2);
    s.limits.budget = 10;
    let out = run(&s, &pingpong()).unwrap();
    assert_eq!(out.trace.stop, StopReason::BudgetExhausted);
    assert_eq!(out.trace.events, 10);
}

#[test]
fn scripted_choices_are_counted() {
    let mut s = setup(3, 2);
    s.synchrony = Synchrony::Asynchronous { stall_percent: 0, max_stall: 0 };
    s.script = Some(vec![2, 1, 0, 2]);
    let out = run(&s, &pingpong()).unwrap();
    assert!(out.choice_points > 4);
    assert_eq!(out.trace.decisions.len(), 3);
}

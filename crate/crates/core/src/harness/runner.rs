//! Executes scenarios and evaluates the property set of each protocol.

use rayon::prelude::*;

use crate::aligned::MemoryAccess;
use crate::broadcast::check::{l2_uniqueness, rb_properties, single_write};
use crate::broadcast::RbLayout;
use crate::cheap_quorum::check::cq_properties;
use crate::fast_robust::check::{composition, priority_decision};
use crate::ids::Pid;
use crate::pmp::check::{permission_atomicity, phase2_uniqueness};
use crate::pmp::REGION;
use crate::properties::consensus;
use crate::sim::checks::{model_checks, Verdict};
use crate::sim::{run, Action, FaultKind, FaultTarget, Protocol, RunOutcome, StopReason};

use super::report::{DecisionRow, FaultRow, Report, RunReport, VerdictRow};
use super::scenario::{ProtocolKind, Scenario};

/// Model checks plus the protocol's own properties.
pub fn evaluate(s: &Scenario, out: &RunOutcome) -> Vec<Verdict> {
    let trace = &out.trace;
    let mut vs = model_checks(trace);
    match s.protocol {
        ProtocolKind::ReliableBroadcast => {
            let layout = RbLayout::new(0, s.setup.config.n);
            vs.extend(rb_properties(trace, &layout, &out.verifier));
            vs.push(l2_uniqueness(trace, &layout, &out.verifier));
            vs.push(single_write(trace, &layout));
        }
        ProtocolKind::CheapQuorum => vs.extend(cq_properties(trace)),
        ProtocolKind::FastRobust => {
            vs.extend(cq_properties(trace));
            vs.extend(consensus(trace, &s.inputs, true));
            vs.push(composition(trace));
            vs.push(priority_decision(trace, s.setup.config.f_p));
        }
        ProtocolKind::RobustBackup => vs.extend(consensus(trace, &s.inputs, true)),
        ProtocolKind::Pmp | ProtocolKind::DiskPaxos | ProtocolKind::AlignedPaxos => {
            vs.extend(consensus(trace, &s.inputs, false));
            vs.push(phase2_uniqueness(trace));
            let exclusive = match s.protocol {
                ProtocolKind::Pmp => true,
                ProtocolKind::AlignedPaxos => s.options.access == MemoryAccess::Exclusive,
                _ => false,
            };
            if exclusive {
                vs.push(permission_atomicity(trace, REGION, Pid::LEADER));
            }
        }
    }
    vs
}

/// Runs `proto` under the scenario's setup with `seed` and evaluates the
/// scenario protocol's properties on the outcome.
pub fn run_protocol(s: &Scenario, seed: u64, proto: &dyn Protocol) -> RunReport {
    let out = match run(&s.setup_for(seed), proto) {
        Ok(out) => out,
        Err(e) => {
            return RunReport {
                seed,
                stop: "error".into(),
                end_time: 0,
                events: 0,
                budget_exhausted: false,
                error: Some(e.to_string()),
                correct: 0,
                decisions: Vec::new(),
                verdicts: Vec::new(),
                faults: Vec::new(),
            }
        }
    };
    let verdicts = evaluate(s, &out).into_iter().map(VerdictRow::from).collect();
    let trace = &out.trace;
    let decisions = trace
        .decisions
        .iter()
        .filter(|(p, _)| !trace.byzantine.contains(p))
        .map(|(p, d)| DecisionRow {
            process: p.0,
            delay: d.time,
            value: String::from_utf8_lossy(&d.value).into_owned(),
            path: format!("{:?}", d.path).to_lowercase(),
        })
        .collect();
    let faults = trace
        .entries
        .iter()
        .filter_map(|e| match &e.action {
            Action::Fault { target, kind } => Some(FaultRow {
                time: e.time,
                target: match target {
                    FaultTarget::Process(p) => p.to_string(),
                    FaultTarget::Memory(m) => m.to_string(),
                },
                kind: match kind {
                    FaultKind::Crash => "crash".into(),
                    FaultKind::Byzantine(script) => format!("byzantine:{script}"),
                },
            }),
            _ => None,
        })
        .collect();
    RunReport {
        seed,
        stop: stop_name(trace.stop).into(),
        end_time: trace.end_time,
        events: trace.events,
        budget_exhausted: trace.stop == StopReason::BudgetExhausted,
        error: None,
        correct: trace.correct().count(),
        decisions,
        verdicts,
        faults,
    }
}

fn stop_name(s: StopReason) -> &'static str {
    match s {
        StopReason::Done => "done",
        StopReason::Quiescent => "quiescent",
        StopReason::BudgetExhausted => "budget-exhausted",
        StopReason::HorizonReached => "horizon",
    }
}

pub fn run_seed(s: &Scenario, seed: u64) -> RunReport {
    run_protocol(s, seed, &*s.build())
}

/// Runs every seed of the scenario, in parallel; the report lists runs in
/// seed-list order regardless of scheduling.
pub fn run_scenario(s: &Scenario) -> Report {
    let runs: Vec<RunReport> = s.seeds.par_iter().map(|&seed| run_seed(s, seed)).collect();
    Report::new(s.name.clone(), s.protocol.name(), runs)
}

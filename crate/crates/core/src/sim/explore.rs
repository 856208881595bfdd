//! Exhaustive exploration of scripted schedules.
//!
//! Every choice point of an asynchronous run takes one of the
//! [`SCRIPTED_STALLS`]. [`explore`] enumerates all scripts up to `depth`
//! choice points; later points take no stall. A script shorter than `depth`
//! is a leaf once the run has no further choice points.

use super::{run, Protocol, RunOutcome, RunSetup, SimError, Synchrony, SCRIPTED_STALLS};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ExploreStats {
    pub runs: usize,
    /// Leaves whose run had more choice points than the depth covered.
    pub truncated: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum ExploreError<E> {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("script {script:?}: {error}")]
    Rejected { script: Vec<u8>, error: E },
}

/// Runs `proto` under every script of length up to `depth` and calls
/// `visit` on each distinct leaf. Stops at the first rejection.
pub fn explore<E: std::fmt::Display>(
    base: &RunSetup,
    proto: &dyn Protocol,
    depth: usize,
    mut visit: impl FnMut(&[u8], &RunOutcome) -> Result<(), E>,
) -> Result<ExploreStats, ExploreError<E>> {
    let mut setup = base.clone();
    if setup.synchrony == Synchrony::Synchronous {
        setup.synchrony = Synchrony::Asynchronous { stall_percent: 0, max_stall: 0 };
    }
    let mut stats = ExploreStats::default();
    let mut script = Vec::new();
    let first = run_script(&mut setup, proto, &script, &mut stats)?;
    descend(&mut setup, proto, depth, &mut script, first, &mut stats, &mut visit)?;
    Ok(stats)
}

fn run_script(setup: &mut RunSetup, proto: &dyn Protocol, script: &[u8], stats: &mut ExploreStats) -> Result<RunOutcome, SimError> {
    setup.script = Some(script.to_vec());
    stats.runs += 1;
    run(setup, proto)
}

fn descend<E>(
    setup: &mut RunSetup,
    proto: &dyn Protocol,
    depth: usize,
    script: &mut Vec<u8>,
    outcome: RunOutcome,
    stats: &mut ExploreStats,
    visit: &mut impl FnMut(&[u8], &RunOutcome) -> Result<(), E>,
) -> Result<(), ExploreError<E>> {
    if script.len() >= outcome.choice_points || script.len() >= depth {
        if outcome.choice_points > script.len() {
            stats.truncated += 1;
        }
        return visit(script, &outcome).map_err(|error| ExploreError::Rejected { script: script.clone(), error });
    }
    // choice 0 is what the unextended script already ran
    let mut reuse = Some(outcome);
    for c in 0..SCRIPTED_STALLS.len() as u8 {
        script.push(c);
        let out = match reuse.take() {
            Some(o) => o,
            None => run_script(setup, proto, script, stats)?,
        };
        descend(setup, proto, depth, script, out, stats, visit)?;
        script.pop();
    }
    Ok(())
}

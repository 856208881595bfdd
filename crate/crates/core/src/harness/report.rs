//! Run reports and their table and JSON renderings.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::checks::Verdict;

/// Bumped whenever a field of the JSON output changes meaning or goes away.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionRow {
    pub process: u16,
    /// Decision time in delays since the start of the run.
    pub delay: u64,
    /// Lossy UTF-8 rendering of the decided value.
    pub value: String,
    pub path: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictRow {
    pub property: String,
    pub ok: bool,
    /// Trace index of the first entry that witnesses a violation.
    pub witness: Option<usize>,
    pub detail: String,
}

impl From<Verdict> for VerdictRow {
    fn from(v: Verdict) -> Self {
        Self { property: v.property, ok: v.ok, witness: v.witness, detail: v.detail }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultRow {
    pub time: u64,
    pub target: String,
    pub kind: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub stop: String,
    pub end_time: u64,
    pub events: u64,
    pub budget_exhausted: bool,
    /// Set when the run could not be executed at all.
    pub error: Option<String>,
    pub correct: usize,
    pub decisions: Vec<DecisionRow>,
    pub verdicts: Vec<VerdictRow>,
    pub faults: Vec<FaultRow>,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.error.is_none() && self.verdicts.iter().all(|v| v.ok)
    }

    /// Delay of the earliest decision.
    pub fn first_delay(&self) -> Option<u64> {
        self.decisions.iter().map(|d| d.delay).min()
    }

    pub fn last_delay(&self) -> Option<u64> {
        self.decisions.iter().map(|d| d.delay).max()
    }

    pub fn delay_of(&self, process: u16) -> Option<u64> {
        self.decisions.iter().find(|d| d.process == process).map(|d| d.delay)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub runs: usize,
    pub passed: usize,
    pub failed_verdicts: usize,
    /// Over the earliest decision of each run.
    pub min_delay: Option<u64>,
    pub median_delay: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub scenario: String,
    pub protocol: String,
    pub runs: Vec<RunReport>,
    pub summary: Summary,
}

impl Report {
    pub fn new(scenario: impl Into<String>, protocol: impl Into<String>, runs: Vec<RunReport>) -> Self {
        let mut delays: Vec<u64> = runs.iter().filter_map(RunReport::first_delay).collect();
        delays.sort_unstable();
        let summary = Summary {
            runs: runs.len(),
            passed: runs.iter().filter(|r| r.passed()).count(),
            failed_verdicts: runs.iter().map(|r| r.verdicts.iter().filter(|v| !v.ok).count()).sum(),
            min_delay: delays.first().copied(),
            // lower median for even counts, so the value is always observed
            median_delay: (!delays.is_empty()).then(|| delays[(delays.len() - 1) / 2]),
        };
        Self { schema_version: SCHEMA_VERSION, scenario: scenario.into(), protocol: protocol.into(), runs, summary }
    }

    pub fn passed(&self) -> bool {
        self.runs.iter().all(RunReport::passed)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Table,
    Json,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown format `{0}` (expected table or json)")]
pub struct UnknownFormat(pub String);

impl FromStr for Format {
    type Err = UnknownFormat;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "table" => Ok(Format::Table),
            "json" => Ok(Format::Json),
            other => Err(UnknownFormat(other.to_string())),
        }
    }
}

pub fn emit_report(r: &Report, format: Format) -> String {
    match format {
        Format::Table => table(r),
        Format::Json => {
            let mut s = serde_json::to_string_pretty(r).expect("reports serialize");
            s.push('\n');
            s
        }
    }
}

fn opt(v: Option<u64>) -> String {
    v.map_or("-".into(), |d| d.to_string())
}

/// Renders rows with each column padded to its widest cell.
pub fn render_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let mut line = |cells: &mut dyn Iterator<Item = &str>| {
        let parts: Vec<String> = cells.zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        out.push_str(parts.join("  ").trim_end());
        out.push('\n');
    };
    line(&mut header.iter().copied());
    for row in rows {
        line(&mut row.iter().map(String::as_str));
    }
    out
}

fn table(r: &Report) -> String {
    let header = ["seed", "stop", "decisions", "first-delay", "last-delay", "verdicts", "failures"];
    let rows: Vec<Vec<String>> = r
        .runs
        .iter()
        .map(|run| {
            let ok = run.verdicts.iter().filter(|v| v.ok).count();
            let failures: Vec<String> = run
                .verdicts
                .iter()
                .filter(|v| !v.ok)
                .map(|v| match v.witness {
                    Some(i) => format!("{}@{i}", v.property),
                    None => v.property.clone(),
                })
                .chain(run.error.iter().map(|e| format!("error: {e}")))
                .collect();
            vec![
                run.seed.to_string(),
                run.stop.clone(),
                run.decisions.len().to_string(),
                opt(run.first_delay()),
                opt(run.last_delay()),
                format!("{ok}/{}", run.verdicts.len()),
                failures.join(", "),
            ]
        })
        .collect();
    let mut out = format!("scenario {} ({})\n", r.scenario, r.protocol);
    out.push_str(&render_table(&header, &rows));
    let s = &r.summary;
    let _ = writeln!(
        out,
        "runs {}  passed {}  failed verdicts {}  min delay {}  median delay {}",
        s.runs,
        s.passed,
        s.failed_verdicts,
        opt(s.min_delay),
        opt(s.median_delay)
    );
    // spell out violations with their details below the table
    for run in &r.runs {
        for v in run.verdicts.iter().filter(|v| !v.ok) {
            let at = v.witness.map_or(String::new(), |i| format!(" at trace entry {i}"));
            let _ = writeln!(out, "seed {}: {} violated{at}: {}", run.seed, v.property, v.detail);
        }
    }
    out
}

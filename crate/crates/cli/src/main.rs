//! `mnm`: run, validate and sweep message-and-memory scenarios.
//!
//! Exit status is 0 when every property verdict passed, 1 when some verdict
//! failed and 2 when the scenario could not be loaded.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use mnm_core::harness::report::render_table;
use mnm_core::harness::{emit_report, run_scenario, Format, Report, Scenario, ScenarioError};

#[derive(Parser)]
#[command(name = "mnm", version, about = "Deterministic message-and-memory consensus experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunOpts {
    /// First seed; overrides the scenario's seed list.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of consecutive seeds to run.
    #[arg(long)]
    seeds: Option<u64>,
    /// Output format: table or json.
    #[arg(long, default_value = "table")]
    format: Format,
    /// Event budget per run.
    #[arg(long)]
    budget: Option<u64>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and check its properties.
    Run {
        scenario: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Validate a scenario without running it.
    Check { scenario: PathBuf },
    /// Run a scenario once per value of a numeric field.
    Sweep {
        scenario: PathBuf,
        /// Dotted field path, e.g. `system.n` or `schedule.stall_percent`.
        #[arg(long)]
        field: String,
        #[arg(long)]
        from: i64,
        #[arg(long)]
        to: i64,
        #[arg(long, default_value_t = 1)]
        step: i64,
        #[command(flatten)]
        opts: RunOpts,
    },
}

fn apply(mut s: Scenario, opts: &RunOpts) -> Scenario {
    if opts.seed.is_some() || opts.seeds.is_some() {
        s = s.with_seeds(opts.seed.unwrap_or(0), opts.seeds.unwrap_or(1));
    }
    if let Some(b) = opts.budget {
        s = s.with_budget(b);
    }
    s
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn set_field(table: &mut toml::Table, path: &str, value: i64) -> Result<()> {
    let (parents, leaf) = match path.rsplit_once('.') {
        Some((p, l)) => (p.split('.').collect::<Vec<_>>(), l),
        None => (Vec::new(), path),
    };
    let mut t = table;
    for key in parents {
        t = t
            .entry(key)
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .with_context(|| format!("`{key}` in `{path}` is not a table"))?;
    }
    if let Some(old) = t.get(leaf) {
        if !old.is_integer() {
            bail!("`{path}` is not a numeric field");
        }
    }
    t.insert(leaf.to_string(), toml::Value::Integer(value));
    Ok(())
}

fn sweep(path: &Path, field: &str, values: Vec<i64>, opts: &RunOpts) -> Result<bool> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let base: toml::Table = text.parse().with_context(|| format!("parsing {}", path.display()))?;
    let mut reports: Vec<(i64, Report)> = Vec::new();
    for v in values {
        let mut table = base.clone();
        set_field(&mut table, field, v)?;
        let s = Scenario::from_table(table).with_context(|| format!("{field} = {v}"))?;
        reports.push((v, run_scenario(&apply(s, opts))));
    }
    let ok = reports.iter().all(|(_, r)| r.passed());
    let text = match opts.format {
        Format::Json => {
            let rows: Vec<serde_json::Value> =
                reports.iter().map(|(v, r)| serde_json::json!({ "value": v, "report": r })).collect();
            serde_json::to_string_pretty(&serde_json::json!({ "field": field, "points": rows }))? + "\n"
        }
        Format::Table => {
            let dash = |d: Option<u64>| d.map_or("-".to_string(), |d| d.to_string());
            let rows: Vec<Vec<String>> = reports
                .iter()
                .map(|(v, r)| {
                    let s = &r.summary;
                    vec![
                        v.to_string(),
                        s.runs.to_string(),
                        s.passed.to_string(),
                        s.failed_verdicts.to_string(),
                        dash(s.min_delay),
                        dash(s.median_delay),
                    ]
                })
                .collect();
            render_table(&[field, "runs", "passed", "failed-verdicts", "min-delay", "median-delay"], &rows)
        }
    };
    emit(&text, opts.out.as_deref())?;
    Ok(ok)
}

fn load(path: &Path) -> Result<Scenario, ScenarioError> {
    Scenario::load(path)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Check { scenario } => match load(&scenario) {
            Ok(s) => {
                println!("{}: ok ({}, {} runs)", scenario.display(), s.protocol, s.seeds.len());
                Ok(true)
            }
            Err(e) => Err(e.into()),
        },
        Command::Run { scenario, opts } => load(&scenario).map_err(Into::into).and_then(|s| {
            let report = run_scenario(&apply(s, &opts));
            emit(&emit_report(&report, opts.format), opts.out.as_deref())?;
            Ok(report.passed())
        }),
        Command::Sweep { scenario, field, from, to, step, opts } => {
            if step <= 0 || from > to {
                Err(anyhow::anyhow!("need from <= to and a positive step"))
            } else {
                let values = (from..=to).step_by(step as usize).collect();
                sweep(&scenario, &field, values, &opts)
            }
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

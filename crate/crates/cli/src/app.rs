//! Command dispatch and exit-code policy: 0 ok, 1 tolerance or invariant
//! failure, 2 usage or configuration error.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use crate::compare::compare;
use crate::config::{apply_overrides, expand_sweep, ExperimentConfig};
use crate::error::CliError;
use crate::figures::{figure_data, Figure};
use crate::models::{run_model, Outcome};
use crate::output::{write_artifacts, Cell, CsvTable, RunManifest};
use crate::selftest::run_checks;

/// Variable that overrides the output directory when `--out` is absent.
pub const OUT_DIR_ENV: &str = "MICROCHEM_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "out";

#[derive(Debug, Parser)]
#[command(
    name = "microchem",
    version,
    about = "Stochastic chemistry in microdomains: solvers, oracles and figure data"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Experiment configuration (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", env = OUT_DIR_ENV)]
    pub out: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Overrides the Monte Carlo replica count.
    #[arg(long, global = true, value_name = "N")]
    pub replicas: Option<usize>,
    /// Only errors are printed.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the configured model (or sweep) and write CSV + manifest.
    Run,
    /// Compare the routes listed in `[compare]` and write a verdict report.
    Compare,
    /// Write the curve family of a figure: variance1 or varianceMarkov.
    FigureData { figure: String },
    /// Quick consistency checks of the analytic routes.
    Selftest,
}

/// Runs the command and returns the process exit code.
pub fn execute(cli: &Cli) -> i32 {
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: &Cli) -> Result<i32, CliError> {
    match &cli.command {
        Command::Run => run(cli),
        Command::Compare => run_compare(cli),
        Command::FigureData { figure } => run_figure(cli, figure),
        Command::Selftest => Ok(selftest(cli)),
    }
}

fn load(cli: &Cli) -> Result<(ExperimentConfig, toml::Table), CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Usage("--config PATH is required".into()))?;
    let (_, mut table) = ExperimentConfig::load(path)?;
    apply_overrides(&mut table, cli.seed, cli.replicas)?;
    let config: ExperimentConfig = table
        .clone()
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok((config, table))
}

fn out_dir(cli: &Cli, config: Option<&ExperimentConfig>) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| config.and_then(|c| c.out.clone()))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

fn config_json(config: &ExperimentConfig) -> serde_json::Value {
    serde_json::to_value(config).unwrap_or(serde_json::Value::Null)
}

fn finish(
    cli: &Cli,
    dir: &Path,
    stem: &str,
    table: &CsvTable,
    mut manifest: RunManifest,
) -> Result<i32, CliError> {
    manifest.status = if manifest.failures.is_empty() {
        "ok"
    } else {
        "failed"
    };
    let (csv, json) = write_artifacts(dir, stem, table, &manifest)?;
    for f in &manifest.failures {
        eprintln!("FAIL: {f}");
    }
    if !cli.quiet {
        for flag in &manifest.flags {
            println!("flag: {flag}");
        }
        println!("wrote {} and {}", csv.display(), json.display());
    }
    Ok(if manifest.failures.is_empty() { 0 } else { 1 })
}

fn run(cli: &Cli) -> Result<i32, CliError> {
    let start = Instant::now();
    let (config, table) = load(cli)?;
    let points = expand_sweep(&config, &table)?;
    let model = config
        .model
        .ok_or_else(|| CliError::Config("`model` is required for run".into()))?;
    let stem = config.stem(model.name());
    let mut manifest = RunManifest::new(
        "run",
        &format!("{stem}.csv"),
        config_json(&config),
        config.seed,
    );
    let csv = if points.is_empty() {
        let outcome = run_model(&config, model)?;
        manifest.diagnostics = outcome.diagnostics;
        manifest.flags = outcome.flags;
        manifest.failures = outcome.failures;
        for (k, v) in outcome.summary {
            manifest.diagnostics.insert(format!("summary.{k}"), v);
        }
        outcome.table
    } else {
        let results: Vec<Result<Outcome, CliError>> = points
            .par_iter()
            .map(|(_, _, point)| run_model(point, model))
            .collect();
        let outcomes = results.into_iter().collect::<Result<Vec<_>, _>>()?;
        sweep_table(&config, &points, outcomes, &mut manifest)?
    };
    manifest.time("total_seconds", start.elapsed());
    finish(cli, &out_dir(cli, Some(&config)), &stem, &csv, manifest)
}

fn sweep_table(
    config: &ExperimentConfig,
    points: &[(Option<f64>, f64, ExperimentConfig)],
    outcomes: Vec<Outcome>,
    manifest: &mut RunManifest,
) -> Result<CsvTable, CliError> {
    let names: Vec<String> = outcomes[0].summary.iter().map(|(n, _)| n.clone()).collect();
    let mut columns: Vec<String> = Vec::new();
    if let Some(series) = &config.series {
        columns.push(series.parameter.clone());
    }
    if let Some(sweep) = &config.sweep {
        columns.push(sweep.parameter.clone());
    }
    columns.extend(names.iter().cloned());
    let mut table = CsvTable {
        columns,
        rows: Vec::new(),
    };
    let mut worst: BTreeMap<String, f64> = BTreeMap::new();
    for ((series, x, _), outcome) in points.iter().zip(outcomes) {
        let got: Vec<&String> = outcome.summary.iter().map(|(n, _)| n).collect();
        if got.len() != names.len() || got.iter().zip(&names).any(|(a, b)| *a != b) {
            return Err(CliError::Config(
                "sweep points produced different summary columns".into(),
            ));
        }
        let mut row: Vec<Cell> = Vec::new();
        if let Some(s) = series {
            row.push(Cell::Num(*s));
        }
        row.push(Cell::Num(*x));
        row.extend(outcome.summary.iter().map(|(_, v)| Cell::Num(*v)));
        table.push(row);
        for (k, v) in outcome.diagnostics {
            let e = worst.entry(k).or_insert(v);
            if v.abs() > e.abs() {
                *e = v;
            }
        }
        for f in outcome.flags {
            if !manifest.flags.contains(&f) {
                manifest.flags.push(f);
            }
        }
        let label = match series {
            Some(s) => format!("({s}, {x})"),
            None => format!("{x}"),
        };
        manifest.failures.extend(
            outcome
                .failures
                .into_iter()
                .map(|f| format!("at {label}: {f}")),
        );
    }
    manifest.diagnostics = worst;
    manifest
        .diagnostics
        .insert("sweep_points".into(), points.len() as f64);
    Ok(table)
}

fn run_compare(cli: &Cli) -> Result<i32, CliError> {
    let start = Instant::now();
    let (config, _) = load(cli)?;
    let report = compare(&config)?;
    let routes = config
        .compare
        .as_ref()
        .map(|c| {
            c.routes
                .iter()
                .map(|m| m.name())
                .collect::<Vec<_>>()
                .join("_vs_")
        })
        .unwrap_or_default();
    let stem = config.stem(&format!("compare_{routes}"));
    let mut manifest = RunManifest::new(
        "compare",
        &format!("{stem}.csv"),
        config_json(&config),
        config.seed,
    );
    manifest.flags = report.flags.clone();
    manifest.failures = report
        .rows
        .iter()
        .filter(|r| r.verdict == crate::compare::Verdict::Fail)
        .map(|r| {
            format!(
                "{}: {} vs {} beyond {}",
                r.quantity, r.value_a, r.value_b, r.tolerance
            )
        })
        .collect();
    manifest.time("total_seconds", start.elapsed());
    if !cli.quiet {
        for r in &report.rows {
            println!(
                "{:<28} {:<14} {:>14.6e}  {:<22} {:>14.6e}  {}",
                r.quantity,
                r.route_a,
                r.value_a,
                r.route_b,
                r.value_b,
                r.verdict.label()
            );
        }
        println!("verdict: {}", if report.passed() { "PASS" } else { "FAIL" });
    }
    finish(
        cli,
        &out_dir(cli, Some(&config)),
        &stem,
        &report.table(),
        manifest,
    )
}

fn run_figure(cli: &Cli, id: &str) -> Result<i32, CliError> {
    let start = Instant::now();
    let figure: Figure = id.parse()?;
    let config = match &cli.config {
        Some(_) => Some(load(cli)?.0),
        None => None,
    };
    let data = figure_data(figure)?;
    let stem = figure.id();
    let params = serde_json::json!({ "figure": stem, "curves": data.curves });
    let mut manifest = RunManifest::new("figure-data", &format!("{stem}.csv"), params, 0);
    for c in &data.curves {
        manifest
            .diagnostics
            .insert(format!("peak[{}]", c.parameter), c.peak);
        manifest
            .diagnostics
            .insert(format!("tail_ratio[{}]", c.parameter), c.tail_ratio);
    }
    manifest.failures = data.failures.clone();
    manifest.time("total_seconds", start.elapsed());
    finish(
        cli,
        &out_dir(cli, config.as_ref()),
        stem,
        &data.table,
        manifest,
    )
}

fn selftest(cli: &Cli) -> i32 {
    let checks = run_checks();
    let mut ok = true;
    for c in &checks {
        ok &= c.passed;
        if !cli.quiet || !c.passed {
            println!(
                "{} {}: {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.detail
            );
        }
    }
    if ok {
        0
    } else {
        1
    }
}

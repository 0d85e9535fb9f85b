use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gaplab_core::error::GapError;
use gaplab_core::experiment::{self, ExperimentConfig, ScenarioConfig};
use gaplab_core::sampling::{sample_pairs, PairSampling};
use gaplab_core::sturm_liouville::gap_lower_bounds;
use gaplab_core::two_point::{check_gap_comparison, check_log_concavity, verify_modulus};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "gaplab", version, about = "Fundamental gap experiments on convex domains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every scenario and write report.json plus CSV tables.
    Run {
        config: PathBuf,
        /// Output directory; overrides the config's `output_dir`.
        #[arg(long, env = "GAPLAB_OUTPUT_DIR")]
        output: Option<PathBuf>,
    },
    /// Solve the 1D comparison problem.
    Solve1d {
        #[command(flatten)]
        target: Target,
        /// Cell count; overrides `grid.comparison_cells`.
        #[arg(long)]
        cells: Option<usize>,
    },
    /// Solve the Dirichlet problem on the domain.
    Solve2d {
        #[command(flatten)]
        target: Target,
        /// Grid spacing; overrides `grid.h`.
        #[arg(long)]
        h: Option<f64>,
    },
    /// Resolve the modulus of convexity and verify it on sampled pairs.
    Modulus {
        #[command(flatten)]
        target: Target,
    },
    /// Sharp log-concavity check of the ground state.
    Logconcavity {
        #[command(flatten)]
        target: Target,
    },
    /// Compare the gap with the comparison gap; the exit code follows the margin sign.
    Gapcheck {
        #[command(flatten)]
        target: Target,
    },
    /// Run the scenario's flows with the decay fit and both monitors.
    Flow {
        #[command(flatten)]
        target: Target,
    },
    /// Gap lower bounds from the comparison problem.
    Bounds {
        #[command(flatten)]
        target: Target,
        /// Comma-separated values in (0, 1); defaults to the scenario's `bounds_s`.
        #[arg(long, value_delimiter = ',')]
        s: Option<Vec<f64>>,
    },
}

#[derive(Args)]
struct Target {
    config: PathBuf,
    /// Scenario name; defaults to the first scenario.
    #[arg(long)]
    scenario: Option<String>,
}

enum Failure {
    Config(String),
    Module(String),
}

impl From<GapError> for Failure {
    fn from(e: GapError) -> Self {
        match e {
            GapError::Config(_) | GapError::Io(_) => Failure::Config(e.to_string()),
            _ => Failure::Module(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok((out, passed)) => {
            println!("{}", serde_json::to_string_pretty(&out).expect("serializable output"));
            ExitCode::from(if passed { 0 } else { 1 })
        }
        Err(Failure::Config(msg)) => {
            eprintln!("gaplab: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Module(msg)) => {
            eprintln!("gaplab: {msg}");
            ExitCode::from(1)
        }
    }
}

fn load(target: &Target) -> Result<(ExperimentConfig, ScenarioConfig), Failure> {
    let config = ExperimentConfig::load(&target.config)?;
    let sc = config.scenario(target.scenario.as_deref())?.clone();
    Ok((config, sc))
}

fn execute(command: Command) -> Result<(Value, bool), Failure> {
    match command {
        Command::Run { config, output } => run(&config, output),
        Command::Solve1d { target, cells } => {
            let (config, mut sc) = load(&target)?;
            if let Some(c) = cells {
                sc.grid.comparison_cells = c;
            }
            let (modulus, _) = experiment::resolve_modulus(&sc, sc.seed(config.seed))?;
            let c = experiment::solve_comparison(&sc, &modulus)?;
            Ok((
                json!({
                    "scenario": sc.name,
                    "d": c.d,
                    "cells": c.cells,
                    "lambda1": c.lambda1,
                    "lambda2": c.lambda2,
                    "gap": c.sigma,
                    "alpha_tilde": c.alpha_tilde,
                    "c_star": c.c_star,
                    "c_bar": c.c_bar,
                }),
                true,
            ))
        }
        Command::Solve2d { target, h } => {
            let (config, sc) = load(&target)?;
            let sol = experiment::solve_domain(&sc, h.unwrap_or(sc.grid.h), sc.seed(config.seed))?;
            Ok((
                json!({
                    "scenario": sc.name,
                    "h": sol.grid.h,
                    "nodes": sol.grid.len(),
                    "lambda1": sol.lambda1,
                    "lambda2": sol.lambda2,
                    "gap": sol.gap(),
                    "diagnostics": sol.diagnostics,
                }),
                true,
            ))
        }
        Command::Modulus { target } => {
            let (config, sc) = load(&target)?;
            let seed = sc.seed(config.seed);
            let (modulus, estimate) = experiment::resolve_modulus(&sc, seed)?;
            let pairs = sample_pairs(&sc.domain, &PairSampling::uniform(sc.modulus.verify_pairs, 0.0, seed.wrapping_add(2)))?;
            let report = verify_modulus(&sc.potential, &modulus, &sc.domain, &pairs, sc.tolerance.modulus);
            let passed = report.passed;
            Ok((
                json!({
                    "scenario": sc.name,
                    "modulus": modulus,
                    "estimate": estimate.map(|e| json!({"s": e.s, "envelope": e.envelope, "pair_counts": e.pair_counts})),
                    "verification": report,
                }),
                passed,
            ))
        }
        Command::Logconcavity { target } => {
            let (config, sc) = load(&target)?;
            let seed = sc.seed(config.seed);
            let (modulus, _) = experiment::resolve_modulus(&sc, seed)?;
            let comparison = experiment::solve_comparison(&sc, &modulus)?;
            let sol = experiment::solve_domain(&sc, sc.grid.h, seed)?;
            let pairs = experiment::scenario_pairs(&sc, sc.grid.h, None, seed.wrapping_add(3))?;
            let report = check_log_concavity(
                &sol,
                &comparison,
                &pairs,
                Some(sc.tolerance.collar_factor * sc.grid.h),
                sc.tolerance.budget,
            );
            let passed = report.passed;
            Ok((json!({"scenario": sc.name, "report": report}), passed))
        }
        Command::Gapcheck { target } => {
            let (config, sc) = load(&target)?;
            let seed = sc.seed(config.seed);
            let (modulus, _) = experiment::resolve_modulus(&sc, seed)?;
            let comparison = experiment::solve_comparison(&sc, &modulus)?;
            let sol = experiment::solve_domain(&sc, sc.grid.h, seed)?;
            let tol = sc.tolerance.gap_relative * comparison.lambda1.abs();
            let gap = check_gap_comparison(&sol, &comparison, &sc.bounds_s, tol)?;
            let passed = gap.passed;
            Ok((
                json!({
                    "scenario": sc.name,
                    "lambda1": sol.lambda1,
                    "lambda2": sol.lambda2,
                    "comparison_lambda1": comparison.lambda1,
                    "comparison_lambda2": comparison.lambda2,
                    "gap": gap.gap,
                    "comparison_gap": gap.comparison_gap,
                    "margin": gap.margin,
                    "tolerance": gap.tolerance,
                    "passed": passed,
                }),
                passed,
            ))
        }
        Command::Flow { target } => {
            let (config, sc) = load(&target)?;
            let flow = sc
                .flow
                .clone()
                .ok_or_else(|| Failure::Config(format!("scenario {:?} has no flow section", sc.name)))?;
            let seed = sc.seed(config.seed);
            let (modulus, _) = experiment::resolve_modulus(&sc, seed)?;
            let comparison = experiment::solve_comparison(&sc, &modulus)?;
            let sol = experiment::solve_domain(&sc, flow.h.unwrap_or(sc.grid.h), seed)?;
            let aux = experiment::auxiliary_data(&sc, &comparison, seed.wrapping_add(4))?;
            let (summary, _) = experiment::flow_stage(&sc, &flow, &comparison, &sol, &aux, seed)?;
            let decay_ok = summary.decay.relative_error().is_some_and(|r| r <= sc.tolerance.decay);
            let within = |m: &experiment::MonitorSummary| m.max_margin.is_some_and(|v| v <= m.tolerance);
            let passed = decay_ok && within(&summary.z_log_gradient) && within(&summary.z_ratio);
            Ok((json!({"scenario": sc.name, "flow": summary}), passed))
        }
        Command::Bounds { target, s } => {
            let (config, sc) = load(&target)?;
            let (modulus, _) = experiment::resolve_modulus(&sc, sc.seed(config.seed))?;
            let comparison = experiment::solve_comparison(&sc, &modulus)?;
            let table = gap_lower_bounds(&comparison, s.as_deref().unwrap_or(&sc.bounds_s))?;
            Ok((json!({"scenario": sc.name, "table": table}), true))
        }
    }
}

fn run(config_path: &Path, output: Option<PathBuf>) -> Result<(Value, bool), Failure> {
    let config = ExperimentConfig::load(config_path)?;
    let dir = output
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("gaplab-output"));
    let (report, artifacts) = experiment::run_experiment(&config);
    let metadata = experiment::metadata_for(&config_path.display().to_string(), &artifacts, &report);
    experiment::write_outputs(&dir, &report, &artifacts, &metadata)?;
    let scenarios: Vec<Value> = report
        .scenarios
        .iter()
        .map(|s| {
            json!({
                "name": s.name,
                "passed": s.passed,
                "error": s.error,
                "failed_checks": s.checks.iter().filter(|c| !c.passed).map(|c| c.check.clone()).collect::<Vec<_>>(),
            })
        })
        .collect();
    Ok((
        json!({"output_dir": dir.display().to_string(), "passed": report.passed, "scenarios": scenarios}),
        report.passed,
    ))
}

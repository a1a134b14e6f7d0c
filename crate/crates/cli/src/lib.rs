//! Command-line front end for `coud-core`.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use coud_core::optimizer::Objective;
use coud_core::CostFamily;
use thiserror::Error;

pub mod commands;
pub mod config;
pub mod output;

use config::Config;
use output::Format;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] coud_core::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// 2 for anything the caller got wrong (flags, config, parameter
    /// values), 1 for failures while computing.
    pub fn exit_code(&self) -> u8 {
        use coud_core::Error as E;
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(E::Domain { .. } | E::Unstable { .. } | E::Config(_)) => 2,
            _ => 1,
        }
    }
}

/// Outcome of a command that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    /// `validate` found a check outside its tolerance.
    ValidationFailed,
}

impl Status {
    pub fn exit_code(self) -> u8 {
        match self {
            Status::Success => 0,
            Status::ValidationFailed => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "coud",
    version,
    about = "Cost of update delay, peak cost and value of information of update for M/M/1 FCFS queues"
)]
pub struct Cli {
    /// key=value file supplying values for any flag (flags take precedence)
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form averages, bounds and validity flags
    Analytic(AnalyticArgs),
    /// Seeded simulation with batch-means confidence intervals
    Simulate(SimulateArgs),
    /// Averages over a utilization grid, or VoIU at a fixed y + t
    Sweep(SweepArgs),
    /// Optimal utilization for an objective
    Optimize(OptimizeArgs),
    /// Simulation against closed forms, with a PASS/FAIL verdict
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct QueueArgs {
    /// Service rate mu [default: 1]
    #[arg(long)]
    pub mu: Option<f64>,
    /// Arrival rate lambda
    #[arg(long, conflicts_with = "rho")]
    pub lambda: Option<f64>,
    /// Utilization rho = lambda/mu, instead of --lambda
    #[arg(long)]
    pub rho: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Cost families: linear, exp, log (comma separated) [default: all]
    #[arg(long, value_delimiter = ',')]
    pub family: Vec<CostFamily>,
    /// Cost shape parameters (comma separated), paired with every family [default: 0.1]
    #[arg(long, value_delimiter = ',')]
    pub alpha: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// csv or json [default: csv]
    #[arg(long)]
    pub format: Option<Format>,
    /// Write to this file instead of stdout
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    /// Counted updates per replication [default: 1000000]
    #[arg(long)]
    pub n: Option<usize>,
    /// Discarded leading updates [default: 10000]
    #[arg(long)]
    pub warmup: Option<usize>,
    /// Batches for confidence intervals [default: 100]
    #[arg(long)]
    pub batches: Option<usize>,
    /// Replications, seeded seed, seed + 1, ... [default: 1]
    #[arg(long)]
    pub reps: Option<usize>,
    /// Random seed
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct AnalyticArgs {
    #[command(flatten)]
    pub queue: QueueArgs,
    #[command(flatten)]
    pub models: ModelArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub queue: QueueArgs,
    #[command(flatten)]
    pub models: ModelArgs,
    #[command(flatten)]
    pub sim: SimArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Service rate mu [default: 1]
    #[arg(long)]
    pub mu: Option<f64>,
    /// Explicit utilizations (comma separated), instead of the grid
    #[arg(long, value_delimiter = ',')]
    pub rho: Vec<f64>,
    /// Grid start [default: 0.05]
    #[arg(long)]
    pub rho_lo: Option<f64>,
    /// Grid end, inclusive [default: 0.95]
    #[arg(long)]
    pub rho_hi: Option<f64>,
    /// Grid step [default: 0.05]
    #[arg(long)]
    pub rho_step: Option<f64>,
    /// coud, pcoud, voiu, bounds (comma separated) [default: all]
    #[arg(long, value_delimiter = ',')]
    pub metrics: Vec<commands::Metric>,
    #[command(flatten)]
    pub models: ModelArgs,
    /// Add simulated rows (needs --seed)
    #[arg(long)]
    pub with_sim: bool,
    #[command(flatten)]
    pub sim: SimArgs,
    /// Tabulate time drop, cost drop and VoIU at this fixed y + t instead
    #[arg(long, value_name = "TOTAL")]
    pub fixed_sum: Option<f64>,
    /// Points along the fixed sum [default: 101]
    #[arg(long)]
    pub points: Option<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    /// coud, pcoud or voiu [default: coud]
    #[arg(long)]
    pub objective: Option<Objective>,
    /// Service rate mu [default: 1]
    #[arg(long)]
    pub mu: Option<f64>,
    #[command(flatten)]
    pub models: ModelArgs,
    /// Lower end of the utilization bracket [default: 0.01]
    #[arg(long)]
    pub lo: Option<f64>,
    /// Upper end of the utilization bracket [default: 0.99]
    #[arg(long)]
    pub hi: Option<f64>,
    /// Tolerance on rho* [default: 1e-6]
    #[arg(long)]
    pub tol: Option<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Service rate mu [default: 1]
    #[arg(long)]
    pub mu: Option<f64>,
    /// Utilizations (comma separated) [default: 0.3,0.5,0.7]
    #[arg(long, value_delimiter = ',')]
    pub rho: Vec<f64>,
    #[command(flatten)]
    pub models: ModelArgs,
    #[command(flatten)]
    pub sim: SimArgs,
    /// Write the report to this file instead of stdout
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

/// Runs a parsed command line, writing results to `stdout` unless the
/// command names an output file.
pub fn run(cli: Cli, stdout: &mut dyn Write) -> Result<Status, CliError> {
    let config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    match cli.command {
        Command::Analytic(a) => {
            let path = config.pick_opt(a.output.output.clone(), "output")?;
            with_output(path, stdout, |out| commands::analytic(&a, &config, out))
        }
        Command::Simulate(a) => {
            let path = config.pick_opt(a.output.output.clone(), "output")?;
            with_output(path, stdout, |out| commands::simulate(&a, &config, out))
        }
        Command::Sweep(a) => {
            let path = config.pick_opt(a.output.output.clone(), "output")?;
            with_output(path, stdout, |out| commands::sweep(&a, &config, out))
        }
        Command::Optimize(a) => {
            let path = config.pick_opt(a.output.output.clone(), "output")?;
            with_output(path, stdout, |out| commands::optimize(&a, &config, out))
        }
        Command::Validate(a) => {
            let path = config.pick_opt(a.output.clone(), "output")?;
            with_output(path, stdout, |out| commands::validate(&a, &config, out))
        }
    }
}

fn with_output(
    path: Option<PathBuf>,
    stdout: &mut dyn Write,
    body: impl FnOnce(&mut dyn Write) -> Result<Status, CliError>,
) -> Result<Status, CliError> {
    match path {
        Some(p) => {
            let mut w = BufWriter::new(File::create(&p)?);
            let status = body(&mut w)?;
            w.flush()?;
            Ok(status)
        }
        None => {
            let status = body(stdout)?;
            stdout.flush()?;
            Ok(status)
        }
    }
}

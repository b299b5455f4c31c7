//! `ifx`: experiment harness for influence attribution and its manipulation.
//!
//! Subcommands mirror the experimental protocol: train a base model, compute
//! influence scores, run the targeted attack sweeps, the scaling attack, and
//! the fairness pipeline sweep, then aggregate reports into plot-ready CSVs.
//! Every command is deterministic under `--seed`; reports are written
//! atomically and timings live in a separate non-golden file.

mod config;
mod report;
mod runner;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::ExperimentConfig;

#[derive(Debug)]
pub enum CliError {
    /// Config schema violations: exit code 2.
    Config(String),
    /// Data and I/O problems: exit code 3.
    Data(String),
    /// Numerical failures (solver, non-convergence): exit code 4.
    Numerical(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical error: {m}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl From<influence_core::Error> for CliError {
    fn from(err: influence_core::Error) -> Self {
        use influence_core::Error as E;
        match err {
            E::Io(_) | E::Csv(_) | E::Json(_) | E::Schema { .. } => CliError::Data(err.to_string()),
            E::EmptyDataset
            | E::LabelOutOfRange { .. }
            | E::DimensionMismatch { .. }
            | E::TooFewClasses
            | E::MissingGroups
            | E::EmptyGroup { .. }
            | E::IndexOutOfBounds { .. } => CliError::Data(err.to_string()),
            E::InvalidParam { .. } => CliError::Config(err.to_string()),
            _ => CliError::Numerical(err.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "ifx",
    version,
    about = "Influence-function attribution, manipulation attacks, and the fairness reweighing pipeline"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for reports and artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides the config's master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweep cells (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Train the base model and write model.json plus the split datasets.
    Train,
    /// Compute influence scores and their ranking on the shared test set.
    Influence,
    /// Single-target attack sweep over the C grid.
    AttackTarget,
    /// Multi-target attack sweep over C grid and target-set sizes.
    AttackMulti,
    /// Scaling-attack report: accuracy invariance and rank distortion.
    AttackScale,
    /// Fairness pipeline sweep over the scaling-coefficient grid.
    Fairness,
    /// Aggregate reports into plot-ready CSV curves.
    Report {
        /// Report files produced by the other subcommands.
        #[arg(required = true)]
        reports: Vec<PathBuf>,
    },
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config PATH is required for this command".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    match &cli.command {
        Command::Train => runner::cmd_train(&load_config(cli)?, &cli.out).map(|_| ()),
        Command::Influence => runner::cmd_influence(&load_config(cli)?, &cli.out).map(|_| ()),
        Command::AttackTarget => {
            runner::cmd_attack_target(&load_config(cli)?, &cli.out).map(|_| ())
        }
        Command::AttackMulti => runner::cmd_attack_multi(&load_config(cli)?, &cli.out).map(|_| ()),
        Command::AttackScale => runner::cmd_attack_scale(&load_config(cli)?, &cli.out).map(|_| ()),
        Command::Fairness => runner::cmd_fairness(&load_config(cli)?, &cli.out).map(|_| ()),
        Command::Report { reports } => runner::cmd_report(reports, &cli.out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("ifx: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

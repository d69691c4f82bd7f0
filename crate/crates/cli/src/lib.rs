//! `pricecast` command-line driver.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration
//! error.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod config;

pub use config::{Overrides, RunConfig, OUT_ENV};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "pricecast", version, about = "Hourly electricity price forecasting")]
pub struct Cli {
    /// Worker threads (0 = all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct RunArgs {
    /// TOML run configuration.
    #[arg(long, short)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (overrides PRICECAST_OUT and the config).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Number of evaluation days.
    #[arg(long)]
    pub days: Option<usize>,
    #[arg(long)]
    pub retune_every_days: Option<usize>,
    /// Keep configured hyperparameters instead of cross-validating.
    #[arg(long)]
    pub no_tune: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load the configured panel and write descriptive statistics.
    Ingest(RunArgs),
    /// Write a synthetic panel and its ground truth.
    Synth {
        /// Run configuration with a `[data.synth]` table.
        #[arg(long, short)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        hours: Option<usize>,
        /// Add the zero-coefficient decoy predictor.
        #[arg(long)]
        decoy: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross-validate every tunable model on the window before the first
    /// evaluation day.
    Tune {
        #[command(flatten)]
        run: RunArgs,
        /// Restrict to one model id.
        #[arg(long)]
        model: Option<String>,
    },
    /// Rolling backtest with metrics and Diebold-Mariano comparisons.
    Evaluate(RunArgs),
    /// Leave-one-group-out predictor ranking.
    Sensitivity(RunArgs),
    /// Diebold-Mariano test between two forecast files.
    Dm {
        /// Benchmark forecasts.
        a: PathBuf,
        /// Forecasts tested for higher accuracy.
        b: PathBuf,
        #[arg(long)]
        model_a: Option<String>,
        #[arg(long)]
        model_b: Option<String>,
        /// Output directory for dm.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

impl RunArgs {
    pub fn overrides(&self, jobs: Option<usize>) -> Overrides {
        Overrides {
            seed: self.seed,
            out_dir: self.out.clone(),
            jobs,
            days: self.days,
            retune_every_days: self.retune_every_days,
            no_tune: self.no_tune,
        }
    }

    pub fn load(&self, jobs: Option<usize>) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::load(&self.config)?;
        cfg.apply(&self.overrides(jobs));
        Ok(cfg)
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let jobs = cli.jobs;
    match cli.command {
        Command::Ingest(a) => commands::ingest(&a.load(jobs)?),
        Command::Synth {
            config,
            seed,
            hours,
            decoy,
            out,
        } => commands::synth(config.as_deref(), seed, hours, decoy, out),
        Command::Tune { run, model } => commands::tune(&run.load(jobs)?, model.as_deref()),
        Command::Evaluate(a) => commands::evaluate(&a.load(jobs)?),
        Command::Sensitivity(a) => commands::sensitivity(&a.load(jobs)?),
        Command::Dm {
            a,
            b,
            model_a,
            model_b,
            out,
        } => commands::dm(&a, &b, model_a.as_deref(), model_b.as_deref(), out),
    }
}

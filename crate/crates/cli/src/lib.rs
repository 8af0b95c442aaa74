//! The `blmol` command-line tool.
//!
//! Runs are staged: `sample` trains sampled genotypes, `fit` selects one
//! surrogate per objective, `search` evolves an archive against the
//! surrogates and `realize` retrains chosen archive members. Each stage
//! reads the previous stage's files from the run directory and records
//! hashes of everything it read and wrote in `meta.json`.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod error;
pub mod problem;
pub mod report;
pub mod selftest;

pub use commands::{Run, StageOptions};
pub use config::RunConfig;
pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "blmol", version, about = "Surrogate-assisted bi-level multi-objective search")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct StageArgs {
    /// Run configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Root seed; overrides the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Run directory; overrides the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Skip the stage when its recorded inputs and outputs are unchanged.
    #[arg(long)]
    pub resume: bool,
}

impl StageArgs {
    fn options(&self) -> StageOptions {
        StageOptions { config: self.config.clone(), seed: self.seed, out: self.out.clone(), resume: self.resume }
    }
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Report configuration with the reference point (JSON).
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Directory for report.csv, hv.csv and hv_median.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run directories to aggregate.
    pub runs: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic graph dataset and its manifest.
    GenData(StageArgs),
    /// Train sampled genotypes and write samples.csv.
    Sample(StageArgs),
    /// Select surrogates by cross-validation.
    Fit(StageArgs),
    /// Evolve an archive against the surrogates.
    Search(StageArgs),
    /// Retrain chosen archive members.
    Realize(StageArgs),
    /// Random search, or a full BLMOL-I / BLMOL-WS run.
    Baseline(StageArgs),
    /// Aggregate run directories into plot-ready tables.
    Report(ReportArgs),
    /// Quick built-in correctness checks.
    Selftest(SelftestArgs),
}

impl Command {
    fn jobs(&self) -> Option<usize> {
        match self {
            Command::GenData(a)
            | Command::Sample(a)
            | Command::Fit(a)
            | Command::Search(a)
            | Command::Realize(a)
            | Command::Baseline(a) => a.jobs,
            Command::Report(a) => a.jobs,
            Command::Selftest(a) => a.jobs,
        }
    }
}

fn dispatch(command: &Command) -> CliResult<()> {
    match command {
        Command::GenData(a) => commands::gen_data(&a.options()),
        Command::Sample(a) => Run::open(&a.options())?.sample(),
        Command::Fit(a) => Run::open(&a.options())?.fit(),
        Command::Search(a) => Run::open(&a.options())?.search(),
        Command::Realize(a) => Run::open(&a.options())?.realize(),
        Command::Baseline(a) => Run::open(&a.options())?.baseline(),
        Command::Report(a) => report::cmd_report(&a.config, &a.runs, a.out.as_deref()),
        Command::Selftest(_) => selftest::selftest(),
    }
}

/// Executes a parsed command inside a worker pool of the requested size.
pub fn run(cli: &Cli) -> CliResult<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = cli.command.jobs() {
        if jobs == 0 {
            return Err(CliError::config("--jobs must be positive"));
        }
        builder = builder.num_threads(jobs);
    }
    let pool = builder.build().map_err(|e| CliError::other(e.to_string()))?;
    pool.install(|| dispatch(&cli.command))
}

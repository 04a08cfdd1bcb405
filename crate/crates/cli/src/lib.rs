//! Command-line driver: synthetic data generation, splits, training,
//! cross-validated evaluation and output-feature correlation analysis.
//!
//! Every command writes a `run.json` provenance record next to its outputs.

pub mod checkpoint;
mod commands;
pub mod config;
pub mod provenance;

use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};
use skillpath_core::data::SplitScheme;
use skillpath_core::model::PathSet;
use skillpath_core::Execution;

pub use commands::{parse_channels, ChannelSpec};

#[derive(Debug, Parser)]
#[command(
    name = "skillpath",
    version,
    about = "Multi-path temporal skill assessment"
)]
pub struct Cli {
    /// Worker threads; 1 runs everything on the calling thread.
    #[arg(long, default_value_t = 1, global = true)]
    pub jobs: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset with a planted skill variable.
    Generate(GenerateArgs),
    /// Assign trials to cross-validation folds.
    Splits(SplitsArgs),
    /// Train one model and save a checkpoint.
    Train(TrainArgs),
    /// Cross-validate and report rank correlations.
    Eval(EvalArgs),
    /// Correlate weighted score sequences with feature channels.
    Analyze(AnalyzeArgs),
}

fn parse_paths(s: &str) -> Result<PathSet, String> {
    s.parse().map_err(|e: skillpath_core::Error| e.to_string())
}

fn parse_scheme(s: &str) -> Result<SplitScheme, String> {
    s.parse().map_err(|e: skillpath_core::Error| e.to_string())
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Write into a non-empty directory.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct SplitsArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// `kfold:K` or `louo`.
    #[arg(long, value_parser = parse_scheme, default_value = "kfold:4")]
    pub scheme: SplitScheme,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory receiving `splits.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    /// Split plan; with `--fold`, trains on the trials outside that fold.
    #[arg(long)]
    pub splits: Option<PathBuf>,
    #[arg(long)]
    pub fold: Option<usize>,
    /// Override the configured active paths, e.g. `VTE`.
    #[arg(long, value_parser = parse_paths)]
    pub paths: Option<PathSet>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub splits: PathBuf,
    #[arg(long, value_parser = parse_paths)]
    pub paths: Option<PathSet>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    /// Comma-separated `PATH:INDEX` feature channels or `noise`.
    #[arg(long, default_value = "")]
    pub channels: String,
    /// Paths whose weighted scores enter the average; defaults to all model paths.
    #[arg(long, value_parser = parse_paths)]
    pub paths: Option<PathSet>,
    /// Seed of the noise channel.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Runs `f` on a pool of `jobs` threads, or inline when `jobs` is 1.
fn with_jobs<T>(jobs: usize, f: impl FnOnce(Execution) -> Result<T> + Send) -> Result<T>
where
    T: Send,
{
    if jobs == 0 {
        bail!("--jobs must be at least 1");
    }
    if jobs == 1 {
        return f(Execution::Sequential);
    }
    #[cfg(feature = "parallel")]
    {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
        pool.install(|| f(Execution::Parallel))
    }
    #[cfg(not(feature = "parallel"))]
    {
        log::warn!("built without the parallel feature; ignoring --jobs {jobs}");
        f(Execution::Sequential)
    }
}

pub fn run(cli: Cli) -> Result<()> {
    with_jobs(cli.jobs, |exec| match &cli.command {
        Command::Generate(a) => commands::generate(a, exec),
        Command::Splits(a) => commands::splits(a),
        Command::Train(a) => commands::train_cmd(a, exec),
        Command::Eval(a) => commands::eval(a, exec),
        Command::Analyze(a) => commands::analyze(a, exec),
    })
}

/// Parses `args` (program name first) and runs the command.
pub fn run_from<I, S>(args: I) -> Result<()>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    run(Cli::try_parse_from(args)?)
}

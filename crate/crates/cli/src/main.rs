mod commands;
mod tables;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Find the most anomalous subgroup of a cohort and explain it.
#[derive(Debug, Parser)]
#[command(name = "postscan", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Scan for the highest-scoring subset and estimate its p-value.
    Scan(CommonArgs),
    /// Rank the feature values of a scanned subset by relevance.
    Rank(RankArgs),
    /// Score every single substitution of the scanned subset.
    Substitute(SubstituteArgs),
    /// Scan, rank, sweep substitutions and run the greedy search.
    Pipeline(CommonArgs),
    /// Write a synthetic cohort with a planted subgroup.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Cohort CSV file.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Name of the binary outcome column.
    #[arg(long)]
    pub outcome: Option<String>,
    /// Accept true/false as outcome values.
    #[arg(long)]
    pub boolean_outcomes: bool,
    /// Random restarts per scan.
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Bootstrap replicates for empirical p-values.
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Significance level.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (0 = one per core).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// TOML configuration file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct RankArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Scan report to explain (default: <out>/scan.json).
    #[arg(long)]
    pub scan_report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SubstituteArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Scan report (default: <out>/scan.json).
    #[arg(long)]
    pub scan_report: Option<PathBuf>,
    /// Relevance ranking (default: <out>/relevance.json, computed if absent).
    #[arg(long)]
    pub relevance: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub records: Option<usize>,
    /// Comma-separated feature cardinalities, e.g. `2,3,4,5,2`.
    #[arg(long)]
    pub cardinalities: Option<String>,
    #[arg(long)]
    pub base_rate: Option<f64>,
    #[arg(long)]
    pub odds_multiplier: Option<f64>,
    /// Planted descriptor as `feature=v1,v2;feature=v` with 0-based indices.
    #[arg(long)]
    pub planted: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Outcome column name in the written CSV.
    #[arg(long)]
    pub outcome: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// TOML file with the same keys as the flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Scan(args) => commands::scan(&args),
        Command::Rank(args) => commands::rank(&args),
        Command::Substitute(args) => commands::substitute(&args),
        Command::Pipeline(args) => commands::pipeline(&args),
        Command::Synth(args) => commands::synth(&args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

/// 3 for constant outcomes, 2 for every other failure.
fn exit_code(err: &anyhow::Error) -> u8 {
    let degenerate = err
        .chain()
        .filter_map(|e| e.downcast_ref::<postscan::Error>())
        .any(postscan::Error::is_degenerate);
    if degenerate {
        3
    } else {
        2
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use universality_cli::{execute, CommandKind, Overrides};

/// Constructive universality for Dirichlet series with Euler products.
#[derive(Debug, Parser)]
#[command(name = "universality", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate the order (λ, Λ) of each series from band moments.
    OrderEstimate(Common),
    /// Band sums Σ a(p) conj(b(p))/p for pairs of series.
    Orthogonality(Common),
    /// Build a twist ω steering log L (or the prime sum) to the targets.
    Steer(Common),
    /// Search real shifts t with p^{it} close to prescribed phases.
    FindShift(Common),
    /// Check log L against the targets in twist or shift mode.
    Verify(Common),
    /// Reduce series with multiplier and additive parts to pure products.
    PlanTh1(Common),
    /// Tile a strip and count zeros of Σ a_k L_k by winding numbers.
    Zeros(Common),
    /// Fit a Laplace representation to sampled values.
    FitTarget(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config prime ceiling.
    #[arg(long)]
    prime_ceiling: Option<u64>,
    /// Directory for the report and CSV files.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, common) = match cli.command {
        Command::OrderEstimate(c) => (CommandKind::OrderEstimate, c),
        Command::Orthogonality(c) => (CommandKind::Orthogonality, c),
        Command::Steer(c) => (CommandKind::Steer, c),
        Command::FindShift(c) => (CommandKind::FindShift, c),
        Command::Verify(c) => (CommandKind::Verify, c),
        Command::PlanTh1(c) => (CommandKind::PlanTh1, c),
        Command::Zeros(c) => (CommandKind::Zeros, c),
        Command::FitTarget(c) => (CommandKind::FitTarget, c),
    };
    let overrides = Overrides {
        seed: common.seed,
        prime_ceiling: common.prime_ceiling,
        threads: common.threads,
    };
    ExitCode::from(execute(kind, &common.config, &overrides, &common.out))
}

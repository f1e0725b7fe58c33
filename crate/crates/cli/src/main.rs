//! `dpfdr` command-line interface.

mod commands;

use std::hash::{BuildHasher, RandomState};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "dpfdr", version, about = "Differentially private FDR control and FDR_k experiments")]
struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Master seed; drawn from entropy when absent. Always echoed to stderr.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// BHq step-up or step-down on a CSV of p-values.
    Bhq(BhqArgs),
    /// PrivateBHq on a dataset CSV.
    PrivateBhq(PrivateBhqArgs),
    /// Calibrated noise scale and the γ cutoff table for a privacy budget.
    Budget(BudgetArgs),
    /// Monte Carlo estimates of C_k (or C_k^(n) with --finite).
    CkEstimate(CkArgs),
    /// FDR_k simulation over a parameter grid.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    StepUp,
    StepDown,
}

#[derive(Debug, Args)]
struct BhqArgs {
    /// CSV with a `p` column and an optional `is_null` column (0/1).
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    q: f64,
    #[arg(long, value_enum, default_value = "step-up")]
    mode: Mode,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PrivateBhqArgs {
    /// Dataset CSV: header line `n,m,binary` or `n,m,bounded,A`, then n rows.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_parser = ["binomial", "truncexp"])]
    test: String,
    #[arg(long)]
    epsilon: f64,
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    mprime: usize,
    #[arg(long)]
    q: f64,
    /// Truncation floor; defaults to m^(-1.5).
    #[arg(long)]
    nu: Option<f64>,
    /// Calibrate for this η instead of the scanned sensitivity (must not be smaller).
    #[arg(long)]
    eta: Option<f64>,
    /// Run at the inflated level q' used for the power comparison.
    #[arg(long)]
    inflate: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BudgetArgs {
    #[arg(long)]
    epsilon: f64,
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    mprime: usize,
    #[arg(long)]
    eta: f64,
    #[arg(long, default_value_t = 0.1)]
    q: f64,
    /// Number of hypotheses used for the γ table.
    #[arg(long, default_value_t = 100)]
    m: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CkArgs {
    #[arg(long, value_delimiter = ',', default_value = "2,3,4,5,10,25")]
    k: Vec<usize>,
    #[arg(long, default_value_t = 10_000)]
    reps: usize,
    #[arg(long, default_value_t = 100_000)]
    jmax: usize,
    /// Estimate C_k^(n) for n uniform order statistics instead.
    #[arg(long)]
    finite: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, value_parser = ["normal", "student", "block", "adversarial"])]
    example: String,
    /// Hypotheses (blocks for `block`).
    #[arg(long)]
    m: usize,
    /// Non-null counts for `normal` and `student`.
    #[arg(long, value_delimiter = ',')]
    m1: Vec<usize>,
    /// Correlations for `block`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    rho: Vec<f64>,
    /// True-null counts for `adversarial`.
    #[arg(long, value_delimiter = ',')]
    m0: Vec<usize>,
    #[arg(long, default_value_t = 0.1)]
    q: f64,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    #[arg(long, value_parser = ["one", "two"], default_value = "one")]
    alternative: String,
    /// Non-null mean (default 2, or 1.5 for `block`).
    #[arg(long)]
    mu: Option<f64>,
    /// Observations per coordinate for `student`.
    #[arg(long, default_value_t = 10)]
    n: usize,
    #[arg(long, value_delimiter = ',', default_value = "1,2,5")]
    k: Vec<usize>,
    /// Adversarial replicates whose maximiser is infeasible.
    #[arg(long, value_parser = ["exclude", "best-feasible"], default_value = "exclude")]
    infeasible: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn entropy_seed() -> u64 {
    RandomState::new().hash_one(std::time::SystemTime::now())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let seed = cli.seed.unwrap_or_else(entropy_seed);
    eprintln!("seed: {seed}");

    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: cannot start thread pool: {e}");
            return ExitCode::from(1);
        }
    }

    match commands::run(cli.command, seed) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}

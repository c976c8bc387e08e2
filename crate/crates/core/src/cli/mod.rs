//! The `rctopo` command line.
//!
//! Every subcommand starts from a [`RunConfig`] (defaults, or a TOML file via
//! `--config`), applies flag overrides, and writes a `manifest.json` with the
//! resolved configuration next to its outputs.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod sweep;

pub use config::RunConfig;
use config::{GammaSetting, InputKind, Method, NoiseKind};

#[derive(Debug, Parser)]
#[command(name = "rctopo", version, about = "Simulate RC thermal networks and recover their topology")]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a temperature panel and write it as CSV.
    Simulate(SimulateArgs),
    /// Learn the topology from a panel CSV.
    Learn(LearnArgs),
    /// Run the regression or graphical-lasso baseline on a panel CSV.
    Baseline(BaselineArgs),
    /// Error-versus-samples sweep over methods, input types and seeds.
    Sweep(SweepArgs),
    /// Exact filter magnitude and phase for one node pair.
    Oracle(OracleArgs),
    /// Score an estimate file against a network's true edges.
    Eval(EvalArgs),
}

#[derive(Debug, Args, Default)]
pub struct NetworkArgs {
    /// Network file, or builtin:five-zone, builtin:two-zone, builtin:chain3.
    #[arg(long, value_name = "REF")]
    pub network: Option<String>,
    /// Sampling interval.
    #[arg(long)]
    pub dt: Option<f64>,
}

#[derive(Debug, Args, Default)]
pub struct NoiseArgs {
    #[arg(long, value_enum)]
    pub noise: Option<NoiseKind>,
    /// White-noise variance per node.
    #[arg(long)]
    pub variance: Option<f64>,
    /// AR(1) pole for --noise ar1.
    #[arg(long)]
    pub ar_coefficient: Option<f64>,
    /// Comma-separated FIR taps for --noise fir.
    #[arg(long, value_delimiter = ',')]
    pub fir_taps: Option<Vec<f64>>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args, Default)]
pub struct LearnParamArgs {
    /// Largest filter lag F.
    #[arg(long)]
    pub lag_order: Option<usize>,
    /// L1 penalty, or "auto" for the sample-size rule.
    #[arg(long)]
    pub gamma: Option<GammaSetting>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    /// Relative magnitude below which phase is ignored.
    #[arg(long)]
    pub magnitude_floor: Option<f64>,
    #[arg(long)]
    pub grid_points: Option<usize>,
}

#[derive(Debug, Args, Default)]
pub struct BaselineParamArgs {
    #[arg(long)]
    pub regression_gamma: Option<f64>,
    #[arg(long)]
    pub glasso_lambda: Option<f64>,
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub network: NetworkArgs,
    #[command(flatten)]
    pub noise: NoiseArgs,
    /// Retained samples per node.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LearnArgs {
    /// Panel CSV (header of node labels, one row per step).
    #[arg(long)]
    pub panel: PathBuf,
    /// Network whose edges score the estimate.
    #[arg(long, value_name = "REF")]
    pub truth: Option<String>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[command(flatten)]
    pub params: LearnParamArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum BaselineMethod {
    Regression,
    Glasso,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[arg(long)]
    pub panel: PathBuf,
    #[arg(long, value_enum)]
    pub method: BaselineMethod,
    #[arg(long, value_name = "REF")]
    pub truth: Option<String>,
    #[command(flatten)]
    pub params: BaselineParamArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub network: NetworkArgs,
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',')]
    pub samples: Option<Vec<usize>>,
    /// Seeds 0..trials, unless --seeds is given.
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long, value_delimiter = ',', value_enum)]
    pub methods: Option<Vec<Method>>,
    #[arg(long, value_delimiter = ',', value_enum)]
    pub inputs: Option<Vec<InputKind>>,
    #[arg(long)]
    pub ar_coefficient: Option<f64>,
    #[arg(long)]
    pub variance: Option<f64>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    pub workers: Option<usize>,
    #[command(flatten)]
    pub params: LearnParamArgs,
    #[command(flatten)]
    pub baseline: BaselineParamArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub network: NetworkArgs,
    #[command(flatten)]
    pub noise: NoiseArgs,
    /// Ordered pair TARGET,SOURCE of node labels.
    #[arg(long, value_delimiter = ',', num_args = 1, required = true)]
    pub pair: Vec<String>,
    #[arg(long)]
    pub grid_points: Option<usize>,
    /// Write oracle.csv, conditions.json and manifest.json here instead of
    /// printing the table.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// estimate.json from `learn` or baseline.json from `baseline`.
    #[arg(long)]
    pub estimate: PathBuf,
    #[arg(long, value_name = "REF")]
    pub truth: Option<String>,
}

/// Parses arguments, runs the command and maps the outcome to an exit code:
/// 0 on success, 1 on a run error, 2 on a usage error.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

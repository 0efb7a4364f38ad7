//! Command-line entry point: simulate | fit | analyze | synth | verify.
//!
//! Exit codes: 0 success, 2 data/config error, 3 internal invariant
//! violation (including failed verification), 64 usage.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use prodeq::sim::SimError;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Invariant(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Invariant(m) => write!(f, "{m}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 64,
            CliError::Data(_) => 2,
            CliError::Invariant(_) => 3,
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Invariant(m) => CliError::Invariant(m),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "prodeq",
    version,
    about = "Labor-productivity equilibrium toolkit: exchange-chain simulator, \
             occupancy-law fitter, and firm-data binning pipeline"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the paired-exchange chain and emit occupancy and flux reports
    Simulate(SimulateArgs),
    /// Fit the four-parameter occupancy law to a binned curve CSV
    Fit(FitArgs),
    /// Clean firm records and emit densities and the mean-workers curve
    Analyze(AnalyzeArgs),
    /// Generate synthetic curves or firm populations
    Synth(SynthArgs),
    /// Run self-verification suites
    Verify(VerifyArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Flat key=value configuration file (flags take precedence)
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Re-run with the resolved configuration of a previous manifest
    #[arg(long, value_name = "MANIFEST")]
    from_manifest: Option<PathBuf>,
    /// Output directory (created if missing)
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Number of productivity levels
    #[arg(long)]
    levels: Option<usize>,
    /// Grid spacing (productivity per level)
    #[arg(long)]
    dc: Option<f64>,
    /// Total workers
    #[arg(long)]
    workers: Option<u64>,
    /// Conserved output in index units (defaults to the grid midpoint)
    #[arg(long)]
    output_index: Option<u64>,
    /// Proposal count; accepts scientific notation like 1e7
    #[arg(long)]
    steps: Option<String>,
    /// Proposals discarded before measurement (default steps / 10)
    #[arg(long)]
    burn_in: Option<String>,
    /// Measurement stride
    #[arg(long)]
    sample_every: Option<String>,
    /// 64-bit RNG seed (ChaCha8); required
    #[arg(long)]
    seed: Option<u64>,
    /// Limiter: linear | unbounded
    #[arg(long)]
    limiter: Option<String>,
    /// Capacity amplitude A (linear limiter)
    #[arg(long)]
    amplitude: Option<f64>,
    /// Capacity exponent gamma (linear limiter)
    #[arg(long)]
    gamma: Option<f64>,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Input curve CSV (c_center,n_mean,weight)
    #[arg(long, value_name = "FILE")]
    curve: Option<PathBuf>,
    /// Also write the fitted model sampled at the input bin centers
    #[arg(long)]
    emit_curve: bool,
    /// Simplex-diameter convergence tolerance
    #[arg(long)]
    tol: Option<f64>,
    /// Objective-evaluation budget per start
    #[arg(long)]
    max_evals: Option<u64>,
    /// Comma-separated beta starts
    #[arg(long)]
    beta_starts: Option<String>,
    /// Comma-separated gamma starts
    #[arg(long)]
    gamma_starts: Option<String>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Input firm-record CSV
    #[arg(long, value_name = "FILE")]
    records: Option<PathBuf>,
    /// Lower edge of the log binning
    #[arg(long)]
    c_min: Option<f64>,
    /// Upper bound of the log binning
    #[arg(long)]
    c_max: Option<f64>,
    #[arg(long)]
    bins_per_decade: Option<u32>,
    /// Comma-separated sectors to drop; pass "" to keep everything
    #[arg(long)]
    exclude_sectors: Option<String>,
    /// Multiplier applied to monetary columns at parse time
    #[arg(long)]
    units_scale: Option<f64>,
    /// Chain the mean-workers curve into the fitter
    #[arg(long)]
    fit: bool,
}

#[derive(Args)]
struct SynthArgs {
    #[command(subcommand)]
    kind: SynthKind,
}

#[derive(Subcommand)]
enum SynthKind {
    /// Synthetic binned curve from the occupancy law
    Curve(SynthCurveArgs),
    /// Synthetic firm population with model-distributed worker counts
    Firms(SynthFirmsArgs),
}

#[derive(Args)]
struct SynthCurveArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    mu: Option<f64>,
    #[arg(long)]
    amplitude: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    c_min: Option<f64>,
    #[arg(long)]
    c_max: Option<f64>,
    /// Number of log-spaced bins
    #[arg(long)]
    bins: Option<u64>,
    /// Multiplicative log-normal noise sigma
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SynthFirmsArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    mu: Option<f64>,
    #[arg(long)]
    amplitude: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Number of firms
    #[arg(long)]
    count: Option<String>,
    #[arg(long)]
    c_min: Option<f64>,
    #[arg(long)]
    c_max: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    year: Option<i32>,
    #[arg(long)]
    sector: Option<String>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Suite: closed-form | balance | roundtrip | all
    suite: String,
    /// Output directory for the machine-readable report
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 64,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Simulate(args) => commands::simulate(args),
        Command::Fit(args) => commands::fit(args),
        Command::Analyze(args) => commands::analyze(args),
        Command::Synth(args) => match args.kind {
            SynthKind::Curve(args) => commands::synth_curve(args),
            SynthKind::Firms(args) => commands::synth_firms(args),
        },
        Command::Verify(args) => commands::verify(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

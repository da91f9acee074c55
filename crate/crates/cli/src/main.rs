mod commands;
mod config;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

pub const SIMULATE_USAGE: &str = "Usage: dmri simulate --shape AxBxC --out DIR [--seed N] [--config FILE]";

/// Failure classes, each with its own exit status.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags, config or input files.
    Usage(String),
    /// Scenario construction failed.
    Simulation(String),
    /// A reconstruction failed.
    Solver(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Simulation(_) => 3,
            Failure::Solver(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Simulation(m) | Failure::Solver(m) => m,
        }
    }
}

#[derive(Parser)]
#[command(name = "dmri", version, about = "Joint rigid + deformation estimation from a reference image and sub-sampled k-space")]
struct Cli {
    /// Worker threads; defaults to every core.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a ground-truth scenario directory.
    Simulate(SimulateArgs),
    /// Write a variable-density sampling mask.
    Mask(MaskArgs),
    /// Reconstruct the follow-up image with one method.
    Reconstruct(ReconstructArgs),
    /// Normalized error of an estimate against a scenario.
    Evaluate(EvaluateArgs),
    /// Error against sampling percentage for several methods and seeds.
    Sweep(SweepArgs),
}

#[derive(Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Grid as AxB or AxBxC.
    #[arg(long)]
    pub shape: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Rotation angles in degrees, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    pub theta_deg: Option<String>,
    /// Translation in voxels, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    pub t: Option<String>,
    /// Reference noise as a fraction of the mean foreground intensity.
    #[arg(long)]
    pub noise_frac: Option<f64>,
    /// Use a zero deformation field.
    #[arg(long)]
    pub no_dvf: bool,
    /// No motion, no deformation, no noise.
    #[arg(long)]
    pub identity: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct MaskArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub shape: String,
    /// Percentage of k-space to keep, in (0, 100].
    #[arg(long)]
    pub pct: f64,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct ReconstructArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Scenario directory written by `simulate`.
    #[arg(long)]
    pub scenario: PathBuf,
    /// delta, tcs or zidft.
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub pct: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Treat the reference as already aligned (tcs only).
    #[arg(long)]
    pub aligned: bool,
    /// Rigid estimate from a delta run (tcs only); defaults to OUT/rigid.json.
    #[arg(long)]
    pub rigid: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Magnitude estimate of the follow-up image (.dmri).
    #[arg(long)]
    pub estimate: PathBuf,
}

#[derive(Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub scenario: PathBuf,
    /// Comma-separated sampling percentages.
    #[arg(long)]
    pub pcts: Option<String>,
    /// Comma-separated methods.
    #[arg(long)]
    pub methods: Option<String>,
    /// Comma-separated mask seeds.
    #[arg(long)]
    pub seeds: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

fn set_jobs(jobs: Option<usize>) -> Result<(), Failure> {
    let Some(n) = jobs else { return Ok(()) };
    if n == 0 {
        return Err(Failure::Usage("--jobs must be at least 1".into()));
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Usage(format!("cannot size the thread pool: {e}")))?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = set_jobs(cli.jobs).and_then(|_| match cli.command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::Mask(a) => commands::mask(&a),
        Command::Reconstruct(a) => commands::reconstruct(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Sweep(a) => commands::sweep(&a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

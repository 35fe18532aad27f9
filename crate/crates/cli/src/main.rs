//! `gdl`: batch front-end for global-sparsity dictionary learning.
//!
//! Exit status is 0 on success, 2 for invalid flags and 1 for runtime
//! failures. Progress goes to standard error; results only to files.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "gdl",
    version,
    about = "Dictionary learning under a global sparsity budget"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Learn dictionaries from synthetic signals and track recovery.
    SynthBench(SynthBenchArgs),
    /// Learn a dictionary from signals stored as CSV columns.
    Learn(LearnArgs),
    /// Corrupt an image, denoise it patch-wise and report PSNR.
    Denoise(DenoiseArgs),
    /// Corrupt an image.
    Noise(NoiseArgs),
    /// Write the overcomplete DCT dictionary.
    DctDict(DctDictArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LearnMethod {
    Gdl,
    Ksvd,
    Mod,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DenoiseMethodArg {
    Gdl,
    Ksvd,
    Dct,
}

#[derive(Debug, Args)]
pub struct SynthBenchArgs {
    /// 1: exactly 3 nonzeros per signal; 2: 4500 nonzeros placed anywhere.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub series: u8,
    /// Comma-separated noise deviations.
    #[arg(long, value_delimiter = ',', required = true)]
    pub sigma_list: Vec<f64>,
    #[arg(long, value_enum)]
    pub method: LearnMethod,
    /// Global budget for `gdl`.
    #[arg(long = "K", default_value_t = 4500)]
    pub budget: usize,
    /// Per-signal sparsity for `ksvd` and `mod`.
    #[arg(long = "k", default_value_t = 3)]
    pub k: usize,
    #[arg(long, default_value_t = 100)]
    pub iters: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Record wall-clock seconds (makes outputs differ between runs).
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct LearnArgs {
    /// Headerless CSV, one signal per column.
    #[arg(long)]
    pub signals: PathBuf,
    #[arg(long, value_enum)]
    pub method: LearnMethod,
    #[arg(long)]
    pub atoms: usize,
    /// Global budget, required for `gdl`.
    #[arg(long = "K")]
    pub budget: Option<usize>,
    /// Per-signal sparsity, required for `ksvd` and `mod`.
    #[arg(long = "k")]
    pub k: Option<usize>,
    #[arg(long, default_value_t = 100)]
    pub iters: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub timing: bool,
}

/// Noise model chosen by which flags are present: `--delta` ramps the
/// Gaussian deviation over the image, `--sigma` keeps it constant, `--p`
/// adds dead pixels.
#[derive(Debug, Clone, Args)]
pub struct NoiseFlags {
    /// Gaussian deviation at the upper-left pixel, falling to 0 at the
    /// lower-right one.
    #[arg(long, conflicts_with = "sigma")]
    pub delta: Option<f64>,
    /// Homogeneous Gaussian deviation.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Percentage of pixels set to 0 or 255.
    #[arg(long)]
    pub p: Option<f64>,
}

#[derive(Debug, Args)]
pub struct DenoiseArgs {
    /// Clean PGM image; noise is added before denoising.
    #[arg(long)]
    pub image: PathBuf,
    #[command(flatten)]
    pub noise: NoiseFlags,
    #[arg(long, value_enum)]
    pub method: DenoiseMethodArg,
    #[arg(long = "K", default_value_t = 15_000)]
    pub budget: usize,
    /// Per-patch sparsity for `ksvd`.
    #[arg(long = "k", default_value_t = 1)]
    pub k: usize,
    #[arg(long, default_value_t = 256)]
    pub atoms: usize,
    #[arg(long, default_value_t = 10)]
    pub iters: usize,
    #[arg(long, default_value_t = 8)]
    pub patch_side: usize,
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct NoiseArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[command(flatten)]
    pub noise: NoiseFlags,
    #[arg(long)]
    pub seed: u64,
    /// Output PGM; values are clipped to [0, 255] and rounded.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DctDictArgs {
    #[arg(long, default_value_t = 8)]
    pub patch_side: usize,
    #[arg(long, default_value_t = 16)]
    pub atoms_per_dim: usize,
    /// Output CSV, one atom per column.
    #[arg(long)]
    pub out: PathBuf,
}

/// Failure of a subcommand, mapped to an exit status.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(gdl_core::Error),
}

impl From<gdl_core::Error> for CliError {
    fn from(e: gdl_core::Error) -> Self {
        CliError::Runtime(e)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let outcome = match cli.command {
        Command::SynthBench(a) => commands::synth_bench(&a),
        Command::Learn(a) => commands::learn(&a),
        Command::Denoise(a) => commands::denoise(&a),
        Command::Noise(a) => commands::noise(&a),
        Command::DctDict(a) => commands::dct_dict(&a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

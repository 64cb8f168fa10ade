//! `prva`: characterize GFET curves, simulate the circuit cascade, run
//! wavelet reconstructions and Monte Carlo integration benchmarks.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod error;
mod manifest;
mod svg;

use config::ExperimentConfig;
use error::CliResult;

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_OUT: &str = "prva-out";

#[derive(Debug, Parser)]
#[command(name = "prva", version, about = "GFET random variate accelerator simulator")]
struct Cli {
    /// Base seed for every random stream
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// TOML config file; flags override its values
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Also emit SVG plots
    #[arg(long, global = true)]
    svg: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate and summarize a transfer-curve library
    Characterize(commands::characterize::Args),
    /// Push uniform gate noise through a GFET cascade
    Simulate(commands::simulate::Args),
    /// Reconstruct a histogram from its largest wavelet coefficients
    Wavelet(commands::wavelet::Args),
    /// Monte Carlo integration error and timing sweeps
    Mcbench(commands::mcbench::Args),
}

/// Settings shared by every subcommand after merging flags and config.
#[derive(Debug, Clone)]
pub struct Globals {
    pub seed: u64,
    pub out: PathBuf,
    pub svg: bool,
}

fn run(cli: Cli) -> CliResult<()> {
    let cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let globals = Globals {
        seed: cli.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED),
        out: cli.out.or(cfg.out).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
        svg: cli.svg || cfg.svg.unwrap_or(false),
    };
    match cli.command {
        Command::Characterize(args) => commands::characterize::run(&globals, cfg.characterize, args),
        Command::Simulate(args) => commands::simulate::run(&globals, cfg.simulate, args),
        Command::Wavelet(args) => commands::wavelet::run(&globals, cfg.wavelet, args),
        Command::Mcbench(args) => commands::mcbench::run(&globals, cfg.mcbench, args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("prva: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

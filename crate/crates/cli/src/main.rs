//! `semvox` — experiment runner: simulate datasets, fuse them into semantic
//! voxel maps, and evaluate against ground truth.
//!
//! Exit codes: 0 success, 2 invalid config or usage, 3 I/O failure,
//! 4 malformed frame, 5 frame order violation, 6 label mismatch,
//! 7 empty ground truth, 8 invalid scene or trajectory, 1 anything else.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

mod commands;
mod config;
mod io;

use config::ExperimentConfig;
use semvox::fusion::FusionStrategy;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("malformed frame: {0}")]
    MalformedFrame(String),
    #[error("order violation: {0}")]
    OrderViolation(String),
    #[error("label mismatch: {0}")]
    LabelMismatch(String),
    #[error("ground truth is empty")]
    EmptyGroundTruth,
    #[error("invalid scene: {0}")]
    Scene(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::MalformedFrame(_) => 4,
            CliError::OrderViolation(_) => 5,
            CliError::LabelMismatch(_) => 6,
            CliError::EmptyGroundTruth => 7,
            CliError::Scene(_) => 8,
        }
    }
}

#[derive(Parser)]
#[command(name = "semvox", version, about = "Semantic voxel mapping experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic dataset (poses, depth, observations, GT voxels).
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Dataset output directory.
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fuse a dataset into a voxel map with one strategy.
    Fuse {
        /// Dataset directory produced by `simulate`.
        dataset: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Fusion strategy name (sum_probs, sum_labels, bayesian, robust_r,
        /// robust_d, robust_dr, robust_none).
        #[arg(long)]
        strategy: String,
        /// Map output file.
        #[arg(long)]
        out: PathBuf,
        /// Pixel subsampling stride; overrides the config.
        #[arg(long)]
        stride: Option<usize>,
    },
    /// Score a map file against a ground-truth voxel file.
    Eval {
        map: PathBuf,
        gt: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Row label for the CSV output.
        #[arg(long, default_value = "map")]
        strategy: String,
        /// Optional JSON report path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// simulate + fuse + eval for every configured strategy; writes
    /// comparison.csv and one map file per strategy.
    Compare {
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Pixel subsampling stride; overrides the config.
        #[arg(long)]
        stride: Option<usize>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Cmd::Simulate { config, out, seed } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            commands::cmd_simulate(&cfg, &out)
        }
        Cmd::Fuse {
            dataset,
            config,
            strategy,
            out,
            stride,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(stride) = stride {
                cfg.observations.stride = stride;
                cfg.validate()?;
            }
            let strategy = FusionStrategy::from_name(&strategy)
                .ok_or_else(|| CliError::Config(format!("unknown strategy {strategy:?}")))?;
            let summary = commands::cmd_fuse(&cfg, &dataset, strategy, &out)?;
            println!(
                "voxels={} pixels_used={} pixels_skipped={}",
                summary.voxels_touched, summary.pixels_used, summary.pixels_skipped
            );
            Ok(())
        }
        Cmd::Eval {
            map,
            gt,
            config,
            strategy,
            out,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let csv = commands::cmd_eval(&cfg, &map, &gt, &strategy, out.as_deref())?;
            print!("{csv}");
            Ok(())
        }
        Cmd::Compare {
            config,
            out,
            seed,
            stride,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if let Some(stride) = stride {
                cfg.observations.stride = stride;
            }
            cfg.validate()?;
            let csv = commands::cmd_compare(&cfg, &out)?;
            print!("{csv}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

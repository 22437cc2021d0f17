//! `xychain`: sweeps, excitation profiles, fits and Landau-Zener tables.
//!
//! Exit codes: 0 success, 2 configuration or I/O error, 3 numerical failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::{CommonArgs, ExperimentConfig};
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "xychain", version, about = "Noisy quenches of the XY chain, one k-mode at a time")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Defect density n_W(τ) on a log-spaced τ grid for every W; writes sweep.csv.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Also run the trajectory oracle at k = 0.5, τ = 20 and the largest W.
        #[arg(long)]
        trajectories: bool,
    },
    /// Excitation probability p_k over the momentum grid at one τ, one file per W.
    Pkscan {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        tau: f64,
    },
    /// Power-law, noise-rate and optimal-time fits of a sweep file.
    Fit {
        /// Path to a sweep.csv produced by `xychain sweep`.
        input: PathBuf,
        /// Directory for fit_report.json.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Landau-Zener mapping table and the integrated LZ defect estimate.
    Lz {
        #[command(flatten)]
        common: CommonArgs,
        /// Quench time; defaults to e^5.
        #[arg(long)]
        tau: Option<f64>,
    },
    /// Compares an ensemble of stochastic trajectories with the master equation.
    Trajcheck {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 0.5)]
        k: f64,
        #[arg(long, default_value_t = 20.0)]
        tau: f64,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        dt: Option<f64>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Sweep { common, trajectories } => {
            let mut cfg = ExperimentConfig::resolve(&common)?;
            cfg.trajectories.enabled |= trajectories;
            let rows = commands::cmd_sweep(&cfg)?;
            eprintln!("wrote {} rows to {}", rows.len(), cfg.output_dir.join("sweep.csv").display());
        }
        Command::Pkscan { common, tau } => commands::cmd_pkscan(&ExperimentConfig::resolve(&common)?, tau)?,
        Command::Fit { input, out } => {
            commands::cmd_fit(&input, &out)?;
        }
        Command::Lz { common, tau } => {
            commands::cmd_lz(&ExperimentConfig::resolve(&common)?, tau.unwrap_or(5.0f64.exp()))?;
        }
        Command::Trajcheck { common, k, tau, count, dt } => {
            // without an explicit --w the oracle runs at W = 0.05
            let w = common.w.first().copied().unwrap_or(0.05);
            let mut cfg = ExperimentConfig::resolve(&common)?;
            if let Some(c) = count {
                cfg.trajectories.count = c;
            }
            if let Some(dt) = dt {
                cfg.trajectories.dt = dt;
            }
            cfg.validate()?;
            commands::cmd_trajcheck(&cfg, k, tau, w)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

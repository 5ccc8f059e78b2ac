//! `thinflow` command-line interface.
//!
//! Exit status: 0 on success, 1 for an invalid configuration or problem,
//! 2 for a solver or output failure, 3 when a sweep finishes with a failed
//! rate verdict.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Two-phase flow in thin cylinders: limit problems, reference solutions and
/// ε-convergence sweeps.
#[derive(Debug, Parser)]
#[command(name = "thinflow", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Configuration file and artifact directory.
#[derive(Debug, Args)]
struct RunArgs {
    /// Path of the TOML configuration.
    config: PathBuf,
    /// Directory receiving the output files.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the regime of (alpha, beta) and the predicted rates.
    Classify {
        /// Optional configuration supplying alpha and beta.
        config: Option<PathBuf>,
        /// Lateral-flux exponent.
        #[arg(long, allow_negative_numbers = true)]
        alpha: Option<f64>,
        /// Transverse-permeability exponent.
        #[arg(long, allow_negative_numbers = true)]
        beta: Option<f64>,
    },
    /// Check the configuration and every data assumption.
    Validate {
        /// Path of the TOML configuration.
        config: PathBuf,
    },
    /// Solve one cross-section cell problem (writes cell.csv).
    SolveCell(RunArgs),
    /// Solve the limit problem and, in Case 2, its corrector (writes limit.csv).
    SolveLimit(RunArgs),
    /// Solve the full axisymmetric problem (writes reference.csv).
    SolveReference(RunArgs),
    /// Build the asymptotic approximation (writes approximation.csv, velocity.csv).
    Reconstruct(RunArgs),
    /// Run the epsilon sweep (writes errors.csv, rates.csv, plot_errors.py).
    Sweep(RunArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Classify {
            config,
            alpha,
            beta,
        } => commands::classify_cmd(config.as_deref(), *alpha, *beta),
        Command::Validate { config } => commands::validate_cmd(config),
        Command::SolveCell(a) => commands::solve_cell_cmd(&a.config, &a.out_dir),
        Command::SolveLimit(a) => commands::solve_limit_cmd(&a.config, &a.out_dir),
        Command::SolveReference(a) => commands::solve_reference_cmd(&a.config, &a.out_dir),
        Command::Reconstruct(a) => commands::reconstruct_cmd(&a.config, &a.out_dir),
        Command::Sweep(a) => commands::sweep_cmd(&a.config, &a.out_dir),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}

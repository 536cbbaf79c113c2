//! `blockpd`: run asynchronous primal-dual simulations, sweeps and bound reports.
//!
//! Exit codes: 0 success, 1 invalid input or violated precondition,
//! 2 tick budget exhausted before convergence, 3 unreachable error target.

mod commands;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{BoundsArgs, GenerateArgs, SolveArgs, SweepArgs};

#[derive(Debug, Parser)]
#[command(name = "blockpd", version, about = "Totally asynchronous block primal-dual simulator")]
#[command(after_help = "Exit codes: 0 ok, 1 invalid input, 2 tick budget exhausted, 3 infeasible eps2.\n\
                        BLOCKPD_OUT sets the default output directory.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one problem; writes trace.csv, summary.json, bounds.json and manifest.json.
    Solve(SolveArgs),
    /// Run one benchmark experiment; writes a sub-directory per configuration and aggregate.csv.
    Sweep(SweepArgs),
    /// Print rate constants, regularization bounds and the parameters reaching eps1 + eps2.
    Bounds(BoundsArgs),
    /// Write a network-flow benchmark instance as problem.json and edges.csv.
    Generate(GenerateArgs),
    /// Re-check every output listed in a directory's manifest.json.
    Verify {
        /// Directory holding manifest.json.
        dir: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve(a) => commands::solve(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Bounds(a) => commands::bounds(a),
        Command::Generate(a) => commands::generate(a),
        Command::Verify { dir } => commands::verify_dir(dir),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

use std::process::ExitCode;

use attractor_cli::{
    cmd_bench, cmd_export_graph, cmd_simulate, cmd_solve, cmd_sparsify, BenchArgs, ExportGraphArgs, SimulateArgs,
    SolveArgs, SparsifyArgs,
};
use clap::{Parser, Subcommand};

/// Sign-constrained Gaussian precision estimation.
///
/// Exit codes: 0 success, 1 input or configuration error, 2 no estimate exists for the
/// input, 3 solver stopped at the sweep limit (best iterate written).
#[derive(Parser)]
#[command(name = "attractor", version)]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the precision matrix of a covariance or data file
    Solve(SolveArgs),
    /// Threshold a fitted estimate and refit, choosing the level by validation loss
    Sparsify(SparsifyArgs),
    /// Generate a synthetic instance
    Simulate(SimulateArgs),
    /// Run a replication benchmark from a config file
    Bench(BenchArgs),
    /// Write an edge list as a DOT graph
    ExportGraph(ExportGraphArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Sparsify(a) => cmd_sparsify(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Bench(a) => cmd_bench(a),
        Command::ExportGraph(a) => cmd_export_graph(a),
    };
    match result {
        Ok(outcome) => {
            println!("{}", outcome.message.trim_end());
            for p in &outcome.outputs {
                println!("wrote {}", p.display());
            }
            ExitCode::from(outcome.exit_code())
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

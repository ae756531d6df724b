//! Library side of the `attractor` command: every subcommand is a plain function so it can
//! be driven in-process.

pub mod commands;
pub mod error;
pub mod graph;
pub mod io;
pub mod manifest;

pub use commands::{
    cmd_bench, cmd_export_graph, cmd_simulate, cmd_solve, cmd_sparsify, BenchArgs, CovarianceArgs, ExportGraphArgs,
    Outcome, SetupKind, SimulateArgs, SolveArgs, SolverArgs, SparsifyArgs,
};
pub use error::CliError;
pub use io::{EdgeList, EdgeRecord, Layout};
pub use manifest::RunManifest;

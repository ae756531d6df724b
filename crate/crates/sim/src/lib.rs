//! Synthetic experiments for `attractor-core`: ground-truth generators, seeded sampling
//! and a replication harness with convergence tracing.

pub mod bench;
pub mod datagen;

pub use bench::{run_bench, trace_convergence, BenchConfig, BenchError, BenchRecord, BenchResult, ConvergenceTrace};
pub use datagen::{
    make_instance, sample_covariance, sample_gaussian, DatagenError, MeanPolicy, Setup, SetupSpec, SyntheticInstance,
};

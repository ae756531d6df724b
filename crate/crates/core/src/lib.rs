//! Maximum-likelihood estimation of Gaussian precision matrices under the constraint that
//! all off-diagonal entries are non-positive (the model is multivariate totally positive
//! of order two, MTP₂).
//!
//! The estimator minimizes `-log det Ω + tr(Ω S)` over positive definite M-matrices by
//! block coordinate descent, where each column update is a small linear complementarity
//! problem. The crate also provides thresholding with validation-based selection, closed
//! form population solutions for several mis-specified models, and recovery metrics.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the `*64` aliases below
//! cover the common case.

pub mod lcp;
pub mod linalg;
pub mod metrics;
pub mod oracles;
pub mod scalar;
pub mod solver;
pub mod sparsify;

pub use lcp::{solve_lcp, solve_lcp_restricted, LcpError, LcpOptions, LcpProblem, LcpSolution};
pub use linalg::{cholesky, CholeskyFactor, LinalgError, Matrix, SymMatrix};
pub use metrics::{confusion, kl_divergence, logdet_loss, mcc, spectral_error, ConfusionCounts, MetricsError};
pub use oracles::{oracle_solution, population_pair, OracleError, OracleSolution, OracleSpec};
pub use scalar::Real;
pub use solver::{
    check_existence, dual_certificate, kkt_residual, objective, refit, solve, verify_inverse_m_matrix, DualCertificate,
    Existence, PrecisionEstimate, SolveError, SolveObserver, SolverOptions, SolverWarning,
};
pub use sparsify::{
    edges_of, hard_threshold, select_threshold, EdgeSet, SelectError, ThresholdGrid, ThresholdSelection,
};

pub type SymMatrix64 = SymMatrix<f64>;
pub type SymMatrix32 = SymMatrix<f32>;
pub type Matrix64 = Matrix<f64>;
pub type SolverOptions64 = SolverOptions<f64>;
pub type PrecisionEstimate64 = PrecisionEstimate<f64>;
pub type SolveError64 = SolveError<f64>;
pub type OracleSpec64 = OracleSpec<f64>;
pub type ThresholdSelection64 = ThresholdSelection<f64>;

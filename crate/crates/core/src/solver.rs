//! Block coordinate descent for
//!
//! ```text
//! minimize  -log det Ω + tr(Ω S)   over positive definite Ω with ω_jk <= 0 (j != k)
//! ```
//!
//! Each block update optimizes one row/column of `Ω` with the rest held fixed. With
//! `Σ = Ω⁻¹` partitioned around `j`, the inverse of the fixed block is the Schur complement
//! `M = Σ_jj − σ_j σ_jᵀ / σ_jj`, and the new off-diagonal column is `ω_j = −η` where `η`
//! solves the LCP `M η − s_j / s_jj = λ`, `η, λ >= 0`, `ηᵀλ = 0`. The diagonal follows from
//! `ω_jj − ω_jᵀ M ω_j = 1 / s_jj`, which keeps every iterate strictly positive definite.
//! `Σ` is updated in closed form after each block and refreshed from a Cholesky factor of `Ω`
//! after each sweep.

use thiserror::Error;

use crate::lcp::{solve_lcp_restricted, LcpError, LcpOptions, LcpProblem};
use crate::linalg::{cholesky, LinalgError, SymMatrix};
use crate::scalar::Real;
use crate::sparsify::EdgeSet;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions<T> {
    /// Stop once the KKT residual `ε` drops to this level.
    pub kkt_tol: T,
    pub max_sweeps: usize,
    /// Relative tolerance of the perfect-correlation existence check.
    pub perfect_corr_tol: T,
    /// Pairs whose correlation lies within this relative distance of `+1` raise a warning.
    pub near_corr_warn_tol: T,
    /// An objective below this value is treated as divergence.
    pub divergence_floor: T,
    pub lcp_opts: LcpOptions,
}

impl<T: Real> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            kkt_tol: T::lit(1e-6),
            max_sweeps: 500,
            perfect_corr_tol: T::lit(1e-8),
            near_corr_warn_tol: T::lit(1e-4),
            divergence_floor: T::lit(-1e12),
            lcp_opts: LcpOptions::default(),
        }
    }
}

impl<T: Real> SolverOptions<T> {
    pub fn with_kkt_tol(mut self, tol: T) -> Self {
        self.kkt_tol = tol;
        self
    }

    pub fn with_max_sweeps(mut self, sweeps: usize) -> Self {
        self.max_sweeps = sweeps;
        self
    }

    fn validate(&self) -> Result<(), SolveError<T>> {
        if !(self.kkt_tol > T::zero()) {
            return Err(SolveError::InvalidOptions("kkt_tol must be positive".into()));
        }
        if self.max_sweeps == 0 {
            return Err(SolveError::InvalidOptions("max_sweeps must be at least 1".into()));
        }
        Ok(())
    }
}

/// Outcome of the existence check on a covariance input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Existence {
    Ok,
    PerfectCorrelation(usize, usize),
    NonpositiveDiagonal(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolverWarning {
    /// Correlation `s_jk / sqrt(s_jj s_kk)` close to `+1`; the solution is badly conditioned.
    NearPerfectCorrelation { j: usize, k: usize, correlation: f64 },
}

impl std::fmt::Display for SolverWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::NearPerfectCorrelation { j, k, correlation } => write!(
                f,
                "variables {j} and {k} are nearly perfectly correlated (r = {correlation:.10}); \
                 the estimate is ill-conditioned"
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRecord<T> {
    pub sweep: usize,
    pub objective: T,
    pub kkt_eps: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionEstimate<T> {
    pub omega: SymMatrix<T>,
    pub sigma: SymMatrix<T>,
    pub objective: T,
    pub kkt_eps: T,
    pub sweeps: usize,
    pub converged: bool,
    /// Off-diagonal zero pattern the estimate was constrained to (refits only).
    pub pattern: Option<EdgeSet>,
    pub warnings: Vec<SolverWarning>,
    pub history: Vec<SweepRecord<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualCertificate<T> {
    pub gamma: SymMatrix<T>,
    pub duality_gap: T,
    pub max_complementarity_violation: T,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError<T: Real> {
    #[error("no minimizer exists: {0:?}")]
    ExistenceViolation(Existence),
    #[error("sweep limit reached before KKT tolerance (eps = {})", .best.kkt_eps)]
    SweepLimitReached { best: Box<PrecisionEstimate<T>> },
    #[error("restricted problem appears unbounded below (objective {objective})")]
    NonexistentRefit { objective: T },
    #[error(transparent)]
    Lcp(#[from] LcpError),
    #[error("iterate lost positive definiteness: {0}")]
    Linalg(#[from] LinalgError),
    #[error("edge set has dimension {found}, covariance has {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid solver options: {0}")]
    InvalidOptions(String),
}

/// Hooks invoked while the solver runs; both default to no-ops.
pub trait SolveObserver<T> {
    fn after_block(&mut self, _j: usize, _omega: &SymMatrix<T>, _sigma: &SymMatrix<T>) {}
    fn after_sweep(&mut self, _record: &SweepRecord<T>, _omega: &SymMatrix<T>, _sigma: &SymMatrix<T>) {}
}

impl<T> SolveObserver<T> for () {}

/// A minimizer exists (and is unique) iff every `s_jj > 0` and no pair is perfectly positively
/// correlated. Pairs with `s_jk >= (1 - tol) sqrt(s_jj s_kk)` count as perfectly correlated.
pub fn check_existence<T: Real>(s: &SymMatrix<T>, tol: T) -> Existence {
    let p = s.dim();
    if let Some(j) = (0..p).find(|&j| !(s.get(j, j) > T::zero())) {
        return Existence::NonpositiveDiagonal(j);
    }
    for j in 0..p {
        for k in (j + 1)..p {
            let root = (s.get(j, j) * s.get(k, k)).sqrt();
            if !(s.get(j, k) - root < -tol * root) {
                return Existence::PerfectCorrelation(j, k);
            }
        }
    }
    Existence::Ok
}

fn near_boundary_warnings<T: Real>(s: &SymMatrix<T>, opts: &SolverOptions<T>) -> Vec<SolverWarning> {
    let band = opts.near_corr_warn_tol.max(T::lit(10.0) * opts.perfect_corr_tol);
    let p = s.dim();
    let mut out = Vec::new();
    for j in 0..p {
        for k in (j + 1)..p {
            let r = s.get(j, k) / (s.get(j, j) * s.get(k, k)).sqrt();
            if r >= T::one() - band {
                out.push(SolverWarning::NearPerfectCorrelation { j, k, correlation: r.as_f64() });
            }
        }
    }
    out
}

/// `-log det Ω + tr(Ω S)`.
pub fn objective<T: Real>(omega: &SymMatrix<T>, s: &SymMatrix<T>) -> Result<T, LinalgError> {
    let f = cholesky(omega)?;
    Ok(-f.log_det() + omega.trace_product(s))
}

/// Result of one block update in the original coordinates of row/column `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockUpdate<T> {
    pub omega_jj: T,
    /// New off-diagonal column of `Ω`, indexed by the `p − 1` variables other than `j` in order.
    pub omega_j: Vec<T>,
    /// New off-diagonal column of `Σ`, same indexing.
    pub sigma_j: Vec<T>,
}

/// One block update for row/column `j` given the current `Σ = Ω⁻¹`.
pub fn solve_block<T: Real>(
    sigma: &SymMatrix<T>,
    s: &SymMatrix<T>,
    j: usize,
    lcp_opts: &LcpOptions,
) -> Result<BlockUpdate<T>, SolveError<T>> {
    let p = sigma.dim();
    let all: Vec<usize> = (0..p - 1).collect();
    Ok(block_update(sigma, s, j, &all, lcp_opts)?.0)
}

/// Returns the update plus the Schur complement `M = {Ω_jj}⁻¹` it was computed from.
fn block_update<T: Real>(
    sigma: &SymMatrix<T>,
    s: &SymMatrix<T>,
    j: usize,
    allowed: &[usize],
    lcp_opts: &LcpOptions,
) -> Result<(BlockUpdate<T>, SymMatrix<T>), SolveError<T>> {
    let p = sigma.dim();
    let others: Vec<usize> = (0..p).filter(|&k| k != j).collect();
    let d = others.len();
    if d == 0 {
        let upd = BlockUpdate { omega_jj: T::one() / s.get(j, j), omega_j: vec![], sigma_j: vec![] };
        return Ok((upd, SymMatrix::zeros(1)));
    }
    let s_jj = s.get(j, j);
    let sig_jj = sigma.get(j, j);
    let sig_j: Vec<T> = others.iter().map(|&k| sigma.get(k, j)).collect();
    let m = SymMatrix::from_fn(d, |a, b| sigma.get(others[a], others[b]) - sig_j[a] * sig_j[b] / sig_jj);
    let q: Vec<T> = others.iter().map(|&k| s.get(k, j) / s_jj).collect();
    let prob = LcpProblem { m, q };
    let sol = solve_lcp_restricted(&prob, allowed, lcp_opts)?;
    let m_eta = prob.m.matvec(&sol.eta);
    let quad: T = sol.eta.iter().zip(&m_eta).map(|(&e, &u)| e * u).sum();
    let upd = BlockUpdate {
        omega_jj: T::one() / s_jj + quad,
        omega_j: sol.eta.iter().map(|&e| -e).collect(),
        sigma_j: m_eta.iter().map(|&u| s_jj * u).collect(),
    };
    Ok((upd, prob.m))
}

/// KKT residual `(ε, ε₁, ε₂)` of an iterate.
///
/// `ε₁ = max |σ_jk − s_jk|` over the diagonal and the active pairs `ω_jk < 0`;
/// `ε₂ = max max(s_jk − σ_jk, 0)` over the remaining pairs. Pairs outside a refit's zero
/// pattern carry free multipliers and are skipped.
pub fn kkt_residual<T: Real>(est: &PrecisionEstimate<T>, s: &SymMatrix<T>) -> (T, T, T) {
    kkt_parts(&est.omega, &est.sigma, s, est.pattern.as_ref())
}

fn kkt_parts<T: Real>(
    omega: &SymMatrix<T>,
    sigma: &SymMatrix<T>,
    s: &SymMatrix<T>,
    pattern: Option<&EdgeSet>,
) -> (T, T, T) {
    let p = s.dim();
    let mut eps1 = T::zero();
    let mut eps2 = T::zero();
    for j in 0..p {
        eps1 = eps1.max((sigma.get(j, j) - s.get(j, j)).abs());
        for k in (j + 1)..p {
            if pattern.is_some_and(|e| !e.contains(j, k)) {
                continue;
            }
            let diff = sigma.get(j, k) - s.get(j, k);
            if omega.get(j, k) < T::zero() {
                eps1 = eps1.max(diff.abs());
            } else {
                eps2 = eps2.max(-diff);
            }
        }
    }
    (eps1.max(eps2), eps1, eps2)
}

/// Minimizes `-log det Ω + tr(Ω S)` over positive definite M-matrices.
pub fn solve<T: Real>(s: &SymMatrix<T>, opts: &SolverOptions<T>) -> Result<PrecisionEstimate<T>, SolveError<T>> {
    run(s, None, opts, &mut ())
}

pub fn solve_observed<T: Real>(
    s: &SymMatrix<T>,
    opts: &SolverOptions<T>,
    observer: &mut dyn SolveObserver<T>,
) -> Result<PrecisionEstimate<T>, SolveError<T>> {
    run(s, None, opts, observer)
}

/// Same problem with the extra constraint `ω_jk = 0` for every pair outside `edges`.
pub fn refit<T: Real>(
    s: &SymMatrix<T>,
    edges: &EdgeSet,
    opts: &SolverOptions<T>,
) -> Result<PrecisionEstimate<T>, SolveError<T>> {
    run(s, Some(edges), opts, &mut ())
}

pub fn refit_observed<T: Real>(
    s: &SymMatrix<T>,
    edges: &EdgeSet,
    opts: &SolverOptions<T>,
    observer: &mut dyn SolveObserver<T>,
) -> Result<PrecisionEstimate<T>, SolveError<T>> {
    run(s, Some(edges), opts, observer)
}

fn run<T: Real>(
    s: &SymMatrix<T>,
    pattern: Option<&EdgeSet>,
    opts: &SolverOptions<T>,
    observer: &mut dyn SolveObserver<T>,
) -> Result<PrecisionEstimate<T>, SolveError<T>> {
    opts.validate()?;
    let p = s.dim();
    if let Some(e) = pattern {
        if e.dim() != p {
            return Err(SolveError::DimensionMismatch { expected: p, found: e.dim() });
        }
    }
    match check_existence(s, opts.perfect_corr_tol) {
        Existence::Ok => {}
        other => return Err(SolveError::ExistenceViolation(other)),
    }
    let warnings = near_boundary_warnings(s, opts);
    for w in &warnings {
        log::warn!("{w}");
    }

    // allowed LCP positions per column: neighbor k of j sits at position k - (k > j)
    let allowed: Vec<Vec<usize>> = (0..p)
        .map(|j| {
            let pos = |k: usize| if k > j { k - 1 } else { k };
            match pattern {
                Some(e) => e.neighbors(j).into_iter().map(pos).collect(),
                None => (0..p.saturating_sub(1)).collect(),
            }
        })
        .collect();

    let mut sigma = s.diagonal_part();
    let mut omega = SymMatrix::from_diagonal(&s.diagonal().iter().map(|&x| T::one() / x).collect::<Vec<_>>());
    let mut history = Vec::new();
    let mut sweep = 0;
    loop {
        sweep += 1;
        for j in 0..p {
            let (upd, m) = block_update(&sigma, s, j, &allowed[j], &opts.lcp_opts)?;
            apply_update(&mut omega, &mut sigma, s.get(j, j), j, &upd, &m);
            observer.after_block(j, &omega, &sigma);
        }
        let chol = cholesky(&omega)?;
        sigma = chol.inverse();
        let obj = -chol.log_det() + omega.trace_product(s);
        let (eps, _, _) = kkt_parts(&omega, &sigma, s, pattern);
        let record = SweepRecord { sweep, objective: obj, kkt_eps: eps };
        history.push(record);
        observer.after_sweep(&record, &omega, &sigma);
        log::debug!("sweep {sweep}: objective {obj}, kkt eps {eps}");

        if obj < opts.divergence_floor || !obj.is_finite() {
            return Err(SolveError::NonexistentRefit { objective: obj });
        }
        let converged = eps <= opts.kkt_tol;
        if converged || sweep >= opts.max_sweeps {
            let est = PrecisionEstimate {
                omega,
                sigma,
                objective: obj,
                kkt_eps: eps,
                sweeps: sweep,
                converged,
                pattern: pattern.cloned(),
                warnings,
                history,
            };
            return if converged { Ok(est) } else { Err(SolveError::SweepLimitReached { best: Box::new(est) }) };
        }
    }
}

fn apply_update<T: Real>(
    omega: &mut SymMatrix<T>,
    sigma: &mut SymMatrix<T>,
    s_jj: T,
    j: usize,
    upd: &BlockUpdate<T>,
    m: &SymMatrix<T>,
) {
    let p = omega.dim();
    let others: Vec<usize> = (0..p).filter(|&k| k != j).collect();
    omega.set(j, j, upd.omega_jj);
    sigma.set(j, j, s_jj);
    for (a, &ka) in others.iter().enumerate() {
        omega.set(ka, j, upd.omega_j[a]);
        sigma.set(ka, j, upd.sigma_j[a]);
        for (b, &kb) in others.iter().enumerate().skip(a) {
            sigma.set(ka, kb, m.get(a, b) + upd.sigma_j[a] * upd.sigma_j[b] / s_jj);
        }
    }
}

/// Dual certificate `Γ = Σ̂ − S` with the duality gap
/// `(−log det Ω̂ + tr(Ω̂ S)) − (log det Σ̂ + p)` and `max_{j≠k} |ω̂_jk γ̂_jk|`.
pub fn dual_certificate<T: Real>(
    est: &PrecisionEstimate<T>,
    s: &SymMatrix<T>,
) -> Result<DualCertificate<T>, LinalgError> {
    let p = s.dim();
    let gamma = est.sigma.sub(s);
    let primal = objective(&est.omega, s)?;
    let dual = cholesky(&est.sigma)?.log_det() + T::from_usize_lossy(p);
    let mut viol = T::zero();
    for j in 0..p {
        for k in (j + 1)..p {
            viol = viol.max((est.omega.get(j, k) * gamma.get(j, k)).abs());
        }
    }
    Ok(DualCertificate { gamma, duality_gap: primal - dual, max_complementarity_violation: viol })
}

/// Whether `Σ` is an inverse M-matrix, decided twice: directly from the signs of `Σ⁻¹`, and
/// by checking that `Σ` solves its own dual problem (the optimal `Σ̂` for `S = Σ` equals `Σ`).
/// Both routes must agree for `true`.
pub fn verify_inverse_m_matrix<T: Real>(sigma: &SymMatrix<T>, tol: T) -> bool {
    let Ok(inv) = cholesky(sigma).map(|f| f.inverse()) else {
        return false;
    };
    let direct = inv.off_diagonal_nonpositive(tol);
    let opts = SolverOptions::default().with_kkt_tol(tol * T::lit(1e-2)).with_max_sweeps(10_000);
    let dual = match solve(sigma, &opts) {
        Ok(est) => est.sigma.sub(sigma).max_abs() <= tol,
        Err(SolveError::SweepLimitReached { best }) => best.sigma.sub(sigma).max_abs() <= tol,
        Err(_) => false,
    };
    if direct != dual {
        log::warn!("inverse M-matrix routes disagree (direct {direct}, dual {dual})");
    }
    direct && dual
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s2(r: f64) -> SymMatrix<f64> {
        SymMatrix::from_fn(2, |j, k| if j == k { 1.0 } else { r })
    }

    #[test]
    fn existence_examples() {
        assert_eq!(check_existence(&SymMatrix::<f64>::identity(4), 1e-8), Existence::Ok);
        assert_eq!(check_existence(&s2(1.0), 1e-8), Existence::PerfectCorrelation(0, 1));
        assert_eq!(check_existence(&s2(-1.0), 1e-8), Existence::Ok);
        let mut s = SymMatrix::<f64>::identity(3);
        s.set(2, 2, 0.0);
        assert_eq!(check_existence(&s, 1e-8), Existence::NonpositiveDiagonal(2));
    }

    #[test]
    fn identity_is_its_own_solution() {
        let est = solve(&SymMatrix::<f64>::identity(4), &SolverOptions::default()).unwrap();
        assert_eq!(est.omega, SymMatrix::identity(4));
        assert_eq!(est.sweeps, 1);
        assert_eq!(est.kkt_eps, 0.0);
    }

    #[test]
    fn block_with_zero_correlation() {
        let s = SymMatrix::<f64>::identity(2);
        let u = solve_block(&s, &s, 0, &LcpOptions::default()).unwrap();
        assert_eq!(u.omega_j, vec![0.0]);
        assert_eq!(u.omega_jj, 1.0);
        assert_eq!(u.sigma_j, vec![0.0]);
    }

    #[test]
    fn block_with_negative_correlation() {
        let s = s2(-0.5);
        let u = solve_block(&s.diagonal_part(), &s, 0, &LcpOptions::default()).unwrap();
        assert_eq!(u.omega_j, vec![0.0]);
    }

    #[test]
    fn block_with_positive_correlation() {
        let s = s2(0.5);
        let u = solve_block(&s.diagonal_part(), &s, 0, &LcpOptions::default()).unwrap();
        assert_eq!(u.omega_j, vec![-0.5]);
        assert_eq!(u.omega_jj, 1.25);
        assert_eq!(u.sigma_j, vec![0.5]);
    }

    #[test]
    fn kkt_residual_with_empty_edge_set() {
        let s = s2(0.3);
        let est = PrecisionEstimate {
            omega: SymMatrix::identity(2),
            sigma: SymMatrix::identity(2),
            objective: 0.0,
            kkt_eps: 0.0,
            sweeps: 0,
            converged: false,
            pattern: None,
            warnings: vec![],
            history: vec![],
        };
        let (eps, eps1, eps2) = kkt_residual(&est, &s);
        assert_eq!(eps1, 0.0);
        assert!((eps2 - 0.3).abs() < 1e-15);
        assert_eq!(eps, eps2);
    }

    #[test]
    fn existence_violation_is_an_error() {
        assert!(matches!(
            solve(&s2(1.0), &SolverOptions::default()),
            Err(SolveError::ExistenceViolation(Existence::PerfectCorrelation(0, 1)))
        ));
    }

    #[test]
    fn invalid_options_rejected() {
        let opts = SolverOptions::<f64>::default().with_max_sweeps(0);
        assert!(matches!(solve(&s2(0.2), &opts), Err(SolveError::InvalidOptions(_))));
    }

    #[test]
    fn refit_with_no_edges_gives_inverse_diagonal() {
        let s = SymMatrix::from_fn(3, |j, k| if j == k { 2.0 + j as f64 } else { 0.4 });
        let est = refit(&s, &EdgeSet::empty(3), &SolverOptions::default()).unwrap();
        assert_eq!(est.omega, SymMatrix::from_diagonal(&[0.5, 1.0 / 3.0, 0.25]));
    }

    #[test]
    fn near_boundary_warns_but_solves() {
        // coordinate descent contracts at rate ~r⁴ here, so the sweep cap may be hit first
        let est = match solve(&s2(1.0 - 1e-6), &SolverOptions::default()) {
            Ok(est) => est,
            Err(SolveError::SweepLimitReached { best }) => *best,
            Err(e) => panic!("unexpected error {e}"),
        };
        assert_eq!(est.warnings.len(), 1);
        assert!(est.objective.is_finite());
    }

    #[test]
    fn dual_certificate_of_identity() {
        let s = SymMatrix::<f64>::identity(3);
        let est = solve(&s, &SolverOptions::default()).unwrap();
        let c = dual_certificate(&est, &s).unwrap();
        assert_eq!(c.gamma.max_abs(), 0.0);
        assert_eq!(c.duality_gap, 0.0);
    }
}

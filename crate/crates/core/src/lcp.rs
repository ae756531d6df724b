//! Strictly monotone symmetric linear complementarity problems.
//!
//! Finds `η, λ ≥ 0` with `M η − q = λ` and `ηᵀλ = 0` for strictly positive definite `M`.
//! Equivalently `η = argmin_{η ≥ 0} ½ ηᵀ M η − ηᵀ q`.
//!
//! The solver is block principal pivoting: all infeasible variables are exchanged between
//! the free set (`λ_i = 0`) and the bound set (`η_i = 0`) at once. If the number of
//! infeasibilities fails to shrink for `max_block_exchanges` consecutive rounds, a single
//! Murty exchange (largest infeasible index) is made instead, which is finitely convergent
//! for positive definite `M`.

use thiserror::Error;

use crate::linalg::{cholesky, dot, norm_inf, LinalgError, SymMatrix};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LcpError {
    #[error("pivoting exceeded {iterations} iterations without finding a complementary solution")]
    CycleLimitExceeded { iterations: usize },
    #[error("LCP matrix is not strictly positive definite: {0}")]
    NotPositiveDefinite(LinalgError),
    #[error("q has length {found}, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LcpOptions {
    /// Full-block exchanges allowed without reducing the infeasibility count
    /// before falling back to a single Murty exchange.
    pub max_block_exchanges: usize,
    /// Hard cap on pivoting rounds; `None` means `max(200, 20·d)`.
    pub max_iterations: Option<usize>,
}

impl Default for LcpOptions {
    fn default() -> Self {
        Self { max_block_exchanges: 10, max_iterations: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LcpProblem<T> {
    pub m: SymMatrix<T>,
    pub q: Vec<T>,
}

impl<T: Real> LcpProblem<T> {
    pub fn new(m: SymMatrix<T>, q: Vec<T>) -> Result<Self, LcpError> {
        if q.len() != m.dim() {
            return Err(LcpError::DimensionMismatch { expected: m.dim(), found: q.len() });
        }
        Ok(Self { m, q })
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    /// `½ ηᵀ M η − ηᵀ q`.
    pub fn objective(&self, eta: &[T]) -> T {
        let m_eta = self.m.matvec(eta);
        T::lit(0.5) * dot(eta, &m_eta) - dot(eta, &self.q)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LcpSolution<T> {
    pub eta: Vec<T>,
    pub lam: Vec<T>,
    /// Number of pivoting rounds (linear solves) performed.
    pub pivots: usize,
}

impl<T: Real> LcpSolution<T> {
    /// Indices with `η_i > 0`.
    pub fn support(&self) -> Vec<usize> {
        self.eta.iter().enumerate().filter(|(_, &x)| x > T::zero()).map(|(i, _)| i).collect()
    }
}

pub fn solve_lcp<T: Real>(prob: &LcpProblem<T>, opts: &LcpOptions) -> Result<LcpSolution<T>, LcpError> {
    let all: Vec<usize> = (0..prob.dim()).collect();
    solve_lcp_restricted(prob, &all, opts)
}

/// Solves the LCP on the principal submatrix indexed by `allowed`; variables outside
/// `allowed` are fixed at `η = 0` and their multipliers are reported as `0`.
pub fn solve_lcp_restricted<T: Real>(
    prob: &LcpProblem<T>,
    allowed: &[usize],
    opts: &LcpOptions,
) -> Result<LcpSolution<T>, LcpError> {
    let d = prob.dim();
    if let Some(&bad) = allowed.iter().find(|&&i| i >= d) {
        return Err(LcpError::IndexOutOfRange { index: bad, dim: d });
    }
    let mut eta = vec![T::zero(); d];
    let mut lam = vec![T::zero(); d];
    if allowed.is_empty() {
        return Ok(LcpSolution { eta, lam, pivots: 0 });
    }
    let sub = if allowed.len() == d && allowed.iter().enumerate().all(|(a, &i)| a == i) {
        prob.clone()
    } else {
        LcpProblem { m: prob.m.principal_submatrix(allowed), q: allowed.iter().map(|&i| prob.q[i]).collect() }
    };
    let sol = block_principal_pivoting(&sub, opts)?;
    for (a, &i) in allowed.iter().enumerate() {
        eta[i] = sol.eta[a];
        lam[i] = sol.lam[a];
    }
    Ok(LcpSolution { eta, lam, pivots: sol.pivots })
}

fn block_principal_pivoting<T: Real>(prob: &LcpProblem<T>, opts: &LcpOptions) -> Result<LcpSolution<T>, LcpError> {
    let d = prob.dim();
    let m = &prob.m;
    let q = &prob.q;
    let cap = opts.max_iterations.unwrap_or_else(|| (20 * d).max(200));
    let feas_tol = T::epsilon() * T::lit(64.0) * (T::one() + norm_inf(q));

    // free[i]: η_i basic (λ_i = 0); otherwise η_i = 0 and λ_i basic.
    let mut free = vec![false; d];
    let mut eta = vec![T::zero(); d];
    let mut lam = vec![T::zero(); d];
    let mut best_infeasible = d + 1;
    let mut backup = opts.max_block_exchanges;

    for iter in 1..=cap {
        let f_idx: Vec<usize> = (0..d).filter(|&i| free[i]).collect();
        eta.iter_mut().for_each(|x| *x = T::zero());
        if !f_idx.is_empty() {
            let m_ff = m.principal_submatrix(&f_idx);
            let q_f: Vec<T> = f_idx.iter().map(|&i| q[i]).collect();
            let chol = cholesky(&m_ff).map_err(LcpError::NotPositiveDefinite)?;
            let x = chol.solve(&q_f);
            for (a, &i) in f_idx.iter().enumerate() {
                eta[i] = x[a];
            }
        }
        for i in 0..d {
            lam[i] = if free[i] { T::zero() } else { dot(m.row(i), &eta) - q[i] };
        }

        let infeasible: Vec<usize> =
            (0..d).filter(|&i| if free[i] { eta[i] < -feas_tol } else { lam[i] < -feas_tol }).collect();
        if infeasible.is_empty() {
            eta.iter_mut().for_each(|x| *x = x.max(T::zero()));
            lam.iter_mut().for_each(|x| *x = x.max(T::zero()));
            return Ok(LcpSolution { eta, lam, pivots: iter });
        }

        if infeasible.len() < best_infeasible {
            best_infeasible = infeasible.len();
            backup = opts.max_block_exchanges;
            infeasible.iter().for_each(|&i| free[i] = !free[i]);
        } else if backup > 0 {
            backup -= 1;
            infeasible.iter().for_each(|&i| free[i] = !free[i]);
        } else {
            let i = *infeasible.last().expect("nonempty");
            free[i] = !free[i];
        }
    }
    Err(LcpError::CycleLimitExceeded { iterations: cap })
}

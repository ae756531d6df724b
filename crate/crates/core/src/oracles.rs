//! Closed-form population solutions of the sign-constrained problem with `S = Σ*` for
//! five mis-specification families. Each [`OracleSolution`] is a KKT certificate:
//! `Σ• = Σ* + Γ•`, `Ω• = Σ•⁻¹` an M-matrix, `Γ• >= 0` with zero diagonal, and
//! `ω•_jk γ•_jk = 0`.

use thiserror::Error;

use crate::linalg::{cholesky, LinalgError, Matrix, SymMatrix};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("invalid oracle specification: {0}")]
    InvalidSpec(String),
    #[error("no closed form in this regime: {0}")]
    UnsupportedRegime(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum OracleSpec<T> {
    /// `Ω* = bdiag(Ω₁₁, Σ₂₂⁻¹)` with `Ω₁₁` and `Σ₂₂` both M-matrices (zero cross block).
    BlockZeroCross { omega11: SymMatrix<T>, sigma22: SymMatrix<T> },
    /// `Ω* = (Ω₁₁ Ω₁₂; Ω₁₂ᵀ Ω₂₂)` with M-matrix diagonal blocks and `Ω₁₂ >= 0` (`p₁ × p₂`).
    BlockNonnegCross { omega11: SymMatrix<T>, omega22: SymMatrix<T>, omega12: Matrix<T> },
    /// `σ*_jk = ρ^{|j−k|}`. Negative `ρ` requires even `dim`.
    Ar1 { rho: T, dim: usize },
    /// `σ*_jk = ρ_{|j−k|}` from the Yule–Walker recursion of a stationary AR(2).
    Ar2 { phi1: T, phi2: T, dim: usize },
    /// `Σ* = (1, −ρᵀ; −ρ, I + ρρᵀ)`, `dim = len(ρ) + 1`.
    Star { rho: Vec<T> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution<T> {
    pub omega: SymMatrix<T>,
    pub sigma: SymMatrix<T>,
    pub gamma: SymMatrix<T>,
}

impl<T: Real> OracleSpec<T> {
    pub fn dim(&self) -> usize {
        match self {
            Self::BlockZeroCross { omega11, sigma22 } => omega11.dim() + sigma22.dim(),
            Self::BlockNonnegCross { omega11, omega22, .. } => omega11.dim() + omega22.dim(),
            Self::Ar1 { dim, .. } | Self::Ar2 { dim, .. } => *dim,
            Self::Star { rho } => rho.len() + 1,
        }
    }

    fn validate(&self) -> Result<(), OracleError> {
        let invalid = |m: &str| Err(OracleError::InvalidSpec(m.to_string()));
        match self {
            Self::BlockZeroCross { omega11, sigma22 } => {
                if !omega11.is_m_matrix() {
                    return invalid("Ω₁₁ must be a positive definite M-matrix");
                }
                if !sigma22.is_m_matrix() {
                    return invalid("Σ₂₂ must be a positive definite M-matrix");
                }
            }
            Self::BlockNonnegCross { omega11, omega22, omega12 } => {
                if !omega11.is_m_matrix() || !omega22.is_m_matrix() {
                    return invalid("diagonal blocks must be positive definite M-matrices");
                }
                if omega12.rows() != omega11.dim() || omega12.cols() != omega22.dim() {
                    return invalid("cross block must be p₁ × p₂");
                }
                if omega12.as_slice().iter().any(|&x| x < T::zero()) {
                    return invalid("cross block must be entrywise non-negative");
                }
            }
            Self::Ar1 { rho, dim } => {
                if *dim < 2 {
                    return invalid("dimension must be at least 2");
                }
                if !(rho.abs() < T::one()) {
                    return invalid("AR(1) requires |ρ| < 1");
                }
                if *rho < T::zero() && dim % 2 != 0 {
                    return invalid("negative ρ requires an even dimension");
                }
            }
            Self::Ar2 { phi1, phi2, dim } => {
                if *dim < 3 {
                    return invalid("dimension must be at least 3");
                }
                if !ar2_is_stationary(*phi1, *phi2) {
                    return invalid("AR(2) parameters violate stationarity");
                }
            }
            Self::Star { rho } => {
                if rho.is_empty() {
                    return invalid("ρ must have at least one entry");
                }
            }
        }
        Ok(())
    }
}

/// Both roots of `1 − φ₁z − φ₂z²` lie outside the unit circle.
pub fn ar2_is_stationary<T: Real>(phi1: T, phi2: T) -> bool {
    if phi2 == T::zero() {
        return phi1.abs() < T::one();
    }
    let two = T::lit(2.0);
    let disc = phi1 * phi1 + T::lit(4.0) * phi2;
    if disc >= T::zero() {
        let r = disc.sqrt();
        [(-phi1 + r) / (two * phi2), (-phi1 - r) / (two * phi2)].iter().all(|z| z.abs() > T::one())
    } else {
        // complex pair with |z|² = −1/φ₂
        -T::one() / phi2 > T::one()
    }
}

/// Autocorrelations `ρ_0..ρ_{len−1}` of a unit-variance stationary AR(2).
pub fn ar2_autocorrelations<T: Real>(phi1: T, phi2: T, len: usize) -> Vec<T> {
    let mut r = Vec::with_capacity(len);
    for l in 0..len {
        let v = match l {
            0 => T::one(),
            1 => phi1 / (T::one() - phi2),
            _ => phi1 * r[l - 1] + phi2 * r[l - 2],
        };
        r.push(v);
    }
    r
}

/// `σ_jk = ρ^{|j−k|}`.
pub fn ar1_covariance<T: Real>(rho: T, dim: usize) -> SymMatrix<T> {
    SymMatrix::from_fn(dim, |j, k| rho.powi((k - j) as i32))
}

/// Tridiagonal inverse of [`ar1_covariance`].
pub fn ar1_precision<T: Real>(rho: T, dim: usize) -> SymMatrix<T> {
    let c = T::one() - rho * rho;
    SymMatrix::from_fn(dim, |j, k| {
        if j == k {
            if dim == 1 {
                T::one()
            } else if j == 0 || j == dim - 1 {
                T::one() / c
            } else {
                (T::one() + rho * rho) / c
            }
        } else if k == j + 1 {
            -rho / c
        } else {
            T::zero()
        }
    })
}

fn block_diag<T: Real>(a: &SymMatrix<T>, b: &SymMatrix<T>) -> SymMatrix<T> {
    let p1 = a.dim();
    SymMatrix::from_fn(p1 + b.dim(), |j, k| {
        if k < p1 {
            a.get(j, k)
        } else if j >= p1 {
            b.get(j - p1, k - p1)
        } else {
            T::zero()
        }
    })
}

fn inverse<T: Real>(a: &SymMatrix<T>) -> Result<SymMatrix<T>, OracleError> {
    Ok(cholesky(a)?.inverse())
}

/// `(Σ*, Ω*)` for a specification.
pub fn population_pair<T: Real>(spec: &OracleSpec<T>) -> Result<(SymMatrix<T>, SymMatrix<T>), OracleError> {
    spec.validate()?;
    Ok(match spec {
        OracleSpec::BlockZeroCross { omega11, sigma22 } => {
            (block_diag(&inverse(omega11)?, sigma22), block_diag(omega11, &inverse(sigma22)?))
        }
        OracleSpec::BlockNonnegCross { omega11, omega22, omega12 } => {
            let p1 = omega11.dim();
            let omega = SymMatrix::from_fn(p1 + omega22.dim(), |j, k| {
                if k < p1 {
                    omega11.get(j, k)
                } else if j >= p1 {
                    omega22.get(j - p1, k - p1)
                } else {
                    omega12.get(j, k - p1)
                }
            });
            let sigma = cholesky(&omega)
                .map_err(|_| OracleError::InvalidSpec("Ω* must be positive definite".into()))?
                .inverse();
            (sigma, omega)
        }
        OracleSpec::Ar1 { rho, dim } => (ar1_covariance(*rho, *dim), ar1_precision(*rho, *dim)),
        OracleSpec::Ar2 { phi1, phi2, dim } if *phi2 == T::zero() => {
            (ar1_covariance(*phi1, *dim), ar1_precision(*phi1, *dim))
        }
        OracleSpec::Ar2 { phi1, phi2, dim } => {
            let r = ar2_autocorrelations(*phi1, *phi2, *dim);
            let sigma = SymMatrix::from_fn(*dim, |j, k| r[k - j]);
            // the precision of an AR(2) is banded with bandwidth two
            let omega = inverse(&sigma)?;
            let omega = SymMatrix::from_fn(*dim, |j, k| if k - j > 2 { T::zero() } else { omega.get(j, k) });
            (sigma, omega)
        }
        OracleSpec::Star { rho } => {
            let norm2: T = rho.iter().map(|&r| r * r).sum();
            let p = rho.len() + 1;
            let sigma = SymMatrix::from_fn(p, |j, k| match (j, k) {
                (0, 0) => T::one(),
                (0, k) => -rho[k - 1],
                (j, k) => rho[j - 1] * rho[k - 1] + if j == k { T::one() } else { T::zero() },
            });
            let omega = SymMatrix::from_fn(p, |j, k| match (j, k) {
                (0, 0) => T::one() + norm2,
                (0, k) => rho[k - 1],
                (j, k) => {
                    if j == k {
                        T::one()
                    } else {
                        T::zero()
                    }
                }
            });
            (sigma, omega)
        }
    })
}

/// `(Ω•, Σ•, Γ•)`: the minimizer of `-log det Ω + tr(Ω Σ*)` over M-matrices, its inverse,
/// and the dual multiplier.
pub fn oracle_solution<T: Real>(spec: &OracleSpec<T>) -> Result<OracleSolution<T>, OracleError> {
    let (sigma_star, omega_star) = population_pair(spec)?;
    let p = spec.dim();
    let (omega, sigma) = match spec {
        OracleSpec::BlockZeroCross { omega11, sigma22 } => {
            let d22 = sigma22.diagonal_part();
            let d22_inv = SymMatrix::from_diagonal(&d22.diagonal().iter().map(|&x| T::one() / x).collect::<Vec<_>>());
            (block_diag(omega11, &d22_inv), block_diag(&inverse(omega11)?, &d22))
        }
        OracleSpec::BlockNonnegCross { omega11, .. } => {
            let p1 = omega11.dim();
            let idx1: Vec<usize> = (0..p1).collect();
            let idx2: Vec<usize> = (p1..p).collect();
            let s11 = sigma_star.principal_submatrix(&idx1);
            let s22 = sigma_star.principal_submatrix(&idx2);
            (block_diag(&inverse(&s11)?, &inverse(&s22)?), block_diag(&s11, &s22))
        }
        OracleSpec::Ar1 { rho, dim } => {
            if *rho >= T::zero() {
                (omega_star.clone(), sigma_star.clone())
            } else {
                // split into the two parity chains, each an AR(1) with φ = ρ²
                let phi = *rho * *rho;
                let half = dim / 2;
                let chain = ar1_precision(phi, half);
                let omega =
                    SymMatrix::from_fn(*dim, |j, k| if (k - j) % 2 == 0 { chain.get(j / 2, k / 2) } else { T::zero() });
                let sigma =
                    SymMatrix::from_fn(*dim, |j, k| if (k - j) % 2 == 0 { sigma_star.get(j, k) } else { T::zero() });
                (omega, sigma)
            }
        }
        OracleSpec::Ar2 { phi1, phi2, dim } => {
            if !(T::lit(4.0) * phi2.abs() < *phi1) {
                return Err(OracleError::UnsupportedRegime("closed form requires 4|φ₂| < φ₁".to_string()));
            }
            if *phi2 >= T::zero() {
                (omega_star.clone(), sigma_star.clone())
            } else {
                let rho1 = *phi1 / (T::one() - *phi2);
                // the AR(1) fit needs ρ_ℓ <= ρ₁^ℓ at every lag; with complex roots the
                // autocorrelations oscillate and this can fail even under 4|φ₂| < φ₁
                let r = ar2_autocorrelations(*phi1, *phi2, *dim);
                if let Some(l) = (2..*dim).find(|&l| r[l] > rho1.powi(l as i32)) {
                    return Err(OracleError::UnsupportedRegime(format!(
                        "autocorrelation at lag {l} exceeds the AR(1) envelope"
                    )));
                }
                (ar1_precision(rho1, *dim), ar1_covariance(rho1, *dim))
            }
        }
        OracleSpec::Star { rho } => {
            let rt: Vec<T> = rho.iter().map(|&r| r.min(T::zero())).collect();
            let delta: Vec<T> = rho.iter().zip(&rt).map(|(&r, &t)| r - t).collect();
            let rt2: T = rt.iter().map(|&x| x * x).sum();
            let d2: T = delta.iter().map(|&x| x * x).sum();
            let omega = SymMatrix::from_fn(p, |j, k| match (j, k) {
                (0, 0) => T::one() + rt2,
                (0, k) => rt[k - 1],
                (j, k) => {
                    let id = if j == k { T::one() } else { T::zero() };
                    id - delta[j - 1] * delta[k - 1] / (T::one() + d2)
                }
            });
            let two = T::lit(2.0);
            let sigma = SymMatrix::from_fn(p, |j, k| match (j, k) {
                (0, 0) => T::one(),
                (0, k) => -rt[k - 1],
                (j, k) => {
                    let (a, b) = (j - 1, k - 1);
                    let id = if j == k { T::one() } else { T::zero() };
                    id + rho[a] * rho[b] - rho[a] * rt[b] - rt[a] * rho[b] + two * rt[a] * rt[b]
                }
            });
            (omega, sigma)
        }
    };
    let gamma = sigma.sub(&sigma_star);
    Ok(OracleSolution { omega, sigma, gamma })
}

//! Synthetic ground-truth models and seeded Gaussian sampling.
//!
//! Every instance draws from a single ChaCha20 seed split into independent streams:
//! stream 0 for random graph structure, stream 1 for training samples and stream 2 for
//! validation samples.

use attractor_core::linalg::{cholesky, top_eigenvalue, LinalgError};
use attractor_core::oracles::{ar1_covariance, ar1_precision};
use attractor_core::{EdgeSet, Matrix, SymMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const STRUCTURE_STREAM: u64 = 0;
pub const TRAIN_STREAM: u64 = 1;
pub const VALIDATION_STREAM: u64 = 2;
/// Retries of the random-graph draw use streams `RETRY_STREAM_BASE + attempt`.
const RETRY_STREAM_BASE: u64 = 16;
const MAX_GRAPH_ATTEMPTS: u64 = 32;

pub const CHAIN_RHO: f64 = 0.9;
pub const GRID_DELTA_FACTOR: f64 = 1.05;
pub const STAR_SCALE: f64 = 0.6;
pub const DECAY_RATE: f64 = 1.2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DatagenError {
    #[error("invalid setup: {0}")]
    InvalidSpec(String),
    #[error("random graph draw produced no edges after {attempts} attempts")]
    GenerationFailure { attempts: u64 },
    #[error("sample matrix has no rows")]
    EmptySample,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Ground-truth structure of a synthetic experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Setup {
    /// AR(1) with `σ_jk = 0.9^{|j−k|}`.
    Chain { p: usize },
    /// 4-neighbour lattice on `side × side` vertices.
    Grid2d { side: usize },
    /// 6-neighbour lattice on `side³` vertices.
    Grid3d { side: usize },
    /// Erdős–Rényi adjacency with edge probability `density`, or exactly
    /// `round(density · p(p−1)/2)` edges when `exact_count` is set.
    Random {
        p: usize,
        #[serde(default = "default_density")]
        density: f64,
        #[serde(default)]
        exact_count: bool,
    },
    /// Hub joined to its first `d` leaves.
    Star { p: usize, d: usize },
    /// `ω_jk = −exp(−1.2 |j−k|)` off the diagonal, unit diagonal.
    Decay { p: usize },
    /// `Σ* = 0.3 I + 0.7 𝟙𝟙ᵀ`.
    Dense { p: usize },
    /// `Σ* = bdiag((1 ρ; ρ 1), I_{p−2})`.
    SingleEdge { p: usize, rho: f64 },
}

fn default_density() -> f64 {
    0.01
}

impl Setup {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Chain { .. } => "chain",
            Self::Grid2d { .. } => "grid",
            Self::Grid3d { .. } => "grid3",
            Self::Random { .. } => "random",
            Self::Star { .. } => "star",
            Self::Decay { .. } => "decay",
            Self::Dense { .. } => "dense",
            Self::SingleEdge { .. } => "single_edge",
        }
    }

    pub fn dim(&self) -> usize {
        match *self {
            Self::Chain { p }
            | Self::Random { p, .. }
            | Self::Star { p, .. }
            | Self::Decay { p }
            | Self::Dense { p }
            | Self::SingleEdge { p, .. } => p,
            Self::Grid2d { side } => side * side,
            Self::Grid3d { side } => side * side * side,
        }
    }

    /// Whether the ground truth is sparse enough for edge-recovery metrics.
    pub fn has_sparse_truth(&self) -> bool {
        !matches!(self, Self::Decay { .. })
    }

    pub fn validate(&self) -> Result<(), DatagenError> {
        let bad = |m: &str| Err(DatagenError::InvalidSpec(format!("{}: {m}", self.name())));
        match *self {
            Self::Grid2d { side } | Self::Grid3d { side } if side < 2 => bad("side must be at least 2"),
            Self::Random { density, .. } if !(density > 0.0 && density <= 1.0) => bad("density must lie in (0, 1]"),
            Self::Star { p, d } if d == 0 || d >= p => bad("need 1 <= d < p"),
            Self::SingleEdge { rho, .. } if !(rho.abs() < 1.0) => bad("need |rho| < 1"),
            _ if self.dim() < 2 => bad("dimension must be at least 2"),
            _ => Ok(()),
        }
    }

    /// `(Σ*, Ω*)`; `seed` only matters for `Random`.
    pub fn population(&self, seed: u64) -> Result<(SymMatrix<f64>, SymMatrix<f64>), DatagenError> {
        self.validate()?;
        Ok(match *self {
            Self::Chain { p } => (ar1_covariance(CHAIN_RHO, p), ar1_precision(CHAIN_RHO, p)),
            Self::Grid2d { side } => normalized_from_adjacency(&lattice_adjacency(&[side, side]))?,
            Self::Grid3d { side } => normalized_from_adjacency(&lattice_adjacency(&[side, side, side]))?,
            Self::Random { p, density, exact_count } => {
                let b = random_adjacency(p, density, exact_count, seed)?;
                normalized_from_adjacency(&b)?
            }
            Self::Star { p, d } => {
                let scale = STAR_SCALE / (d as f64).powf(0.25);
                let rho: Vec<f64> = (0..p - 1).map(|i| if i < d { scale } else { 0.0 }).collect();
                let norm2: f64 = rho.iter().map(|r| r * r).sum();
                let sigma = SymMatrix::from_fn(p, |j, k| match (j, k) {
                    (0, 0) => 1.0,
                    (0, k) => rho[k - 1],
                    (j, k) => rho[j - 1] * rho[k - 1] + if j == k { 1.0 } else { 0.0 },
                });
                let omega = SymMatrix::from_fn(p, |j, k| match (j, k) {
                    (0, 0) => 1.0 + norm2,
                    (0, k) => -rho[k - 1],
                    (j, k) => {
                        if j == k {
                            1.0
                        } else {
                            0.0
                        }
                    }
                });
                (sigma, omega)
            }
            Self::Decay { p } => {
                let omega =
                    SymMatrix::from_fn(p, |j, k| if j == k { 1.0 } else { -(-DECAY_RATE * (k - j) as f64).exp() });
                (cholesky(&omega)?.inverse(), omega)
            }
            Self::Dense { p } => {
                let (a, b) = (0.3, 0.7);
                let sigma = SymMatrix::from_fn(p, |j, k| if j == k { a + b } else { b });
                // Sherman–Morrison: (aI + b𝟙𝟙ᵀ)⁻¹ = (I − b/(a + pb) 𝟙𝟙ᵀ)/a
                let c = b / (a + p as f64 * b);
                let omega = SymMatrix::from_fn(p, |j, k| (if j == k { 1.0 } else { 0.0 } - c) / a);
                (sigma, omega)
            }
            Self::SingleEdge { p, rho } => {
                let c = 1.0 - rho * rho;
                let sigma = SymMatrix::from_fn(p, |j, k| match (j, k) {
                    (0, 1) => rho,
                    _ if j == k => 1.0,
                    _ => 0.0,
                });
                let omega = SymMatrix::from_fn(p, |j, k| match (j, k) {
                    (0, 1) => -rho / c,
                    (0, 0) | (1, 1) => 1.0 / c,
                    _ if j == k => 1.0,
                    _ => 0.0,
                });
                (sigma, omega)
            }
        })
    }
}

/// A setup together with its per-set sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetupSpec {
    pub setup: Setup,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticInstance {
    pub sigma_star: SymMatrix<f64>,
    pub omega_star: SymMatrix<f64>,
    pub edges_star: EdgeSet,
    pub train: Matrix<f64>,
    pub validation: Matrix<f64>,
    pub seed: u64,
}

pub fn make_instance(spec: &SetupSpec, seed: u64) -> Result<SyntheticInstance, DatagenError> {
    let (sigma_star, omega_star) = spec.setup.population(seed)?;
    debug_assert!(omega_star.off_diagonal_nonpositive(0.0));
    let edges_star = EdgeSet::negative_support(&omega_star);
    let train = sample_gaussian_stream(&sigma_star, spec.n, seed, TRAIN_STREAM)?;
    let validation = sample_gaussian_stream(&sigma_star, spec.n, seed, VALIDATION_STREAM)?;
    Ok(SyntheticInstance { sigma_star, omega_star, edges_star, train, validation, seed })
}

/// `n` i.i.d. rows from `N(0, Σ)` on stream 0 of `seed`.
pub fn sample_gaussian(sigma: &SymMatrix<f64>, n: usize, seed: u64) -> Result<Matrix<f64>, DatagenError> {
    sample_gaussian_stream(sigma, n, seed, STRUCTURE_STREAM)
}

pub fn sample_gaussian_stream(
    sigma: &SymMatrix<f64>,
    n: usize,
    seed: u64,
    stream: u64,
) -> Result<Matrix<f64>, DatagenError> {
    let mut rng = stream_rng(seed, stream);
    sample_gaussian_with(sigma, n, &mut rng)
}

/// Rows `x = L z` with `Σ = L Lᵀ` and `z` standard normal.
pub fn sample_gaussian_with<R: Rng>(
    sigma: &SymMatrix<f64>,
    n: usize,
    rng: &mut R,
) -> Result<Matrix<f64>, DatagenError> {
    let p = sigma.dim();
    let l = cholesky(sigma)?;
    let mut x = Matrix::zeros(n, p);
    let mut z = vec![0.0; p];
    for i in 0..n {
        z.iter_mut().for_each(|v| *v = StandardNormal.sample(rng));
        let row = x.row_mut(i);
        for (j, out) in row.iter_mut().enumerate() {
            *out = (0..=j).map(|k| l.l(j, k) * z[k]).sum();
        }
    }
    Ok(x)
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MeanPolicy {
    /// Mean known to be zero.
    #[default]
    KnownZero,
    /// Subtract the column means.
    Center,
}

/// `(1/n) Σᵢ (xᵢ − μ)(xᵢ − μ)ᵀ` with `μ = 0` or the sample mean.
pub fn sample_covariance(x: &Matrix<f64>, policy: MeanPolicy) -> Result<SymMatrix<f64>, DatagenError> {
    let (n, p) = (x.rows(), x.cols());
    if n == 0 {
        return Err(DatagenError::EmptySample);
    }
    let mean: Vec<f64> = match policy {
        MeanPolicy::KnownZero => vec![0.0; p],
        MeanPolicy::Center => (0..p).map(|j| (0..n).map(|i| x.get(i, j)).sum::<f64>() / n as f64).collect(),
    };
    let mut acc = vec![0.0; p * p];
    let mut centered = vec![0.0; p];
    for i in 0..n {
        for (j, c) in centered.iter_mut().enumerate() {
            *c = x.get(i, j) - mean[j];
        }
        for j in 0..p {
            let cj = centered[j];
            for k in j..p {
                acc[j * p + k] += cj * centered[k];
            }
        }
    }
    Ok(SymMatrix::from_fn(p, |j, k| acc[j * p + k] / n as f64))
}

/// Adjacency of the nearest-neighbour lattice with the given side lengths (row-major labels).
pub fn lattice_adjacency(sides: &[usize]) -> SymMatrix<f64> {
    let p: usize = sides.iter().product();
    let mut b = SymMatrix::zeros(p);
    let mut stride = 1;
    for &side in sides.iter().rev() {
        for v in 0..p {
            if (v / stride) % side + 1 < side {
                b.set(v, v + stride, 1.0);
            }
        }
        stride *= side;
    }
    b
}

fn random_adjacency(p: usize, density: f64, exact_count: bool, seed: u64) -> Result<SymMatrix<f64>, DatagenError> {
    let pairs: Vec<(usize, usize)> = (0..p).flat_map(|j| ((j + 1)..p).map(move |k| (j, k))).collect();
    for attempt in 0..MAX_GRAPH_ATTEMPTS {
        let stream = if attempt == 0 { STRUCTURE_STREAM } else { RETRY_STREAM_BASE + attempt };
        let mut rng = stream_rng(seed, stream);
        let mut b = SymMatrix::zeros(p);
        let chosen: Vec<(usize, usize)> = if exact_count {
            let m = (density * pairs.len() as f64).round() as usize;
            rand::seq::index::sample(&mut rng, pairs.len(), m.min(pairs.len())).into_iter().map(|i| pairs[i]).collect()
        } else {
            pairs.iter().copied().filter(|_| rng.random_bool(density)).collect()
        };
        if chosen.is_empty() {
            log::debug!("random graph attempt {attempt} drew no edges; redrawing");
            continue;
        }
        for (j, k) in chosen {
            b.set(j, k, 1.0);
        }
        return Ok(b);
    }
    Err(DatagenError::GenerationFailure { attempts: MAX_GRAPH_ATTEMPTS })
}

/// `Ω̃ = δI − B` with `δ = 1.05 λ₁(B)`, rescaled so that `Σ* = Ω*⁻¹` has unit diagonal.
fn normalized_from_adjacency(b: &SymMatrix<f64>) -> Result<(SymMatrix<f64>, SymMatrix<f64>), DatagenError> {
    let p = b.dim();
    let lambda = top_eigenvalue(b, 1e-12)?;
    if !(lambda > 0.0) {
        return Err(DatagenError::InvalidSpec("adjacency has no edges".into()));
    }
    let delta = GRID_DELTA_FACTOR * lambda;
    let omega_tilde = SymMatrix::from_fn(p, |j, k| if j == k { delta } else { -b.get(j, k) });
    let sigma_tilde = cholesky(&omega_tilde)?.inverse();
    let d: Vec<f64> = sigma_tilde.diagonal().iter().map(|s| s.sqrt()).collect();
    let omega = SymMatrix::from_fn(p, |j, k| d[j] * omega_tilde.get(j, k) * d[k]);
    let sigma = SymMatrix::from_fn(p, |j, k| if j == k { 1.0 } else { sigma_tilde.get(j, k) / (d[j] * d[k]) });
    Ok((sigma, omega))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_population() {
        let (s, o) = Setup::Chain { p: 4 }.population(0).unwrap();
        assert!((s.get(0, 3) - 0.729).abs() < 1e-15);
        assert!((o.get(1, 2) + 0.9 / 0.19).abs() < 1e-12);
        assert!((o.get(1, 2) + 4.7368).abs() < 1e-4);
        assert_eq!(o.get(0, 2), 0.0);
    }

    #[test]
    fn star_population() {
        let (s, o) = Setup::Star { p: 5, d: 2 }.population(0).unwrap();
        let r = 0.6 / 2f64.powf(0.25);
        assert!((s.get(0, 1) - r).abs() < 1e-15 && s.get(0, 3) == 0.0);
        for j in 1..5 {
            for k in 1..5 {
                assert_eq!(o.get(j, k), if j == k { 1.0 } else { 0.0 });
            }
        }
        assert_eq!(EdgeSet::negative_support(&o), EdgeSet::from_pairs(5, [(0, 1), (0, 2)]));
        assert!(s.matmul(&o).max_abs_dev_from_identity() < 1e-12);
    }

    #[test]
    fn decay_population() {
        let (s, o) = Setup::Decay { p: 3 }.population(0).unwrap();
        assert!((o.get(0, 1) + (-1.2f64).exp()).abs() < 1e-15);
        assert!((o.get(0, 2) + (-2.4f64).exp()).abs() < 1e-15);
        assert!(cholesky(&o).is_ok());
        assert!(s.matmul(&o).max_abs_dev_from_identity() < 1e-12);
    }

    #[test]
    fn dense_population() {
        let (s, o) = Setup::Dense { p: 6 }.population(0).unwrap();
        assert!(s.matmul(&o).max_abs_dev_from_identity() < 1e-12);
        assert_eq!(EdgeSet::negative_support(&o).len(), 15);
    }

    #[test]
    fn lattice_neighbours() {
        let b = lattice_adjacency(&[3, 3]);
        let degree: Vec<f64> = (0..9).map(|v| b.row(v).iter().sum()).collect();
        assert_eq!(degree, vec![2.0, 3.0, 2.0, 3.0, 4.0, 3.0, 2.0, 3.0, 2.0]);
        assert_eq!(b.get(2, 3), 0.0);
        let b3 = lattice_adjacency(&[2, 2, 2]);
        assert!((0..8).all(|v| b3.row(v).iter().sum::<f64>() == 3.0));
    }

    #[test]
    fn grid_has_unit_diagonal() {
        let (s, o) = Setup::Grid2d { side: 4 }.population(0).unwrap();
        assert!(s.diagonal().iter().all(|d| (d - 1.0).abs() < 1e-8));
        assert!(o.off_diagonal_nonpositive(0.0));
        assert_eq!(EdgeSet::negative_support(&o).len(), 24);
        assert!(s.matmul(&o).max_abs_dev_from_identity() < 1e-8);
    }

    #[test]
    fn invalid_setups() {
        assert!(Setup::Star { p: 3, d: 3 }.validate().is_err());
        assert!(Setup::Grid2d { side: 1 }.validate().is_err());
        assert!(Setup::Random { p: 10, density: 0.0, exact_count: false }.validate().is_err());
        assert!(Setup::Chain { p: 1 }.validate().is_err());
    }

    #[test]
    fn sample_covariance_examples() {
        let x = Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let s = sample_covariance(&x, MeanPolicy::KnownZero).unwrap();
        assert_eq!(s.as_slice(), &[1.0, 2.0, 2.0, 4.0]);

        let x = Matrix::from_rows(&[vec![1.0, -3.0], vec![1.0, -3.0]]).unwrap();
        assert_eq!(sample_covariance(&x, MeanPolicy::Center).unwrap().max_abs(), 0.0);
        // (v, −v) already has zero mean, so centering leaves vvᵀ
        let x = Matrix::from_rows(&[vec![1.0, -3.0], vec![-1.0, 3.0]]).unwrap();
        assert_eq!(sample_covariance(&x, MeanPolicy::Center).unwrap().as_slice(), &[1.0, -3.0, -3.0, 9.0]);

        let x = Matrix::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]).unwrap();
        let s = sample_covariance(&x, MeanPolicy::KnownZero).unwrap();
        assert_eq!(s, SymMatrix::identity(3).scale(1.0 / 3.0));

        assert_eq!(sample_covariance(&Matrix::zeros(0, 3), MeanPolicy::Center), Err(DatagenError::EmptySample));
    }

    #[test]
    fn empty_sample_draw() {
        let x = sample_gaussian(&SymMatrix::identity(3), 0, 1).unwrap();
        assert_eq!((x.rows(), x.cols()), (0, 3));
    }
}

//! Hard thresholding, edge extraction and validation-driven threshold selection.

use std::collections::{BTreeSet, HashMap};

use crate::linalg::SymMatrix;
use crate::metrics::logdet_loss;
use crate::scalar::Real;
use crate::solver::{refit, SolveError, SolverOptions};

/// Set of unordered vertex pairs over `0..dim`, stored canonically as `(j, k)` with `j < k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EdgeSet {
    dim: usize,
    pairs: BTreeSet<(usize, usize)>,
}

impl EdgeSet {
    pub fn empty(dim: usize) -> Self {
        Self { dim, pairs: BTreeSet::new() }
    }

    pub fn complete(dim: usize) -> Self {
        let mut e = Self::empty(dim);
        for j in 0..dim {
            for k in (j + 1)..dim {
                e.pairs.insert((j, k));
            }
        }
        e
    }

    /// Builds an edge set from arbitrary pairs. Panics on a self-loop or out-of-range vertex.
    pub fn from_pairs(dim: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut e = Self::empty(dim);
        for (j, k) in pairs {
            e.insert(j, k);
        }
        e
    }

    /// Inserts `{j, k}`; returns whether it was new.
    pub fn insert(&mut self, j: usize, k: usize) -> bool {
        assert!(j != k, "self-loop ({j}, {j}) is not an edge");
        assert!(j < self.dim && k < self.dim, "vertex out of range for dimension {}", self.dim);
        self.pairs.insert((j.min(k), j.max(k)))
    }

    pub fn contains(&self, j: usize, k: usize) -> bool {
        j != k && self.pairs.contains(&(j.min(k), j.max(k)))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Canonical pairs in lexicographic order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs.iter().copied()
    }

    pub fn neighbors(&self, j: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .pairs
            .iter()
            .filter_map(|&(a, b)| {
                if a == j {
                    Some(b)
                } else if b == j {
                    Some(a)
                } else {
                    None
                }
            })
            .collect();
        out.sort_unstable();
        out
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.pairs.is_subset(&other.pairs)
    }

    /// Pairs `(j, k)` with `ω_jk < 0`.
    pub fn negative_support<T: Real>(omega: &SymMatrix<T>) -> Self {
        let p = omega.dim();
        let mut e = Self::empty(p);
        for j in 0..p {
            for k in (j + 1)..p {
                if omega.get(j, k) < T::zero() {
                    e.pairs.insert((j, k));
                }
            }
        }
        e
    }

    /// Applies a vertex relabeling `v -> perm[v]`.
    pub fn relabel(&self, perm: &[usize]) -> Self {
        Self::from_pairs(self.dim, self.iter().map(|(j, k)| (perm[j], perm[k])))
    }
}

/// Keeps the diagonal and every off-diagonal entry with `-ω_jk > t`; zeroes the rest.
/// The result need not be positive definite.
pub fn hard_threshold<T: Real>(omega: &SymMatrix<T>, t: T) -> SymMatrix<T> {
    SymMatrix::from_fn(omega.dim(), |j, k| {
        let w = omega.get(j, k);
        if j == k || -w > t {
            w
        } else {
            T::zero()
        }
    })
}

/// `Ê(t) = {(j,k) : -ω_jk > t}`.
pub fn edges_of<T: Real>(omega: &SymMatrix<T>, t: T) -> EdgeSet {
    EdgeSet::negative_support(&hard_threshold(omega, t))
}

/// Sorted quantile levels in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdGrid {
    quantiles: Vec<f64>,
}

impl ThresholdGrid {
    /// Returns `None` if any level is outside `[0, 1]` or not finite.
    pub fn new(mut quantiles: Vec<f64>) -> Option<Self> {
        if quantiles.iter().any(|q| !(0.0..=1.0).contains(q)) {
            return None;
        }
        quantiles.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        quantiles.dedup();
        Some(Self { quantiles })
    }

    /// `{0.7, 0.8, 0.9, 0.95, 0.99, 1}`.
    pub fn standard() -> Self {
        Self::new(vec![0.7, 0.8, 0.9, 0.95, 0.99, 1.0]).expect("valid grid")
    }

    pub fn quantiles(&self) -> &[f64] {
        &self.quantiles
    }

    /// Adds a level (e.g. the oracle quantile in benchmark mode).
    pub fn with(&self, q: f64) -> Option<Self> {
        let mut v = self.quantiles.clone();
        v.push(q);
        Self::new(v)
    }
}

/// Magnitudes `-ω_jk` of the strictly negative off-diagonal entries, ascending.
pub fn negative_magnitudes<T: Real>(omega: &SymMatrix<T>) -> Vec<T> {
    let p = omega.dim();
    let mut v = Vec::new();
    for j in 0..p {
        for k in (j + 1)..p {
            let w = omega.get(j, k);
            if w < T::zero() {
                v.push(-w);
            }
        }
    }
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite entries"));
    v
}

/// Nearest-rank quantile of the negative off-diagonal magnitudes.
///
/// `q = 0` (or no negative entries) maps to `t = 0`; otherwise `t` is the
/// `⌈q·m⌉`-th smallest of the `m` magnitudes, so `q = 1` yields the maximum and hence
/// the empty edge set.
pub fn threshold_at_quantile<T: Real>(magnitudes: &[T], q: f64) -> T {
    let m = magnitudes.len();
    if q <= 0.0 || m == 0 {
        return T::zero();
    }
    // the slack keeps `keep_quantile` levels like 1 − 3/10 from rounding up a rank
    let rank = ((q * m as f64 - 1e-9).ceil() as usize).clamp(1, m);
    magnitudes[rank - 1]
}

/// Quantile level that retains the `keep` largest magnitudes out of `m`
/// (the oracle level in benchmark mode where the true edge count is known).
pub fn keep_quantile(m: usize, keep: usize) -> f64 {
    if m == 0 {
        return 0.0;
    }
    1.0 - keep.min(m) as f64 / m as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint<T> {
    pub quantile: f64,
    pub threshold: T,
    pub n_edges: usize,
    /// Validation loss of the refit; `None` when the refit failed.
    pub loss: Option<T>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdSelection<T> {
    pub t_star: T,
    pub q_star: f64,
    pub edges: EdgeSet,
    pub refit_omega: SymMatrix<T>,
    pub per_t: Vec<GridPoint<T>>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SelectError {
    #[error("every grid point failed to refit")]
    AllRefitsFailed,
    #[error("threshold grid is empty")]
    EmptyGrid,
    #[error("dimension mismatch between estimate ({omega}) and covariance ({cov})")]
    DimensionMismatch { omega: usize, cov: usize },
}

/// Picks the threshold minimizing the validation loss `-log det Ω(t) + tr(Ω(t) S_val)` of the
/// refit on `S_train`. Ties go to the larger threshold (sparser model), then larger quantile.
pub fn select_threshold<T: Real>(
    omega: &SymMatrix<T>,
    s_val: &SymMatrix<T>,
    grid: &ThresholdGrid,
    s_train: &SymMatrix<T>,
    opts: &SolverOptions<T>,
) -> Result<ThresholdSelection<T>, SelectError> {
    if grid.quantiles().is_empty() {
        return Err(SelectError::EmptyGrid);
    }
    for cov in [s_val, s_train] {
        if cov.dim() != omega.dim() {
            return Err(SelectError::DimensionMismatch { omega: omega.dim(), cov: cov.dim() });
        }
    }
    let mags = negative_magnitudes(omega);
    let mut cache: HashMap<EdgeSet, Result<(SymMatrix<T>, T), String>> = HashMap::new();
    let mut per_t = Vec::with_capacity(grid.quantiles().len());
    let mut best: Option<(usize, T)> = None;

    for &q in grid.quantiles() {
        let t = threshold_at_quantile(&mags, q);
        let edges = edges_of(omega, t);
        let outcome = cache.entry(edges.clone()).or_insert_with(|| fit_and_score(s_train, s_val, &edges, opts)).clone();
        let (loss, error) = match outcome {
            Ok((_, loss)) => (Some(loss), None),
            Err(e) => (None, Some(e)),
        };
        if let Some(l) = loss {
            // grid is ascending in q, hence in t; `<=` keeps the later (sparser) point on ties
            if best.is_none_or(|(_, b)| l <= b) {
                best = Some((per_t.len(), l));
            }
        }
        per_t.push(GridPoint { quantile: q, threshold: t, n_edges: edges.len(), loss, error });
    }

    let (i, _) = best.ok_or(SelectError::AllRefitsFailed)?;
    let chosen = &per_t[i];
    let edges = edges_of(omega, chosen.threshold);
    let refit_omega = match &cache[&edges] {
        Ok((o, _)) => o.clone(),
        Err(_) => unreachable!("selected grid point has a successful refit"),
    };
    Ok(ThresholdSelection { t_star: chosen.threshold, q_star: chosen.quantile, edges, refit_omega, per_t })
}

fn fit_and_score<T: Real>(
    s_train: &SymMatrix<T>,
    s_val: &SymMatrix<T>,
    edges: &EdgeSet,
    opts: &SolverOptions<T>,
) -> Result<(SymMatrix<T>, T), String> {
    let est = match refit(s_train, edges, opts) {
        Ok(est) => est,
        Err(SolveError::SweepLimitReached { best }) => {
            log::warn!("refit on {} edges hit the sweep limit; using last iterate", edges.len());
            *best
        }
        Err(e) => return Err(e.to_string()),
    };
    let loss = logdet_loss(&est.omega, s_val).map_err(|e| e.to_string())?;
    Ok((est.omega, loss))
}

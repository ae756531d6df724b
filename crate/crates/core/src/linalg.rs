//! Dense symmetric linear algebra used throughout the estimator.
//!
//! Storage is full `p × p` row-major. Every mutation of a [`SymMatrix`] writes both
//! triangles, so `a[(j, k)] == a[(k, j)]` holds bit-for-bit at all times.

use std::ops::Index;

use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is not positive definite (pivot {index} = {pivot:e})")]
    NotPositiveDefinite { index: usize, pivot: f64 },
    #[error("iteration did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },
    #[error("matrix must have at least one row and column")]
    Empty,
}

/// Dense symmetric `p × p` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Real> SymMatrix<T> {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "SymMatrix dimension must be at least 1");
        Self { dim, data: vec![T::zero(); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_diagonal(&vec![T::one(); dim])
    }

    pub fn from_diagonal(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (j, &d) in diag.iter().enumerate() {
            m.data[j * m.dim + j] = d;
        }
        m
    }

    /// Builds a matrix by evaluating `f(j, k)` on the upper triangle (`j <= k`) and mirroring.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut m = Self::zeros(dim);
        for j in 0..dim {
            for k in j..dim {
                m.set(j, k, f(j, k));
            }
        }
        m
    }

    /// Builds a matrix from rows, requiring `|a_jk - a_kj| <= rel_tol * max|a|`.
    /// The stored value is the average of the two triangles.
    pub fn from_rows(rows: &[Vec<T>], rel_tol: T) -> Result<Self, LinalgError> {
        let dim = rows.len();
        if dim == 0 {
            return Err(LinalgError::Empty);
        }
        for r in rows {
            if r.len() != dim {
                return Err(LinalgError::DimensionMismatch { expected: dim, found: r.len() });
            }
        }
        let scale = rows.iter().flat_map(|r| r.iter()).fold(T::zero(), |m, &x| m.max(x.abs()));
        let half = T::lit(0.5);
        for j in 0..dim {
            for k in (j + 1)..dim {
                if (rows[j][k] - rows[k][j]).abs() > rel_tol * scale {
                    return Err(LinalgError::NotSymmetric { row: j, col: k });
                }
            }
        }
        Ok(Self::from_fn(dim, |j, k| (rows[j][k] + rows[k][j]) * half))
    }

    /// Builds a matrix from a row-major slice that must be exactly symmetric.
    pub fn from_row_major(dim: usize, data: &[T]) -> Result<Self, LinalgError> {
        if dim == 0 {
            return Err(LinalgError::Empty);
        }
        if data.len() != dim * dim {
            return Err(LinalgError::DimensionMismatch { expected: dim * dim, found: data.len() });
        }
        for j in 0..dim {
            for k in (j + 1)..dim {
                if data[j * dim + k] != data[k * dim + j] {
                    return Err(LinalgError::NotSymmetric { row: j, col: k });
                }
            }
        }
        Ok(Self { dim, data: data.to_vec() })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, j: usize, k: usize) -> T {
        self.data[j * self.dim + k]
    }

    /// Sets entries `(j, k)` and `(k, j)`.
    #[inline]
    pub fn set(&mut self, j: usize, k: usize, v: T) {
        self.data[j * self.dim + k] = v;
        self.data[k * self.dim + j] = v;
    }

    #[inline]
    pub fn row(&self, j: usize) -> &[T] {
        &self.data[j * self.dim..(j + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.dim).map(|j| self.get(j, j)).collect()
    }

    /// `D(A)`: the diagonal part of the matrix.
    pub fn diagonal_part(&self) -> Self {
        Self::from_diagonal(&self.diagonal())
    }

    pub fn trace(&self) -> T {
        (0..self.dim).map(|j| self.get(j, j)).sum()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
    }

    pub fn max_abs_off_diagonal(&self) -> T {
        let mut m = T::zero();
        for j in 0..self.dim {
            for k in (j + 1)..self.dim {
                m = m.max(self.get(j, k).abs());
            }
        }
        m
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.dim);
        (0..self.dim).map(|j| dot(self.row(j), x)).collect()
    }

    /// Plain (generally non-symmetric) product `self * other`, row-major.
    pub fn matmul(&self, other: &Self) -> Matrix<T> {
        assert_eq!(self.dim, other.dim);
        let p = self.dim;
        let mut out = Matrix::zeros(p, p);
        for i in 0..p {
            let a = self.row(i);
            let dst = out.row_mut(i);
            for (k, &aik) in a.iter().enumerate() {
                if aik == T::zero() {
                    continue;
                }
                for (d, &b) in dst.iter_mut().zip(other.row(k)) {
                    *d += aik * b;
                }
            }
        }
        out
    }

    /// `tr(self · other)` for symmetric operands, i.e. the Frobenius inner product.
    pub fn trace_product(&self, other: &Self) -> T {
        assert_eq!(self.dim, other.dim);
        self.data.iter().zip(&other.data).map(|(&a, &b)| a * b).sum()
    }

    pub fn map(&self, mut f: impl FnMut(T) -> T) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    pub fn zip_map(&self, other: &Self, mut f: impl FnMut(T, T) -> T) -> Self {
        assert_eq!(self.dim, other.dim);
        Self { dim: self.dim, data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect() }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn scale(&self, c: T) -> Self {
        self.map(|x| x * c)
    }

    /// `D A D` for a positive diagonal `D` given by its entries.
    pub fn congruence_diag(&self, d: &[T]) -> Self {
        assert_eq!(d.len(), self.dim);
        Self::from_fn(self.dim, |j, k| d[j] * self.get(j, k) * d[k])
    }

    /// `Π A Πᵀ` where row `j` of the result is row `perm[j]` of `A`.
    pub fn permute(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.dim);
        Self::from_fn(self.dim, |j, k| self.get(perm[j], perm[k]))
    }

    /// Principal submatrix on the given (ordered) index set.
    pub fn principal_submatrix(&self, idx: &[usize]) -> Self {
        Self::from_fn(idx.len(), |a, b| self.get(idx[a], idx[b]))
    }

    /// Rescales to unit diagonal: `D^{-1/2} A D^{-1/2}`.
    pub fn to_correlation(&self) -> Self {
        let d: Vec<T> = self.diagonal().into_iter().map(|x| T::one() / x.sqrt()).collect();
        self.congruence_diag(&d)
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.dim).all(|j| ((j + 1)..self.dim).all(|k| self.get(j, k) == self.get(k, j)))
    }

    /// Every off-diagonal entry is `<= tol`.
    pub fn off_diagonal_nonpositive(&self, tol: T) -> bool {
        (0..self.dim).all(|j| ((j + 1)..self.dim).all(|k| self.get(j, k) <= tol))
    }

    /// Membership in the cone of positive definite M-matrices.
    pub fn is_m_matrix(&self) -> bool {
        self.off_diagonal_nonpositive(T::zero()) && cholesky(self).is_ok()
    }

    pub fn cast<U: Real>(&self) -> SymMatrix<U> {
        SymMatrix { dim: self.dim, data: self.data.iter().map(|&x| U::lit(x.as_f64())).collect() }
    }
}

impl<T: Real> Index<(usize, usize)> for SymMatrix<T> {
    type Output = T;

    #[inline]
    fn index(&self, (j, k): (usize, usize)) -> &T {
        &self.data[j * self.dim + k]
    }
}

/// Dense row-major rectangular matrix (sample matrices, general products).
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::DimensionMismatch { expected: rows * cols, found: data.len() });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self, LinalgError> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(LinalgError::DimensionMismatch { expected: cols, found: r.len() });
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows: rows.len(), cols, data })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    /// Maximum absolute deviation from the identity (square matrices only).
    pub fn max_abs_dev_from_identity(&self) -> T {
        assert_eq!(self.rows, self.cols);
        let mut m = T::zero();
        for i in 0..self.rows {
            for j in 0..self.cols {
                let target = if i == j { T::one() } else { T::zero() };
                m = m.max((self.get(i, j) - target).abs());
            }
        }
        m
    }
}

impl<T: Real> Index<(usize, usize)> for Matrix<T> {
    type Output = T;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub fn norm_inf<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
}

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyFactor<T> {
    dim: usize,
    // row-major lower triangle, full storage
    lower: Vec<T>,
}

impl<T: Real> CholeskyFactor<T> {
    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn l(&self, i: usize, j: usize) -> T {
        self.lower[i * self.dim + j]
    }

    /// `2 Σ log L_jj`.
    pub fn log_det(&self) -> T {
        let two = T::lit(2.0);
        (0..self.dim).map(|j| self.l(j, j).ln()).sum::<T>() * two
    }

    /// Solves `A x = b` by forward and back substitution.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        assert_eq!(b.len(), self.dim, "right-hand side length must equal the factor dimension");
        let n = self.dim;
        let mut y = b.to_vec();
        for i in 0..n {
            let row = &self.lower[i * n..i * n + i];
            let s = dot(row, &y[..i]);
            y[i] = (y[i] - s) / self.l(i, i);
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= self.l(k, i) * y[k];
            }
            y[i] = s / self.l(i, i);
        }
        y
    }

    /// `A⁻¹`, symmetrized.
    pub fn inverse(&self) -> SymMatrix<T> {
        let n = self.dim;
        let mut cols = Vec::with_capacity(n);
        let mut e = vec![T::zero(); n];
        for j in 0..n {
            e[j] = T::one();
            cols.push(self.solve(&e));
            e[j] = T::zero();
        }
        let half = T::lit(0.5);
        SymMatrix::from_fn(n, |j, k| (cols[k][j] + cols[j][k]) * half)
    }

    /// Reconstructs `L Lᵀ`.
    pub fn reconstruct(&self) -> SymMatrix<T> {
        let n = self.dim;
        SymMatrix::from_fn(n, |i, j| {
            let m = i.min(j);
            (0..=m).map(|k| self.l(i, k) * self.l(j, k)).sum()
        })
    }
}

/// Cholesky factorization. A pivot `<= 1e-12 · max_j a_jj` (or non-finite) is reported as
/// [`LinalgError::NotPositiveDefinite`] with its index.
pub fn cholesky<T: Real>(a: &SymMatrix<T>) -> Result<CholeskyFactor<T>, LinalgError> {
    let n = a.dim();
    let max_diag = a.diagonal().into_iter().fold(T::zero(), |m, x| m.max(x.abs()));
    let floor = T::lit(1e-12) * max_diag;
    let mut lower = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..=i {
            let s = a.get(i, j) - dot(&lower[i * n..i * n + j], &lower[j * n..j * n + j]);
            if i == j {
                if !(s > floor) || !s.is_finite() {
                    return Err(LinalgError::NotPositiveDefinite { index: i, pivot: s.as_f64() });
                }
                lower[i * n + i] = s.sqrt();
            } else {
                lower[i * n + j] = s / lower[j * n + j];
            }
        }
    }
    Ok(CholeskyFactor { dim: n, lower })
}

pub fn log_det<T: Real>(f: &CholeskyFactor<T>) -> T {
    f.log_det()
}

pub fn solve_spd<T: Real>(f: &CholeskyFactor<T>, b: &[T]) -> Vec<T> {
    f.solve(b)
}

/// Inverse of a strictly positive definite matrix.
pub fn spd_inverse<T: Real>(a: &SymMatrix<T>) -> Result<SymMatrix<T>, LinalgError> {
    Ok(cholesky(a)?.inverse())
}

const POWER_ITERATION_CAP: usize = 200_000;

/// Largest eigenvalue of an entrywise non-negative symmetric matrix by shifted power iteration.
///
/// Iterates on `A + I` from the all-ones vector and stops once the residual
/// `‖A v − μ v‖₂` of the Rayleigh quotient `μ` drops below `tol`.
pub fn top_eigenvalue<T: Real>(a: &SymMatrix<T>, tol: T) -> Result<T, LinalgError> {
    let n = a.dim();
    let norm = |v: &[T]| dot(v, v).sqrt();
    let mut v = vec![T::one(); n];
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    for it in 0..POWER_ITERATION_CAP {
        let av = a.matvec(&v);
        let mu = dot(&v, &av);
        let resid = av.iter().zip(&v).map(|(&x, &y)| (x - mu * y).powi(2)).sum::<T>().sqrt();
        if resid <= tol {
            return Ok(mu);
        }
        let mut w: Vec<T> = av.iter().zip(&v).map(|(&x, &y)| x + y).collect();
        let nw = norm(&w);
        if !(nw > T::zero()) || !nw.is_finite() {
            return Err(LinalgError::NonConvergence { iterations: it });
        }
        w.iter_mut().for_each(|x| *x /= nw);
        v = w;
    }
    Err(LinalgError::NonConvergence { iterations: POWER_ITERATION_CAP })
}

const JACOBI_SWEEP_CAP: usize = 100;

/// All eigenvalues by cyclic Jacobi rotations, sorted nonincreasing.
///
/// Sweeps until the off-diagonal Frobenius mass falls below `tol`.
pub fn full_spectrum<T: Real>(a: &SymMatrix<T>, tol: T) -> Result<Vec<T>, LinalgError> {
    let n = a.dim();
    let mut m: Vec<T> = a.as_slice().to_vec();
    let idx = |i: usize, j: usize| i * n + j;
    let off = |m: &[T]| -> T {
        let mut s = T::zero();
        for i in 0..n {
            for j in (i + 1)..n {
                s += m[idx(i, j)] * m[idx(i, j)];
            }
        }
        (s + s).sqrt()
    };
    let mut sweeps = 0;
    while off(&m) >= tol {
        if sweeps == JACOBI_SWEEP_CAP {
            return Err(LinalgError::NonConvergence { iterations: sweeps });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[idx(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let app = m[idx(p, p)];
                let aqq = m[idx(q, q)];
                let theta = (aqq - app) / (apq + apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = m[idx(k, p)];
                    let akq = m[idx(k, q)];
                    m[idx(k, p)] = c * akp - s * akq;
                    m[idx(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[idx(p, k)];
                    let aqk = m[idx(q, k)];
                    m[idx(p, k)] = c * apk - s * aqk;
                    m[idx(q, k)] = s * apk + c * aqk;
                }
                m[idx(p, q)] = T::zero();
                m[idx(q, p)] = T::zero();
            }
        }
    }
    let mut eig: Vec<T> = (0..n).map(|i| m[idx(i, i)]).collect();
    eig.sort_by(|a, b| b.partial_cmp(a).expect("finite eigenvalues"));
    Ok(eig)
}

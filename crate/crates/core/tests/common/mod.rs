#![allow(dead_code)]

use attractor_core::SymMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

pub const MATH_MARKS_S: [[f64; 5]; 5] = [
    [1.0, 0.553, 0.547, 0.409, 0.389],
    [0.553, 1.0, 0.610, 0.485, 0.436],
    [0.547, 0.610, 1.0, 0.711, 0.665],
    [0.409, 0.485, 0.711, 1.0, 0.607],
    [0.389, 0.436, 0.665, 0.607, 1.0],
];

pub const MATH_MARKS_OMEGA: [[f64; 5]; 5] = [
    [1.604, -0.559, -0.508, 0.0, -0.042],
    [-0.559, 1.802, -0.658, -0.154, -0.038],
    [-0.508, -0.658, 3.042, -1.111, -0.862],
    [0.0, -0.154, -1.111, 2.178, -0.517],
    [-0.042, -0.038, -0.862, -0.517, 1.920],
];

pub const MATH_MARKS_SIGMA: [[f64; 5]; 5] = [
    [1.0, 0.553, 0.547, 0.410, 0.389],
    [0.553, 1.0, 0.610, 0.485, 0.436],
    [0.547, 0.610, 1.0, 0.711, 0.665],
    [0.410, 0.485, 0.711, 1.0, 0.607],
    [0.389, 0.436, 0.665, 0.607, 1.0],
];

pub fn math_marks() -> SymMatrix<f64> {
    SymMatrix::from_fn(5, |j, k| MATH_MARKS_S[j][k])
}

/// Sample covariance `XᵀX/n` of `n` draws from `N(0, I_p)` mixed by a random
/// lower-triangular factor, so that the population has positive and negative correlations.
pub fn random_covariance(p: usize, n: usize, seed: u64) -> SymMatrix<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut mix = vec![vec![0.0; p]; p];
    for j in 0..p {
        for k in 0..=j {
            let z: f64 = StandardNormal.sample(&mut rng);
            mix[j][k] = if j == k { 1.0 } else { 0.5 * z };
        }
    }
    let mut s = vec![vec![0.0; p]; p];
    for _ in 0..n {
        let z: Vec<f64> = (0..p).map(|_| StandardNormal.sample(&mut rng)).collect();
        let x: Vec<f64> = (0..p).map(|j| (0..=j).map(|k| mix[j][k] * z[k]).sum()).collect();
        for j in 0..p {
            for k in 0..p {
                s[j][k] += x[j] * x[k] / n as f64;
            }
        }
    }
    SymMatrix::from_fn(p, |j, k| s[j][k])
}

/// Gauss–Jordan inverse with partial pivoting; `None` if singular.
pub fn gauss_inverse(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..n).map(|k| if k == i { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    for c in 0..n {
        let piv = (c..n).max_by(|&x, &y| m[x][c].abs().partial_cmp(&m[y][c].abs()).unwrap())?;
        if m[piv][c].abs() < 1e-300 {
            return None;
        }
        m.swap(c, piv);
        let d = m[c][c];
        m[c].iter_mut().for_each(|x| *x /= d);
        for r in 0..n {
            if r != c {
                let f = m[r][c];
                if f != 0.0 {
                    for k in 0..2 * n {
                        m[r][k] -= f * m[c][k];
                    }
                }
            }
        }
    }
    Some(m.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// Positive definiteness via leading principal minors computed by plain elimination.
pub fn is_pd(a: &[Vec<f64>]) -> bool {
    let n = a.len();
    let mut m = a.to_vec();
    for c in 0..n {
        if !(m[c][c] > 0.0) {
            return false;
        }
        for r in (c + 1)..n {
            let f = m[r][c] / m[c][c];
            for k in c..n {
                m[r][k] -= f * m[c][k];
            }
        }
    }
    true
}

pub fn log_det_elim(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    let mut m = a.to_vec();
    let mut ld = 0.0;
    for c in 0..n {
        ld += m[c][c].ln();
        for r in (c + 1)..n {
            let f = m[r][c] / m[c][c];
            for k in c..n {
                m[r][k] -= f * m[c][k];
            }
        }
    }
    ld
}

pub fn to_rows(a: &SymMatrix<f64>) -> Vec<Vec<f64>> {
    (0..a.dim()).map(|j| a.row(j).to_vec()).collect()
}

pub fn max_abs_diff(a: &SymMatrix<f64>, b: &SymMatrix<f64>) -> f64 {
    a.sub(b).max_abs()
}

//! Edge-recovery and estimation-error metrics.

use thiserror::Error;

use crate::linalg::{cholesky, full_spectrum, LinalgError, SymMatrix};
use crate::scalar::Real;
use crate::sparsify::EdgeSet;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("edge sets have different dimensions ({est} vs {truth})")]
    DimensionMismatch { est: usize, truth: usize },
}

/// Confusion counts over the `p(p−1)/2` unordered off-diagonal pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }
}

pub fn confusion(est: &EdgeSet, truth: &EdgeSet) -> Result<ConfusionCounts, MetricsError> {
    if est.dim() != truth.dim() {
        return Err(MetricsError::DimensionMismatch { est: est.dim(), truth: truth.dim() });
    }
    let p = est.dim() as u64;
    let pairs = p * p.saturating_sub(1) / 2;
    let tp = est.iter().filter(|&(j, k)| truth.contains(j, k)).count() as u64;
    let fp = est.len() as u64 - tp;
    let fn_ = truth.len() as u64 - tp;
    Ok(ConfusionCounts { tp, tn: pairs - tp - fp - fn_, fp, fn_ })
}

/// Matthews correlation coefficient; `0` when any marginal count is zero.
pub fn mcc(c: &ConfusionCounts) -> f64 {
    let (tp, tn, fp, fn_) = (c.tp as f64, c.tn as f64, c.fp as f64, c.fn_ as f64);
    let denom = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
    if denom == 0.0 {
        return 0.0;
    }
    (tp * tn - fp * fn_) / denom.sqrt()
}

/// `‖Ω* − Ω̂‖₂`, the largest absolute eigenvalue of the difference.
pub fn spectral_error<T: Real>(omega_star: &SymMatrix<T>, omega_hat: &SymMatrix<T>) -> Result<T, LinalgError> {
    let diff = omega_star.sub(omega_hat);
    let scale = diff.max_abs().max(T::min_positive_value());
    let tol = T::lit(1e-10).max(T::epsilon() * T::lit(16.0)) * scale;
    let eig = full_spectrum(&diff, tol)?;
    Ok(eig.iter().fold(T::zero(), |m, &x| m.max(x.abs())))
}

/// `D(Ω* ‖ Ω̂) = log det Ω* − log det Ω̂ + tr(Ω̂ Σ*) − p`, clamped at zero.
pub fn kl_divergence<T: Real>(
    omega_star: &SymMatrix<T>,
    sigma_star: &SymMatrix<T>,
    omega_hat: &SymMatrix<T>,
) -> Result<T, LinalgError> {
    let ld_star = cholesky(omega_star)?.log_det();
    let ld_hat = cholesky(omega_hat)?.log_det();
    let p = T::from_usize_lossy(omega_star.dim());
    let d = ld_star - ld_hat + omega_hat.trace_product(sigma_star) - p;
    Ok(d.max(T::zero()))
}

/// `-log det Ω + tr(Ω S)` for an evaluation covariance `S`.
pub fn logdet_loss<T: Real>(omega: &SymMatrix<T>, s_eval: &SymMatrix<T>) -> Result<T, LinalgError> {
    crate::solver::objective(omega, s_eval)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confusion_examples() {
        let c = confusion(&EdgeSet::empty(3), &EdgeSet::empty(3)).unwrap();
        assert_eq!(c, ConfusionCounts { tp: 0, tn: 3, fp: 0, fn_: 0 });

        let t = EdgeSet::from_pairs(4, [(0, 1), (2, 3)]);
        let c = confusion(&t, &t).unwrap();
        assert_eq!((c.fp, c.fn_), (0, 0));

        let e = EdgeSet::from_pairs(4, [(0, 1), (1, 2)]);
        let c = confusion(&e, &t).unwrap();
        assert_eq!(c, ConfusionCounts { tp: 1, tn: 3, fp: 1, fn_: 1 });
        assert_eq!(c.total(), 6);
    }

    #[test]
    fn confusion_dimension_mismatch() {
        assert!(confusion(&EdgeSet::empty(3), &EdgeSet::empty(4)).is_err());
    }

    #[test]
    fn mcc_examples() {
        assert_eq!(mcc(&ConfusionCounts { tp: 3, tn: 3, fp: 0, fn_: 0 }), 1.0);
        let m = mcc(&ConfusionCounts { tp: 2, tn: 2, fp: 1, fn_: 1 });
        assert!((m - 1.0 / 3.0).abs() < 1e-15);
        // complement prediction on 6 pairs with 2 true edges
        let m = mcc(&ConfusionCounts { tp: 0, tn: 0, fp: 4, fn_: 2 });
        assert!((m - (-8.0 / (4.0f64 * 2.0 * 4.0 * 2.0).sqrt())).abs() < 1e-15);
        assert_eq!(mcc(&ConfusionCounts { tp: 0, tn: 6, fp: 0, fn_: 0 }), 0.0);
    }

    #[test]
    fn spectral_error_examples() {
        let a = SymMatrix::<f64>::identity(2);
        assert_eq!(spectral_error(&a, &a).unwrap(), 0.0);
        let b = SymMatrix::from_diagonal(&[-2.0, 6.0]);
        assert!((spectral_error(&a, &b).unwrap() - 5.0).abs() < 1e-12);
        let mut c = SymMatrix::identity(2);
        c.set(0, 1, -1.0);
        assert!((spectral_error(&a, &c).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kl_examples() {
        let i2 = SymMatrix::<f64>::identity(2);
        assert_eq!(kl_divergence(&i2, &i2, &i2).unwrap(), 0.0);
        let d = kl_divergence(&i2, &i2, &i2.scale(2.0)).unwrap();
        assert!((d - (-2.0 * 2f64.ln() + 2.0)).abs() < 1e-14);
        assert!((d - 0.6137).abs() < 1e-4);
        let d = kl_divergence(&i2, &i2, &i2.scale(0.5)).unwrap();
        assert!((d - (2.0 * 2f64.ln() - 1.0)).abs() < 1e-14);
        assert!((d - 0.3863).abs() < 1e-4);
    }

    #[test]
    fn kl_rejects_indefinite_estimate() {
        let i2 = SymMatrix::<f64>::identity(2);
        assert!(kl_divergence(&i2, &i2, &i2.scale(-1.0)).is_err());
    }

    #[test]
    fn logdet_loss_examples() {
        assert_eq!(logdet_loss(&SymMatrix::<f64>::identity(3), &SymMatrix::identity(3)).unwrap(), 3.0);
        let l = logdet_loss(&SymMatrix::<f64>::identity(2).scale(2.0), &SymMatrix::identity(2)).unwrap();
        assert!((l - (4.0 - 2.0 * 2f64.ln())).abs() < 1e-14);
    }
}

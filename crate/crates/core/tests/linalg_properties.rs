mod common;

use attractor_core::linalg::{cholesky, full_spectrum, top_eigenvalue};
use attractor_core::SymMatrix;
use common::*;
use proptest::prelude::*;

fn spd(max_dim: usize) -> impl Strategy<Value = SymMatrix<f64>> {
    (1usize..=max_dim, any::<u64>()).prop_map(|(p, seed)| random_covariance(p, 3 * p + 2, seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn log_det_matches_spectrum(a in spd(8)) {
        let ld = cholesky(&a).unwrap().log_det();
        let eig = full_spectrum(&a, 1e-13).unwrap();
        let from_eig: f64 = eig.iter().map(|l| l.ln()).sum();
        prop_assert!((ld - from_eig).abs() <= 1e-9 * (1.0 + ld.abs()));
        prop_assert!((ld - log_det_elim(&to_rows(&a))).abs() <= 1e-9 * (1.0 + ld.abs()));
    }

    #[test]
    fn trace_matches_spectrum(a in spd(8)) {
        let eig = full_spectrum(&a, 1e-13).unwrap();
        let s: f64 = eig.iter().sum();
        prop_assert!((a.trace() - s).abs() <= 1e-9 * (1.0 + s.abs()));
    }

    #[test]
    fn inverse_matches_gauss_jordan(a in spd(8)) {
        let inv = cholesky(&a).unwrap().inverse();
        let want = gauss_inverse(&to_rows(&a)).unwrap();
        let scale = inv.max_abs();
        for j in 0..a.dim() {
            for k in 0..a.dim() {
                prop_assert!((inv.get(j, k) - want[j][k]).abs() <= 1e-9 * scale);
            }
        }
    }

    #[test]
    fn solve_satisfies_system(a in spd(8), b in prop::collection::vec(-5.0f64..5.0, 8)) {
        let b = &b[..a.dim()];
        let x = cholesky(&a).unwrap().solve(b);
        let ax = a.matvec(&x);
        for (u, v) in ax.iter().zip(b) {
            prop_assert!((u - v).abs() <= 1e-9 * (1.0 + v.abs()));
        }
    }

    #[test]
    fn power_iteration_finds_top_of_spectrum(a in spd(6)) {
        let eig = full_spectrum(&a, 1e-13).unwrap();
        let top = top_eigenvalue(&a, 1e-12).unwrap();
        prop_assert!((top - eig[0]).abs() <= 1e-6 * eig[0]);
    }
}

//! Invariants of the correlation layer and the statistics, over random
//! residual grids.

use approx::assert_relative_eq;
use panelcd::cdtest::{cd_lm_value, cd_p_stat, lm_bc_stat, p_value, rlm_pe_stat, rlm_stat};
use panelcd::corr::correlation_from_rows;
use panelcd::panel::ResidualMatrix;
use panelcd::{correlation_matrix, run_all, trace_stats, NullDist, Sidedness, TestConfig, TestKind};
use proptest::prelude::*;

/// (n, t, row-major n x t residuals)
fn grid() -> impl Strategy<Value = (usize, usize, Vec<f64>)> {
    (3usize..12, 0usize..20).prop_flat_map(|(n, extra)| {
        let t = n + 4 + extra;
        (Just(n), Just(t), prop::collection::vec(-10.0f64..10.0, n * t))
    })
}

fn stats(n: usize, t: usize, v: &[f64]) -> panelcd::TraceStats {
    trace_stats(&correlation_from_rows(v, n, t).unwrap(), t)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn identities_hold((n, t, v) in grid()) {
        let s = stats(n, t, &v);
        let (nf, tf) = (n as f64, t as f64);
        let cd_lm = cd_lm_value(&s);
        let lm_bc = lm_bc_stat(&s, 0.05).unwrap().statistic;
        let rlm = rlm_stat(&s, 0.05).unwrap().statistic;
        let scale = (nf / (nf - 1.0)).sqrt();
        let tol = 1e-9 * (1.0 + cd_lm.abs());
        prop_assert!((cd_lm - lm_bc - nf / (2.0 * (tf - 1.0))).abs() <= tol);
        prop_assert!((cd_lm - scale * (rlm + nf / (2.0 * (tf - 1.0)))).abs() <= tol);
        let gap = nf.sqrt() / (2.0 * (tf - 1.0) * (nf.sqrt() + (nf - 1.0).sqrt()));
        prop_assert!((lm_bc - scale * (rlm + gap)).abs() <= tol);
    }

    #[test]
    fn trace_bounds((n, t, v) in grid()) {
        let s = stats(n, t, &v);
        let nf = n as f64;
        prop_assert!(s.tr_r2 >= nf - 1e-9);
        prop_assert!(s.tr_r4 >= s.tr_r2 * s.tr_r2 / nf - 1e-9);
        prop_assert!(s.max_abs_offdiag <= 1.0 + 1e-12);
    }

    #[test]
    fn correlation_symmetric_unit_diagonal((n, t, v) in grid()) {
        let r = correlation_from_rows(&v, n, t).unwrap();
        for i in 0..n {
            prop_assert!((r.get(i, i) - 1.0).abs() < 1e-12);
            for j in 0..n {
                prop_assert_eq!(r.get(i, j), r.get(j, i));
            }
        }
    }

    #[test]
    fn scale_invariance((n, t, v) in grid(), scales in prop::collection::vec(0.01f64..100.0, 12)) {
        let scaled: Vec<f64> = v.iter().enumerate().map(|(c, x)| x * scales[c / t]).collect();
        let (a, b) = (stats(n, t, &v), stats(n, t, &scaled));
        assert_relative_eq!(a.tr_r2, b.tr_r2, max_relative = 1e-10);
        assert_relative_eq!(a.tr_r4, b.tr_r4, max_relative = 1e-10);
    }

    #[test]
    fn permutation_and_sign_flips((n, t, v) in grid(), seed in any::<u64>()) {
        // reverse-and-rotate permutation plus seed-driven sign flips
        let order: Vec<usize> = (0..n).map(|i| (n - 1 - i + seed as usize % n) % n).collect();
        let mut w = Vec::with_capacity(n * t);
        for (pos, &i) in order.iter().enumerate() {
            let sign = if (seed >> (pos % 64)) & 1 == 1 { -1.0 } else { 1.0 };
            w.extend(v[i * t..(i + 1) * t].iter().map(|x| sign * x));
        }
        let (a, b) = (stats(n, t, &v), stats(n, t, &w));
        assert_relative_eq!(a.tr_r2, b.tr_r2, max_relative = 1e-10);
        assert_relative_eq!(a.tr_r4, b.tr_r4, max_relative = 1e-10);
        let (pa, pb) = (rlm_pe_stat(&a, 0.05).unwrap(), rlm_pe_stat(&b, 0.05).unwrap());
        assert_relative_eq!(pa.statistic, pb.statistic, epsilon = 1e-7, max_relative = 1e-9);
        // CD_P is only permutation invariant
        let w_perm: Vec<f64> = order.iter().flat_map(|&i| v[i * t..(i + 1) * t].iter().copied()).collect();
        let (ca, cb) = (cd_p_stat(&a, 0.05).unwrap(), cd_p_stat(&stats(n, t, &w_perm), 0.05).unwrap());
        assert_relative_eq!(ca.statistic, cb.statistic, epsilon = 1e-9);
    }

    #[test]
    fn p_values_in_unit_interval(z in -50.0f64..50.0) {
        for side in [Sidedness::UpperOneSided, Sidedness::TwoSided] {
            let p = p_value(z, NullDist::StdNormal, side);
            prop_assert!((0.0..=1.0).contains(&p));
        }
        let p = p_value(z.abs() * 100.0, NullDist::ChiSquared(45.0), Sidedness::UpperOneSided);
        prop_assert!((0.0..=1.0).contains(&p));
    }

    #[test]
    fn rejection_matches_p_value((n, t, v) in grid(), alpha in 0.001f64..0.5) {
        let resid = ResidualMatrix::from_residuals(n, t, 2, v).unwrap();
        let cfg = TestConfig::new(alpha, TestKind::ALL.to_vec()).unwrap();
        for (_, outcome) in &run_all(&resid, &cfg).entries {
            if let Some(r) = outcome.result() {
                prop_assert_eq!(r.reject, r.p_value < alpha);
            }
        }
    }
}

#[test]
fn correlation_matrix_matches_rows() {
    let (n, t) = (4, 9);
    let v: Vec<f64> = (0..n * t).map(|c| ((c * 7919) % 23) as f64 - 11.0).collect();
    let a = correlation_from_rows(&v, n, t).unwrap();
    let b = correlation_matrix(&ResidualMatrix::from_residuals(n, t, 1, v).unwrap()).unwrap();
    assert_eq!(a, b);
}

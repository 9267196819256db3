//! Battery dispatch, estimator routing and failure capture.

use panelcd::cdtest::TestOutcome;
use panelcd::corr::trace_stats_evaluations;
use panelcd::dgp::generate;
use panelcd::mc::{replicate_battery, TestFlag};
use panelcd::panel::Violation;
use panelcd::*;

fn dgp1(t: usize, n: usize, seed: u64) -> GeneratedPanel {
    generate(&DgpConfig::new(DgpKind::Dgp1, t, n).seed(seed)).unwrap()
}

#[test]
fn trace_functionals_computed_once_per_battery() {
    let g = dgp1(40, 20, 1);
    let resid = fit(&g.panel, g.model_spec, true).unwrap();
    let before = trace_stats_evaluations();
    let battery = run_all(&resid, &TestConfig::default());
    assert_eq!(trace_stats_evaluations() - before, 1);
    assert_eq!(battery.entries.len(), TestKind::ALL.len());
    assert!(battery.entries.iter().all(|(_, o)| matches!(o, TestOutcome::Computed(_))));
}

#[test]
fn requested_order_and_subset_preserved() {
    let g = dgp1(40, 20, 2);
    let resid = fit(&g.panel, g.model_spec, false).unwrap();
    let cfg = TestConfig::new(0.1, vec![TestKind::RlmPe, TestKind::CdP, TestKind::LmAdj]).unwrap();
    let b = run_all(&resid, &cfg);
    let kinds: Vec<_> = b.entries.iter().map(|e| e.0).collect();
    assert_eq!(kinds, cfg.tests);
    // bases were not retained
    assert!(matches!(b.entries[2].1, TestOutcome::Unsupported(_)));
    assert!(b.get(TestKind::CdP).is_some());
}

#[test]
fn fixed_effects_mark_lm_adj_unsupported() {
    let g = dgp1(30, 10, 3);
    let resid = fit_fixed_effects(&g.panel).unwrap();
    let b = run_all(&resid, &TestConfig::default());
    assert!(matches!(b.entries.iter().find(|e| e.0 == TestKind::LmAdj).unwrap().1, TestOutcome::Unsupported(_)));
    assert!(b.get(TestKind::Rlm).is_some());
}

#[test]
fn unit_order_does_not_change_statistics() {
    let g = dgp1(50, 15, 4);
    let order: Vec<usize> = (0..15).rev().collect();
    let permuted = g.panel.permute_units(&order).unwrap();
    let cfg = TestConfig::default();
    let a = run_all(&fit(&g.panel, g.model_spec, true).unwrap(), &cfg);
    let b = run_all(&fit(&permuted, g.model_spec, true).unwrap(), &cfg);
    for kind in TestKind::ALL {
        let (x, y) = (a.get(kind).unwrap().statistic, b.get(kind).unwrap().statistic);
        assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()), "{kind:?}: {x} vs {y}");
    }
}

#[test]
fn singular_unit_is_reported_not_fitted() {
    let (n, t) = (5, 20);
    // unit 2 has a regressor identical to the intercept
    let panel = PanelDataset::from_fn(n, t, 2, true, |i, s| (i * s) as f64 + (s as f64).sin(), |i, _, s| if i == 2 { 1.0 } else { s as f64 })
        .unwrap();
    let report = validate_dataset(&panel, ModelSpec::Heterogeneous);
    assert!(report.violations.contains(&Violation::RankDeficientUnit { unit: 2 }));
    assert!(matches!(fit_heterogeneous(&panel, false), Err(Error::RankDeficient { unit: Some(2) })));
}

#[test]
fn replication_failures_are_captured() {
    // T too short for the regressors: every replication fails, nothing panics
    let cfg = DgpConfig::new(DgpKind::Dgp1, 10, 5).k(9);
    assert!(cfg.validate().is_err());
    let tests = TestConfig::default();
    let mut rng = derive_stream(9, 0, 0);
    assert!(replicate_battery(&cfg, &tests, &mut rng).is_err());
    let rep = run_replication(&cfg, &tests, &mut rng);
    assert_eq!(rep.flag(0), TestFlag::Failed);
}

#[test]
fn experiment_counts_add_up() {
    let mut plan = ExperimentPlan::new(vec![DgpConfig::new(DgpKind::Dgp1, 30, 10)], 40, 5);
    plan.tests = vec![TestKind::Rlm, TestKind::CdP];
    let r = run_experiment(&plan).unwrap();
    assert_eq!(r.rows.len(), 2);
    for row in &r.rows {
        assert_eq!(row.failed, 0);
        assert!(row.rejections <= 40);
        assert_eq!(row.frequency, Some(100.0 * row.rejections as f64 / 40.0));
    }
}

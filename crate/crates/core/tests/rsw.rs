use approx::assert_relative_eq;
use proptest::prelude::*;

use recal::regress::{design_matrix, fit_ols, Family};
use recal::rsw::{estimate, fit_outcome, AdjustmentStrategy, StrategyFits};
use recal::analytic::population_coefficients;
use recal::scenario::{catalog_entry, generate, implied_correlations, DagId, OutcomeKind, ScenarioConfig, COVARIATE};
use recal::Error;

use AdjustmentStrategy::{NoneM, NoneNone, ONone, OM};

fn v() -> Vec<String> {
    vec![COVARIATE.to_string()]
}

#[test]
fn ratio_and_delta_variance_match_separate_fits() {
    let s = generate(&catalog_entry("dag4-base-cont").unwrap(), 2).unwrap();
    let (m, val) = (&s.main, &s.validation);
    let vm = m.covariate("v").unwrap();
    let vv = val.covariate("v").unwrap();
    let out = fit_ols(&m.y, &design_matrix(m.len(), &[&m.z, vm])).unwrap();
    let mem = fit_ols(&val.x, &design_matrix(val.len(), &[&val.z, vv])).unwrap();
    let (g, a) = (out.coef(1), mem.coef(1));
    let var = out.var(1) / (a * a) + g * g * mem.var(1) / a.powi(4);

    let e = estimate(m, val, OM, &v(), &v(), Family::Linear).unwrap();
    assert_relative_eq!(e.beta_hat, g / a, max_relative = 1e-12);
    assert_relative_eq!(e.se, var.sqrt(), max_relative = 1e-12);
    assert_relative_eq!(e.ci_low, g / a - 1.959963984540054 * var.sqrt(), max_relative = 1e-12);
    assert_relative_eq!(e.ci_high, g / a + 1.959963984540054 * var.sqrt(), max_relative = 1e-12);
}

#[test]
fn perfect_surrogate_gives_the_naive_estimate() {
    let mut s = generate(&catalog_entry("dag1-base-cont").unwrap(), 0).unwrap();
    s.validation.z = s.validation.x.clone();
    let e = estimate(&s.main, &s.validation, NoneNone, &[], &[], Family::Linear).unwrap();
    let naive = fit_outcome(&s.main, &[], Family::Linear).unwrap();
    assert_relative_eq!(e.alpha_hat, 1.0, epsilon = 1e-12);
    assert_relative_eq!(e.beta_hat, naive.coef(1), max_relative = 1e-12);
}

#[test]
fn strategy_must_match_covariate_lists() {
    let s = generate(&catalog_entry("dag1-base-cont").unwrap(), 0).unwrap();
    let err = estimate(&s.main, &s.validation, OM, &v(), &[], Family::Linear).unwrap_err();
    assert!(matches!(err, Error::StrategyMismatch { .. }), "{err}");
    let err = estimate(&s.main, &s.validation, NoneNone, &["w".into()], &["w".into()], Family::Linear).unwrap_err();
    assert!(matches!(err, Error::StrategyMismatch { .. } | Error::UnknownCovariate(_)), "{err}");
}

#[test]
fn unrelated_surrogate_is_rejected() {
    let mut s = generate(&catalog_entry("dag1-base-cont").unwrap(), 0).unwrap();
    // Replace the validation surrogate with a column unrelated to X.
    let n = s.validation.len();
    s.validation.z = (0..n).map(|i| ((i * 7919) % 101) as f64).collect();
    let err = estimate(&s.main, &s.validation, NoneNone, &[], &[], Family::Linear).unwrap_err();
    assert!(matches!(err, Error::NearZeroCalibrationSlope { .. }), "{err}");
}

#[test]
fn odds_ratio_is_exponentiated_slope() {
    let s = generate(&catalog_entry("dag2-base-bin").unwrap(), 0).unwrap();
    let e = estimate(&s.main, &s.validation, OM, &v(), &v(), Family::Logistic).unwrap();
    let or = e.odds_ratio(10.0).unwrap();
    assert_relative_eq!(or.or, (10.0 * e.beta_hat).exp(), max_relative = 1e-12);
    assert_relative_eq!(or.ci_low, (10.0 * e.ci_low).exp(), max_relative = 1e-12);
    assert!(estimate(&s.main, &s.validation, OM, &v(), &v(), Family::Linear)
        .unwrap()
        .odds_ratio(1.0)
        .is_none());
}

#[test]
fn minimal_set_covariate_needs_both_models_at_large_n() {
    let c = catalog_entry("dag4-base-cont").unwrap().with_sizes(400_000, 400_000);
    let s = generate(&c, 0).unwrap();
    let fits = StrategyFits::new(&s.main, &s.validation, &v(), Family::Linear, &AdjustmentStrategy::ALL).unwrap();
    let om = fits.estimate(OM).unwrap();
    assert!((om.beta_hat - c.beta_x).abs() < 4.0 * om.se);
    let limits = population_coefficients(&implied_correlations(&c).unwrap()).unwrap();
    for st in [NoneNone, NoneM, ONone] {
        let e = fits.estimate(st).unwrap();
        assert!((e.beta_hat - limits.limit(st)).abs() < 4.0 * e.se, "{st}: {}", e.beta_hat);
        assert!((e.beta_hat - c.beta_x).abs() > 3.0 * e.se, "{st}: {} ± {} limit {}", e.beta_hat, e.se, limits.limit(st));
    }
}

#[test]
fn independent_covariate_changes_nothing_in_expectation() {
    let c = ScenarioConfig::new(DagId::Dag5, OutcomeKind::Continuous).with_sizes(100_000, 100_000);
    let s = generate(&c, 0).unwrap();
    let fits = StrategyFits::new(&s.main, &s.validation, &v(), Family::Linear, &AdjustmentStrategy::ALL).unwrap();
    let om = fits.estimate(OM).unwrap();
    for st in AdjustmentStrategy::ALL {
        let e = fits.estimate(st).unwrap();
        assert!((e.beta_hat - om.beta_hat).abs() < 0.5 * om.se, "{st}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn estimates_are_equivariant(rep in 0u64..1000, shift in -5.0f64..5.0, scale in 0.1f64..10.0) {
        let mut c = catalog_entry("dag8-base-cont").unwrap();
        c.n_ms = 800;
        c.n_vs = 200;
        let s = generate(&c, rep).unwrap();
        let base = StrategyFits::new(&s.main, &s.validation, &v(), Family::Linear, &AdjustmentStrategy::ALL).unwrap();
        // Shifting the surrogate leaves every slope alone; scaling Y scales the estimate.
        let mut m = s.main.clone();
        let mut val = s.validation.clone();
        m.z.iter_mut().for_each(|z| *z += shift);
        val.z.iter_mut().for_each(|z| *z += shift);
        m.y.iter_mut().for_each(|y| *y *= scale);
        let moved = StrategyFits::new(&m, &val, &v(), Family::Linear, &AdjustmentStrategy::ALL).unwrap();
        for st in AdjustmentStrategy::ALL {
            let (a, b) = (base.estimate(st).unwrap(), moved.estimate(st).unwrap());
            prop_assert!((b.beta_hat - scale * a.beta_hat).abs() <= 1e-8 * (scale * a.beta_hat).abs());
            prop_assert!((b.se - scale * a.se).abs() <= 1e-8 * scale * a.se);
        }
    }

    #[test]
    fn confidence_interval_is_symmetric_and_contains_estimate(rep in 0u64..1000) {
        let mut c = catalog_entry("dag6-base-cont").unwrap();
        c.n_ms = 600;
        c.n_vs = 150;
        let s = generate(&c, rep).unwrap();
        let fits = StrategyFits::new(&s.main, &s.validation, &v(), Family::Linear, &AdjustmentStrategy::ALL).unwrap();
        for st in AdjustmentStrategy::ALL {
            let e = fits.estimate(st).unwrap();
            prop_assert!(e.se > 0.0);
            prop_assert!(e.ci_low < e.beta_hat && e.beta_hat < e.ci_high);
            prop_assert!(((e.beta_hat - e.ci_low) - (e.ci_high - e.beta_hat)).abs() < 1e-12);
        }
    }
}

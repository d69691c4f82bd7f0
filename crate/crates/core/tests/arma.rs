mod support;

use pricecast_core::features::{build_features, ColumnKind, FeatureSpec};
use pricecast_core::models::arma::{fit_arma_order, fit_seasonal_arma};
use pricecast_core::models::fit_ols;
use pricecast_core::models::{
    fit_model, forecast_24h, ArmaOrder, ForecastContext, ForecasterSpec, Hyper, ModelKind, ModelState,
};
use support::sim::{arma_features as spec, arma_recovery_hits, panel, simulate, SEASONAL};

#[test]
fn recovers_arma11_parameters() {
    for seed in 0..3 {
        let y = simulate(seed, 5000, 0.6, 0.3, SEASONAL);
        let m = build_features(&panel(y), &spec(1)).unwrap();
        let fit = fit_arma_order(&m, 1, 1, 500).unwrap();
        assert!(!fit.stalled && !fit.reflected);
        assert!((fit.coefficient(&ColumnKind::SeasonalLag(24)) - 0.15).abs() < 0.05);
    }
    let within = arma_recovery_hits(0..10, 0.05);
    assert!(within >= 9, "{within}/10 within tolerance");
}

#[test]
fn aicc_picks_the_smallest_criterion() {
    for seed in 0..3 {
        let y = simulate(100 + seed, 3000, 0.6, 0.3, SEASONAL);
        let m = build_features(&panel(y), &spec(3)).unwrap();
        let fit = fit_seasonal_arma(&m, &ArmaOrder::aicc()).unwrap();
        assert_eq!(fit.candidates.len(), 9);
        let best = fit
            .candidates
            .iter()
            .fold(f64::INFINITY, |a, c| a.min(c.2));
        let first = fit.candidates.iter().find(|c| c.2 == best).unwrap();
        assert_eq!((fit.p, fit.q), (first.0, first.1));
        assert_eq!(fit.aicc, best);
    }
}

fn ar_spec(q: usize) -> ForecasterSpec {
    let features = FeatureSpec {
        lags: Vec::new(),
        weekend_dummies: false,
        hour_dummies: false,
        ..FeatureSpec::default()
    };
    ForecasterSpec::new("arma", ModelKind::SeasonalArma, Hyper::Arma(ArmaOrder::fixed(1, q)), features).unwrap()
}

#[test]
fn forecasts_follow_the_arma_recursion() {
    let y = simulate(7, 2000, 0.7, 0.4, [0.0; 3]);
    let p = panel(y.clone());
    let cutoff = 1800;
    for q in [0, 1] {
        let model = fit_model(&ar_spec(q), &p, 1000..cutoff).unwrap();
        let ModelState::Arma(fit) = &model.state else { panic!("not an ARMA state") };
        let ctx = ForecastContext::from_panel(&p, cutoff, 200).unwrap();
        let f = forecast_24h(&model, &ctx).unwrap();
        let (c, phi) = (fit.intercept, fit.phi(1));
        let ma = if q == 1 { fit.theta[0] * fit.residual_tail[0] } else { 0.0 };
        let mut prev = y[cutoff - 1];
        for (h, v) in f.iter().enumerate() {
            let expect = c + phi * prev + if h == 0 { ma } else { 0.0 };
            assert!((v - expect).abs() < 1e-9, "q {q} step {h}: {v} vs {expect}");
            prev = expect;
        }
    }
}

#[test]
fn ar1_recovery_with_null_seasonal_terms() {
    for seed in 0..5 {
        let y = simulate(40 + seed, 5000, 0.7, 0.0, [0.0; 3]);
        let m = build_features(&panel(y), &spec(1)).unwrap();
        let fit = fit_arma_order(&m, 1, 0, 500).unwrap();
        assert!((fit.phi(1) - 0.7).abs() < 0.05, "seed {seed}: {}", fit.phi(1));
    }
}

#[test]
fn pure_ar_css_is_least_squares() {
    let y = simulate(3, 3000, 0.5, 0.0, [0.2, 0.0, 0.1]);
    let m = build_features(&panel(y), &spec(2)).unwrap();
    let fit = fit_arma_order(&m, 2, 0, 500).unwrap();
    let ols = fit_ols(&m).unwrap();
    assert!((fit.intercept - ols.intercept).abs() < 1e-6);
    for j in 0..ols.weights.len() {
        assert!((fit.weights[j] - ols.weights[j]).abs() < 1e-6);
    }
}

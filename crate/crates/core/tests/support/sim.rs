//! Simulated series with known structure: Seasonal-ARMA paths, null
//! forecast-error pairs and a hand-checkable metrics fixture.

use std::collections::BTreeMap;
use std::ops::Range;

use chrono::{TimeZone, Utc};
use pricecast_core::data::{HourlyCalendar, HourlyPanel};
use pricecast_core::eval::diebold_mariano;
use pricecast_core::features::{build_features, FeatureSpec};
use pricecast_core::models::arma::{fit_arma_order, fit_seasonal_arma};
use pricecast_core::models::ArmaOrder;
use pricecast_core::seeds;
use rand_distr::{Distribution, StandardNormal};

const BURN: usize = 1000;
pub const SEASONAL: [f64; 3] = [0.15, 0.0, 0.1];

/// `y_t = 5 + φ y_{t−1} + θ e_{t−1} + Σ c_l y_{t−l} + e_t` with seasonal lags
/// 24, 48 and 168 and unit-variance innovations.
pub fn simulate(seed: u64, t: usize, phi: f64, theta: f64, seasonal: [f64; 3]) -> Vec<f64> {
    let mut rng = seeds::rng(seed);
    let n = t + BURN;
    let mut y = vec![0.0; n];
    let mut e = vec![0.0; n];
    for i in 0..n {
        e[i] = StandardNormal.sample(&mut rng);
        let mut v = 5.0 + e[i];
        if i >= 1 {
            v += phi * y[i - 1] + theta * e[i - 1];
        }
        for (lag, c) in [24, 48, 168].iter().zip(seasonal) {
            if i >= *lag {
                v += c * y[i - lag];
            }
        }
        y[i] = v;
    }
    y[BURN..].to_vec()
}

pub fn panel(y: Vec<f64>) -> HourlyPanel<f64> {
    let cal = HourlyCalendar::new(Utc.with_ymd_and_hms(2015, 1, 1, 0, 0, 0).unwrap(), y.len());
    HourlyPanel::new(cal, y, Vec::new(), "sim").unwrap()
}

/// Seasonal lags plus `recent` previous hours, no dummies.
pub fn arma_features(recent: usize) -> FeatureSpec {
    FeatureSpec {
        n_recent_lags: recent,
        weekend_dummies: false,
        hour_dummies: false,
        ..FeatureSpec::default()
    }
}

/// Seeds whose CSS fit of the true (1,1) order lands within `tol` of
/// φ = 0.6 and θ = 0.3 on T = 5000.
pub fn arma_recovery_hits(seeds: Range<u64>, tol: f64) -> usize {
    seeds
        .filter(|&seed| {
            let y = simulate(seed, 5000, 0.6, 0.3, SEASONAL);
            let m = build_features(&panel(y), &arma_features(1)).unwrap();
            let fit = fit_arma_order(&m, 1, 1, 500).unwrap();
            (fit.phi(1) - 0.6).abs() < tol && (fit.theta[0] - 0.3).abs() < tol
        })
        .count()
}

/// Orders chosen by AICc over {1,2,3}×{0,1,2} on T = 5000 paths of the
/// (1,1) process, tallied.
pub fn aicc_choices(seeds: Range<u64>) -> BTreeMap<(usize, usize), usize> {
    let mut tally = BTreeMap::new();
    for seed in seeds {
        let y = simulate(10_000 + seed, 5000, 0.6, 0.3, SEASONAL);
        let m = build_features(&panel(y), &arma_features(3)).unwrap();
        let fit = fit_seasonal_arma(&m, &ArmaOrder::aicc()).unwrap();
        *tally.entry((fit.p, fit.q)).or_insert(0) += 1;
    }
    tally
}

/// Share of `reps` iid equal-accuracy pairs of length 5000 rejected at 5%.
pub fn dm_null_rejection_rate(reps: u64) -> f64 {
    let mut rejected = 0;
    for r in 0..reps {
        let mut rng = seeds::rng(seeds::derive(77, r));
        let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };
        let a: Vec<f64> = (0..5000).map(|_| draw()).collect();
        let b: Vec<f64> = (0..5000).map(|_| draw()).collect();
        if diebold_mariano(&a, &b, 24).unwrap().p_value < 0.05 {
            rejected += 1;
        }
    }
    rejected as f64 / reps as f64
}

pub fn fixture_calendar(hours: usize) -> HourlyCalendar {
    HourlyCalendar::new(Utc.with_ymd_and_hms(2013, 6, 3, 0, 0, 0).unwrap(), hours)
}

/// Two weeks from a Monday where every hour of day `d` (0-based) misses by
/// `d + 1`, the sign alternating by hour. Returns forecasts, realized
/// values and hour indices.
pub fn metrics_fixture() -> (Vec<f64>, Vec<f64>, Vec<usize>) {
    let hours: Vec<usize> = (0..336).collect();
    let realized: Vec<f64> = hours.iter().map(|&t| 40.0 + (t % 24) as f64).collect();
    let forecast = hours
        .iter()
        .map(|&t| {
            let e = (t / 24 + 1) as f64;
            realized[t] - if t % 2 == 0 { e } else { -e }
        })
        .collect();
    (forecast, realized, hours)
}

/// Hand values of MAE, RMSE, mean daily RMSE and mean weekly RMSE for
/// [`metrics_fixture`]: |e| runs 1..=14 by day.
pub fn metrics_fixture_expected() -> [f64; 4] {
    let mae = (1..=14).sum::<i32>() as f64 / 14.0;
    let rmse = ((1..=14).map(|d| d * d).sum::<i32>() as f64 / 14.0).sqrt();
    let wrmse = ((140.0f64 / 7.0).sqrt() + (875.0f64 / 7.0).sqrt()) / 2.0;
    [mae, rmse, mae, wrmse]
}

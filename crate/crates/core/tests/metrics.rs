mod support;

use pricecast_core::eval::compute_metrics;
use support::sim::{fixture_calendar as calendar, metrics_fixture as fixture, metrics_fixture_expected};

#[test]
fn two_week_fixture_matches_hand_values() {
    let (f, r, h) = fixture();
    let m = compute_metrics(&f, &r, &calendar(336), &h).unwrap();
    let [mae, rmse, drmse, wrmse] = metrics_fixture_expected();
    assert!((m.mae - mae).abs() < 1e-12);
    assert!((m.rmse - rmse).abs() < 1e-12);
    assert!((m.avg_drmse - drmse).abs() < 1e-12);
    assert!((m.avg_wrmse - wrmse).abs() < 1e-12);
    assert_eq!((m.complete_days, m.excluded_days, m.complete_weeks, m.excluded_weeks), (14, 0, 2, 0));
}

#[test]
fn single_day_drmse_is_its_rmse() {
    let (f, r, h) = fixture();
    let day = 24 * 5..24 * 6;
    let m = compute_metrics(&f[day.clone()], &r[day.clone()], &calendar(336), &h[day]).unwrap();
    assert!((m.avg_drmse - m.rmse).abs() < 1e-12);
    assert!((m.rmse - 6.0).abs() < 1e-12);
    assert!(m.avg_wrmse.is_nan());
    assert_eq!(m.excluded_weeks, 1);
}

#[test]
fn trailing_partial_blocks_are_excluded() {
    let (f, r, h) = fixture();
    let n = 24 * 8 + 5;
    let m = compute_metrics(&f[..n], &r[..n], &calendar(336), &h[..n]).unwrap();
    assert_eq!((m.complete_days, m.excluded_days), (8, 1));
    assert_eq!((m.complete_weeks, m.excluded_weeks), (1, 1));
    assert!((m.avg_drmse - 4.5).abs() < 1e-12);
    assert!((m.avg_wrmse - 20f64.sqrt()).abs() < 1e-12);
}

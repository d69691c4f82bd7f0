//! Point-forecast accuracy measures.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::data::HourlyCalendar;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const DAY: usize = 24;
const WEEK: usize = 168;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricReport {
    pub mae: f64,
    pub rmse: f64,
    /// Mean of per-day RMSE over complete calendar days.
    pub avg_drmse: f64,
    /// Mean of per-week RMSE over complete 7-day blocks counted from the
    /// first forecast day.
    pub avg_wrmse: f64,
    pub hours: usize,
    pub complete_days: usize,
    pub excluded_days: usize,
    pub complete_weeks: usize,
    pub excluded_weeks: usize,
}

/// Metrics for forecasts at panel hours `hours` (one per value).
pub fn compute_metrics<F: Scalar>(forecast: &[F], realized: &[F], calendar: &HourlyCalendar, hours: &[usize]) -> Result<MetricReport> {
    if forecast.is_empty() {
        return Err(Error::Empty("no forecasts to score".into()));
    }
    if forecast.len() != realized.len() || forecast.len() != hours.len() {
        return Err(Error::Schema("forecast, realized and hour vectors differ in length".into()));
    }
    let n = forecast.len();
    let err: Vec<f64> = forecast
        .iter()
        .zip(realized)
        .map(|(f, r)| r.as_f64() - f.as_f64())
        .collect();
    let mae = err.iter().map(|e| e.abs()).sum::<f64>() / n as f64;
    let rmse = (err.iter().map(|e| e * e).sum::<f64>() / n as f64).sqrt();

    let first = calendar.date_of(hours[0]);
    let mut days: BTreeMap<i64, (usize, f64)> = BTreeMap::new();
    let mut weeks: BTreeMap<i64, (usize, f64)> = BTreeMap::new();
    for (e, &t) in err.iter().zip(hours) {
        let d = (calendar.date_of(t) - first).num_days();
        let day = days.entry(d).or_default();
        day.0 += 1;
        day.1 += e * e;
        let week = weeks.entry(d.div_euclid(7)).or_default();
        week.0 += 1;
        week.1 += e * e;
    }
    let (avg_drmse, complete_days) = block_average(&days, DAY);
    let (avg_wrmse, complete_weeks) = block_average(&weeks, WEEK);
    Ok(MetricReport {
        mae,
        rmse,
        avg_drmse,
        avg_wrmse,
        hours: n,
        complete_days,
        excluded_days: days.len() - complete_days,
        complete_weeks,
        excluded_weeks: weeks.len() - complete_weeks,
    })
}

fn block_average(blocks: &BTreeMap<i64, (usize, f64)>, size: usize) -> (f64, usize) {
    let rmses: Vec<f64> = blocks
        .values()
        .filter(|(n, _)| *n == size)
        .map(|(n, ss)| (ss / *n as f64).sqrt())
        .collect();
    if rmses.is_empty() {
        return (f64::NAN, 0);
    }
    (rmses.iter().sum::<f64>() / rmses.len() as f64, rmses.len())
}

/// Out-of-sample `1 − SSE/SST` around the realized mean.
pub fn r_squared<F: Scalar>(forecast: &[F], realized: &[F]) -> f64 {
    let n = realized.len() as f64;
    let mean = realized.iter().map(|v| v.as_f64()).sum::<f64>() / n;
    let sst: f64 = realized.iter().map(|v| (v.as_f64() - mean).powi(2)).sum();
    let sse: f64 = forecast
        .iter()
        .zip(realized)
        .map(|(f, r)| (r.as_f64() - f.as_f64()).powi(2))
        .sum();
    1.0 - sse / sst
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeZone, Utc};

    fn cal(n: usize) -> HourlyCalendar {
        HourlyCalendar::new(Utc.with_ymd_and_hms(2012, 3, 5, 0, 0, 0).unwrap(), n)
    }

    #[test]
    fn three_point_example() {
        let r = compute_metrics(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0], &cal(3), &[0, 1, 2]).unwrap();
        assert!((r.mae - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.rmse - (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(r.complete_days, 0);
        assert!(r.avg_drmse.is_nan());
    }

    #[test]
    fn perfect_forecasts() {
        let v: Vec<f64> = (0..168).map(|i| i as f64).collect();
        let hours: Vec<usize> = (0..168).collect();
        let r = compute_metrics(&v, &v, &cal(168), &hours).unwrap();
        assert_eq!((r.mae, r.rmse, r.avg_drmse, r.avg_wrmse), (0.0, 0.0, 0.0, 0.0));
        assert_eq!(r.complete_weeks, 1);
    }

    #[test]
    fn empty_is_an_error() {
        let e: [f64; 0] = [];
        assert!(matches!(compute_metrics(&e, &e, &cal(1), &[]), Err(Error::Empty(_))));
    }
}

//! Regression design: seasonal price lags, calendar dummies and external
//! predictors aligned to each target hour.

use std::ops::Range;

use chrono::Weekday;
use ndarray::{Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::data::HourlyPanel;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Seasonal price lags available to every model.
pub const SEASONAL_LAGS: [usize; 3] = [24, 48, 168];

/// Declarative description of a design matrix.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    /// Subset of [`SEASONAL_LAGS`].
    #[serde(default = "default_lags")]
    pub lags: Vec<usize>,
    /// Direct previous-hour lags `p_{t-1} .. p_{t-n}`; only ARMA-family
    /// models use these since they require recursive forecasting.
    #[serde(default)]
    pub n_recent_lags: usize,
    #[serde(default = "yes")]
    pub weekend_dummies: bool,
    #[serde(default = "yes")]
    pub hour_dummies: bool,
    /// Drop the hour-24 dummy so the design stays full rank alongside an
    /// intercept.
    #[serde(default = "yes")]
    pub drop_baseline_hour: bool,
    #[serde(default)]
    pub predictors: Vec<String>,
    #[serde(default)]
    pub standardize: bool,
}

fn default_lags() -> Vec<usize> {
    SEASONAL_LAGS.to_vec()
}
fn yes() -> bool {
    true
}

impl Default for FeatureSpec {
    fn default() -> Self {
        Self {
            lags: default_lags(),
            n_recent_lags: 0,
            weekend_dummies: true,
            hour_dummies: true,
            drop_baseline_hour: true,
            predictors: Vec::new(),
            standardize: false,
        }
    }
}

impl FeatureSpec {
    pub fn with_predictors(predictors: Vec<String>) -> Self {
        Self {
            predictors,
            ..Self::default()
        }
    }

    pub fn max_lag(&self) -> usize {
        self.lags.iter().copied().max().unwrap_or(0).max(self.n_recent_lags)
    }

    pub fn validate(&self) -> Result<()> {
        for l in &self.lags {
            if !SEASONAL_LAGS.contains(l) {
                return Err(Error::Config(format!("lag {l} is not one of {SEASONAL_LAGS:?}")));
            }
        }
        let mut names = self.predictors.clone();
        names.sort();
        names.dedup();
        if names.len() != self.predictors.len() {
            return Err(Error::Config("predictor names must be unique".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ColumnKind {
    SeasonalLag(usize),
    RecentLag(usize),
    Weekend(Weekday),
    Hour(usize),
    Predictor(String),
}

impl ColumnKind {
    pub fn is_dummy(&self) -> bool {
        matches!(self, ColumnKind::Weekend(_) | ColumnKind::Hour(_))
    }

    pub fn label(&self) -> String {
        match self {
            ColumnKind::SeasonalLag(l) => format!("lag{l}"),
            ColumnKind::RecentLag(l) => format!("ar{l}"),
            ColumnKind::Weekend(Weekday::Sat) => "sat".into(),
            ColumnKind::Weekend(_) => "sun".into(),
            ColumnKind::Hour(h) => format!("hour{h:02}"),
            ColumnKind::Predictor(n) => n.clone(),
        }
    }
}

/// Per-column affine transform `z = (x − center) / scale`.
#[derive(Clone, Debug, PartialEq)]
pub struct Standardization<F> {
    pub center: Vec<F>,
    pub scale: Vec<F>,
}

impl<F: Scalar> Standardization<F> {
    pub fn apply_row(&self, row: &mut [F]) {
        for ((v, c), s) in row.iter_mut().zip(&self.center).zip(&self.scale) {
            *v = (*v - *c) / *s;
        }
    }

    pub fn apply(&self, x: &mut Array2<F>) {
        for mut row in x.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (*v - self.center[j]) / self.scale[j];
            }
        }
    }

    pub fn invert(&self, x: &mut Array2<F>) {
        for mut row in x.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = *v * self.scale[j] + self.center[j];
            }
        }
    }
}

/// Rows of design values for consecutive target hours.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix<F> {
    pub x: Array2<F>,
    pub target: Array1<F>,
    /// Hour index of each row in the source calendar.
    pub row_times: Vec<usize>,
    pub columns: Vec<ColumnKind>,
    pub standardization: Option<Standardization<F>>,
}

impl<F: Scalar> FeatureMatrix<F> {
    /// Bare design with columns named `x1 .. xp` and rows at hours `0..n`.
    pub fn from_arrays(x: Array2<F>, target: Array1<F>) -> Self {
        Self {
            columns: (1..=x.ncols()).map(|j| ColumnKind::Predictor(format!("x{j}"))).collect(),
            row_times: (0..x.nrows()).collect(),
            x,
            target,
            standardization: None,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.x.ncols()
    }

    pub fn column_names(&self) -> Vec<String> {
        self.columns.iter().map(ColumnKind::label).collect()
    }

    /// Rows at positions `range` (not hour indices).
    pub fn rows(&self, range: Range<usize>) -> Self {
        Self {
            x: self.x.slice(ndarray::s![range.clone(), ..]).to_owned(),
            target: self.target.slice(ndarray::s![range.clone()]).to_owned(),
            row_times: self.row_times[range].to_vec(),
            columns: self.columns.clone(),
            standardization: self.standardization.clone(),
        }
    }

    /// Rows whose target hours lie in `hours`. Rows are contiguous in time.
    pub fn hours(&self, hours: Range<usize>) -> Result<Self> {
        let first = *self
            .row_times
            .first()
            .ok_or_else(|| Error::Empty("feature matrix has no rows".into()))?;
        let last = first + self.row_times.len();
        if hours.start < first || hours.end > last || hours.start >= hours.end {
            return Err(Error::Range(format!(
                "hours {hours:?} outside feature rows {first}..{last}"
            )));
        }
        Ok(self.rows(hours.start - first..hours.end - first))
    }

    /// Drops columns whose labels are listed.
    pub fn without_columns(&self, labels: &[String]) -> Self {
        let keep: Vec<usize> = (0..self.n_cols())
            .filter(|&j| !labels.contains(&self.columns[j].label()))
            .collect();
        let x = self.x.select(Axis(1), &keep);
        Self {
            x,
            target: self.target.clone(),
            row_times: self.row_times.clone(),
            columns: keep.iter().map(|&j| self.columns[j].clone()).collect(),
            standardization: self.standardization.as_ref().map(|s| Standardization {
                center: keep.iter().map(|&j| s.center[j]).collect(),
                scale: keep.iter().map(|&j| s.scale[j]).collect(),
            }),
        }
    }
}

fn resolve_predictors<'a, F: Scalar>(panel: &'a HourlyPanel<F>, spec: &FeatureSpec) -> Result<Vec<&'a [F]>> {
    spec.predictors
        .iter()
        .map(|n| {
            panel
                .predictor(n)
                .map(|c| c.values.as_slice())
                .ok_or_else(|| Error::Schema(format!("unknown predictor `{n}`")))
        })
        .collect()
}

pub fn column_kinds(spec: &FeatureSpec) -> Vec<ColumnKind> {
    let mut cols = Vec::new();
    let mut lags = spec.lags.clone();
    lags.sort_unstable();
    cols.extend(lags.into_iter().map(ColumnKind::SeasonalLag));
    cols.extend((1..=spec.n_recent_lags).map(ColumnKind::RecentLag));
    if spec.weekend_dummies {
        cols.push(ColumnKind::Weekend(Weekday::Sat));
        cols.push(ColumnKind::Weekend(Weekday::Sun));
    }
    if spec.hour_dummies {
        let last = if spec.drop_baseline_hour { 23 } else { 24 };
        cols.extend((1..=last).map(ColumnKind::Hour));
    }
    cols.extend(spec.predictors.iter().cloned().map(ColumnKind::Predictor));
    cols
}

/// Design rows for target hours `hours`, reading lags from the panel.
pub fn build_rows<F: Scalar>(panel: &HourlyPanel<F>, spec: &FeatureSpec, hours: Range<usize>) -> Result<FeatureMatrix<F>> {
    spec.validate()?;
    let max_lag = spec.max_lag();
    if hours.start < max_lag {
        return Err(Error::History {
            needed: max_lag,
            available: hours.start,
        });
    }
    if hours.end > panel.len() || hours.start >= hours.end {
        return Err(Error::Range(format!("rows {hours:?} outside panel of {} hours", panel.len())));
    }
    let preds = resolve_predictors(panel, spec)?;
    let columns = column_kinds(spec);
    let cal = panel.calendar();
    let price = panel.price();
    let n = hours.len();
    let mut x = Array2::<F>::zeros((n, columns.len()));
    let mut target = Array1::<F>::zeros(n);
    let mut pred_idx = 0;
    for (j, col) in columns.iter().enumerate() {
        if let ColumnKind::Predictor(_) = col {
            let values = preds[pred_idx];
            pred_idx += 1;
            for (i, t) in hours.clone().enumerate() {
                x[[i, j]] = values[t];
            }
            continue;
        }
        for (i, t) in hours.clone().enumerate() {
            x[[i, j]] = match col {
                ColumnKind::SeasonalLag(l) | ColumnKind::RecentLag(l) => price[t - l],
                ColumnKind::Weekend(d) => indicator(cal.weekday_of(t) == *d),
                ColumnKind::Hour(h) => indicator(cal.hour_of_day(t) == *h),
                ColumnKind::Predictor(_) => unreachable!(),
            };
        }
    }
    for (i, t) in hours.clone().enumerate() {
        target[i] = price[t];
    }
    Ok(FeatureMatrix {
        x,
        target,
        row_times: hours.collect(),
        columns,
        standardization: None,
    })
}

fn indicator<F: Scalar>(b: bool) -> F {
    if b {
        F::one()
    } else {
        F::zero()
    }
}

/// Design for every hour with complete lag history.
pub fn build_features<F: Scalar>(panel: &HourlyPanel<F>, spec: &FeatureSpec) -> Result<FeatureMatrix<F>> {
    let max_lag = spec.max_lag();
    if panel.len() <= max_lag + 1 {
        return Err(Error::History {
            needed: max_lag + 2,
            available: panel.len(),
        });
    }
    build_rows(panel, spec, max_lag..panel.len())
}

/// Fits per-column centering and scaling on `m` and applies it.
pub fn standardize_fit_transform<F: Scalar>(m: &FeatureMatrix<F>, exclude_dummies: bool) -> Result<FeatureMatrix<F>> {
    if m.standardization.is_some() {
        return Err(Error::Precondition("matrix is already standardized".into()));
    }
    let stats = fit_standardization(m, exclude_dummies)?;
    let mut out = m.clone();
    stats.apply(&mut out.x);
    out.standardization = Some(stats);
    Ok(out)
}

pub fn fit_standardization<F: Scalar>(m: &FeatureMatrix<F>, exclude_dummies: bool) -> Result<Standardization<F>> {
    if m.n_rows() < 2 {
        return Err(Error::Precondition("standardization needs at least 2 rows".into()));
    }
    let mut center = Vec::with_capacity(m.n_cols());
    let mut scale = Vec::with_capacity(m.n_cols());
    for (j, col) in m.columns.iter().enumerate() {
        if exclude_dummies && col.is_dummy() {
            center.push(F::zero());
            scale.push(F::one());
            continue;
        }
        let c: ArrayView1<F> = m.x.column(j);
        let v = c.to_vec();
        let mu = crate::linalg::mean(&v);
        let sd = crate::linalg::sample_std(&v);
        if !(sd > F::epsilon() * mu.abs().max(F::one()) * F::of(16.0)) {
            return Err(Error::Variance(col.label()));
        }
        center.push(mu);
        scale.push(sd);
    }
    Ok(Standardization { center, scale })
}

/// Applies previously fitted statistics (from the training rows) to `m`.
pub fn apply_standardization<F: Scalar>(m: &FeatureMatrix<F>, stats: &Standardization<F>) -> Result<FeatureMatrix<F>> {
    if m.standardization.is_some() {
        return Err(Error::Precondition("matrix is already standardized".into()));
    }
    if stats.center.len() != m.n_cols() {
        return Err(Error::Schema("standardization width does not match design".into()));
    }
    let mut out = m.clone();
    stats.apply(&mut out.x);
    out.standardization = Some(stats.clone());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Frequency, HourlyCalendar, PredictorColumn};
    use chrono::{TimeZone, Utc};

    fn panel(prices: Vec<f64>) -> HourlyPanel<f64> {
        let n = prices.len();
        // 2010-01-01 is a Friday
        let cal = HourlyCalendar::new(Utc.with_ymd_and_hms(2010, 1, 1, 0, 0, 0).unwrap(), n);
        let load = PredictorColumn {
            name: "load".into(),
            frequency: Frequency::Hourly,
            values: (0..n).map(|i| (i as f64).sin()).collect(),
        };
        HourlyPanel::new(cal, prices, vec![load], "test").unwrap()
    }

    #[test]
    fn constant_series_gives_constant_lags() {
        let m = build_features(&panel(vec![7.0; 300]), &FeatureSpec::default()).unwrap();
        for j in 0..3 {
            assert!(m.x.column(j).iter().all(|v| *v == 7.0));
        }
    }

    #[test]
    fn lag168_drops_warmup_rows() {
        let m = build_features(&panel(vec![1.0; 200]), &FeatureSpec::default()).unwrap();
        assert_eq!(m.n_rows(), 32);
        assert_eq!(m.row_times[0], 168);
    }

    #[test]
    fn saturday_dummy_is_hot_on_saturday() {
        let p = panel((0..400).map(|i| i as f64).collect());
        let m = build_features(&p, &FeatureSpec::default()).unwrap();
        let sat = m.columns.iter().position(|c| *c == ColumnKind::Weekend(Weekday::Sat)).unwrap();
        let sun = sat + 1;
        for (i, &t) in m.row_times.iter().enumerate() {
            let wd = p.calendar().weekday_of(t);
            assert_eq!(m.x[[i, sat]] == 1.0, wd == Weekday::Sat);
            assert_eq!(m.x[[i, sun]] == 1.0, wd == Weekday::Sun);
        }
    }

    #[test]
    fn hour_dummies_partition_rows() {
        let p = panel((0..400).map(|i| i as f64).collect());
        let spec = FeatureSpec {
            drop_baseline_hour: false,
            ..FeatureSpec::default()
        };
        let m = build_features(&p, &spec).unwrap();
        let hours: Vec<usize> = (0..m.n_cols()).filter(|&j| matches!(m.columns[j], ColumnKind::Hour(_))).collect();
        assert_eq!(hours.len(), 24);
        for row in m.x.rows() {
            let s: f64 = hours.iter().map(|&j| row[j]).sum();
            assert_eq!(s, 1.0);
        }
    }

    #[test]
    fn lag24_equals_target_a_day_earlier() {
        let p = panel((0..400).map(|i| (i as f64 * 0.37).cos()).collect());
        let m = build_features(&p, &FeatureSpec::default()).unwrap();
        for i in 24..m.n_rows() {
            assert_eq!(m.x[[i, 0]], m.target[i - 24]);
        }
    }

    #[test]
    fn unknown_predictor_is_schema_error() {
        let spec = FeatureSpec::with_predictors(vec!["wind".into()]);
        assert!(matches!(build_features(&panel(vec![1.0; 300]), &spec), Err(Error::Schema(_))));
    }

    #[test]
    fn short_panel_is_history_error() {
        assert!(matches!(
            build_features(&panel(vec![1.0; 169]), &FeatureSpec::default()),
            Err(Error::History { .. })
        ));
    }

    fn single_column(values: Vec<f64>, kind: ColumnKind) -> FeatureMatrix<f64> {
        let n = values.len();
        FeatureMatrix {
            x: Array2::from_shape_vec((n, 1), values).unwrap(),
            target: Array1::zeros(n),
            row_times: (0..n).collect(),
            columns: vec![kind],
            standardization: None,
        }
    }

    #[test]
    fn standardize_centers_and_scales() {
        let m = single_column(vec![2.0, 4.0, 6.0], ColumnKind::Predictor("x".into()));
        let s = standardize_fit_transform(&m, true).unwrap();
        assert_eq!(s.x.column(0).to_vec(), vec![-1.0, 0.0, 1.0]);
    }

    #[test]
    fn dummies_are_left_alone() {
        let m = single_column(vec![0.0, 1.0, 0.0], ColumnKind::Hour(3));
        let s = standardize_fit_transform(&m, true).unwrap();
        assert_eq!(s.x, m.x);
    }

    #[test]
    fn double_standardization_is_rejected() {
        let m = single_column(vec![2.0, 4.0, 6.0], ColumnKind::Predictor("x".into()));
        let s = standardize_fit_transform(&m, true).unwrap();
        assert!(matches!(standardize_fit_transform(&s, true), Err(Error::Precondition(_))));
    }

    #[test]
    fn constant_column_is_variance_error() {
        let m = single_column(vec![3.0, 3.0, 3.0], ColumnKind::Predictor("fuel".into()));
        match standardize_fit_transform(&m, true) {
            Err(Error::Variance(name)) => assert_eq!(name, "fuel"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn standardization_inverts() {
        let p = panel((0..400).map(|i| 40.0 + (i as f64 * 0.1).sin() * 9.0).collect());
        let spec = FeatureSpec::with_predictors(vec!["load".into()]);
        let m = build_features(&p, &spec).unwrap();
        let s = standardize_fit_transform(&m, true).unwrap();
        let mut back = s.x.clone();
        s.standardization.as_ref().unwrap().invert(&mut back);
        for (a, b) in back.iter().zip(m.x.iter()) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }
}

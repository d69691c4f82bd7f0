//! Rolling-origin cross-validation over hyperparameter grids.
//!
//! Each fold trains on `d` consecutive hours and validates on the 24 hours
//! that follow; successive folds move forward one day. With a window of
//! `|T|` hours this yields `(|T| − d) / 24` folds that overlap, so their
//! union covers the window without partitioning it.

use std::io::Write;
use std::ops::Range;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::HourlyPanel;
use crate::error::{Error, Result};
use crate::features::{self, FeatureMatrix};
use crate::models::fitted::{design_for, fit_model, forecast_24h, ForecastContext, HORIZON};
use crate::models::spec::{
    m_try_grid, BlmConfig, ForecasterSpec, Hyper, ModelKind, PcrConfig, PenaltyConfig, PenaltyKind, RfConfig, SvrConfig,
    BLM_MSTOP_GRID, SVR_C_GRID,
};
use crate::models::{blm, linear, pcr, svr};
use crate::scalar::Scalar;

pub const LAMBDA_GRID_LEN: usize = 100;
pub const LAMBDA_GRID_RATIO: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TuningPlan {
    #[serde(default = "default_window")]
    pub training_window_hours: usize,
    #[serde(default = "default_subset")]
    pub subset_size_hours: usize,
}

fn default_window() -> usize {
    672
}
fn default_subset() -> usize {
    504
}

impl Default for TuningPlan {
    fn default() -> Self {
        Self {
            training_window_hours: default_window(),
            subset_size_hours: default_subset(),
        }
    }
}

impl TuningPlan {
    pub fn fold_count(&self) -> Result<usize> {
        let w = self.training_window_hours;
        let d = self.subset_size_hours;
        if w < d + HORIZON {
            return Err(Error::Plan(format!("window {w} leaves no validation day after subsets of {d}")));
        }
        if (w - d) % HORIZON != 0 {
            return Err(Error::Plan(format!("window {w} minus subset {d} is not a whole number of days")));
        }
        Ok((w - d) / HORIZON)
    }

    /// Folds over the window of training hours ending at `end`.
    pub fn folds_ending_at(&self, end: usize) -> Result<Vec<Fold>> {
        if end < self.training_window_hours {
            return Err(Error::History {
                needed: self.training_window_hours,
                available: end,
            });
        }
        make_folds(end - self.training_window_hours..end, self.subset_size_hours)
    }
}

/// Training hours followed by the validation day.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fold {
    pub train: Range<usize>,
    pub validate: Range<usize>,
}

pub fn make_folds(training: Range<usize>, d: usize) -> Result<Vec<Fold>> {
    let plan = TuningPlan {
        training_window_hours: training.len(),
        subset_size_hours: d,
    };
    let k = plan.fold_count()?;
    if d == 0 {
        return Err(Error::Plan("subset size must be positive".into()));
    }
    Ok((0..k)
        .map(|j| {
            let start = training.start + j * HORIZON;
            Fold {
                train: start..start + d,
                validate: start + d..start + d + HORIZON,
            }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct TuningResult<F> {
    pub candidates: Vec<Hyper>,
    /// Mean validation RMSE per candidate.
    pub scores: Vec<f64>,
    /// `fold_scores[c][j]` for candidate `c` and fold `j`; `+∞` marks a
    /// failed fit.
    pub fold_scores: Vec<Vec<f64>>,
    pub best_index: usize,
    pub failed_fits: usize,
    pub folds: Vec<Fold>,
    /// Validation forecasts of the best candidate, fold by fold.
    pub best_predictions: Vec<Vec<F>>,
}

impl<F: Scalar> TuningResult<F> {
    pub fn best(&self) -> &Hyper {
        &self.candidates[self.best_index]
    }

    pub fn best_score(&self) -> f64 {
        self.scores[self.best_index]
    }
}

/// Short `key=value` description of a hyperparameter record.
pub fn describe(h: &Hyper) -> String {
    match h {
        Hyper::None => "-".into(),
        Hyper::Arma(o) if o.select_by_aicc => format!("aicc over {} orders", o.grid.len()),
        Hyper::Arma(o) => format!("p={} q={}", o.p, o.q),
        Hyper::Penalty(p) => format!("lambda={:.6e}", p.lambda),
        Hyper::Svr(s) => format!("C={} epsilon={}", s.c, s.epsilon),
        Hyper::Forest(r) => format!("m_try={} trees={}", r.m_try.map_or("auto".into(), |m| m.to_string()), r.n_trees),
        Hyper::Pcr(c) => format!("k={}", c.k),
        Hyper::Blm(b) => format!("m_stop={} nu={}", b.m_stop, b.nu),
        Hyper::Ensemble(e) => format!("members={}", e.members.join("+")),
    }
}

/// Default search grid for `spec`, using the training window `window` for
/// the data-dependent parts (λ_max, column count). Kinds without tunable
/// parameters get their own hyperparameters as the single candidate.
pub fn auto_grid<F: Scalar>(spec: &ForecasterSpec, panel: &HourlyPanel<F>, window: Range<usize>) -> Result<Vec<Hyper>> {
    let design = || -> Result<FeatureMatrix<F>> {
        crate::models::fitted::training_design(spec, panel, window.clone())
    };
    Ok(match &spec.hyper {
        Hyper::Penalty(p) => {
            let m = design()?;
            let top = match p.kind {
                PenaltyKind::Lasso => linear::lambda_max(&m)?,
                PenaltyKind::Ridge => linear::ridge_lambda_max(&m)?,
            };
            linear::lambda_grid(top, LAMBDA_GRID_LEN, F::of(LAMBDA_GRID_RATIO))
                .into_iter()
                .map(|l| {
                    Hyper::Penalty(PenaltyConfig {
                        lambda: l.as_f64(),
                        ..p.clone()
                    })
                })
                .collect()
        }
        Hyper::Svr(s) => SVR_C_GRID
            .iter()
            .map(|&c| Hyper::Svr(SvrConfig { c, ..s.clone() }))
            .collect(),
        Hyper::Forest(r) => {
            let p = features::column_kinds(&design_for(spec)).len();
            m_try_grid(p)
                .into_iter()
                .map(|m| {
                    Hyper::Forest(RfConfig {
                        m_try: Some(m),
                        ..r.clone()
                    })
                })
                .collect()
        }
        Hyper::Pcr(_) => {
            let p = features::column_kinds(&design_for(spec)).len();
            (1..=p).map(|k| Hyper::Pcr(PcrConfig { k })).collect()
        }
        Hyper::Blm(b) => BLM_MSTOP_GRID
            .iter()
            .map(|&m| Hyper::Blm(BlmConfig { m_stop: m, nu: b.nu }))
            .collect(),
        other => vec![other.clone()],
    })
}

fn with_hyper(spec: &ForecasterSpec, h: &Hyper) -> ForecasterSpec {
    ForecasterSpec {
        hyper: h.clone(),
        ..spec.clone()
    }
}

/// Validation forecasts of one candidate on one fold through the generic
/// fit/forecast path.
fn single_fold_forecast<F: Scalar>(spec: &ForecasterSpec, panel: &HourlyPanel<F>, fold: &Fold) -> Result<Vec<F>> {
    let model = fit_model(spec, panel, fold.train.clone())?;
    let lookback = design_for(spec).max_lag().max(crate::models::NAIVE_LAG);
    let ctx = ForecastContext::from_panel(panel, fold.validate.start, lookback.min(fold.validate.start))?;
    forecast_24h(&model, &ctx)
}

/// Design rows for the fold's training hours and validation day, with the
/// validation rows scaled by the training statistics.
fn fold_design<F: Scalar>(spec: &ForecasterSpec, panel: &HourlyPanel<F>, fold: &Fold) -> Result<(FeatureMatrix<F>, Array2<F>)> {
    let design = design_for(spec);
    let train = features::build_rows(panel, &design, fold.train.clone())?;
    let valid = features::build_rows(panel, &design, fold.validate.clone())?;
    if spec.kind.standardizes() {
        let train = features::standardize_fit_transform(&train, true)?;
        let valid = features::apply_standardization(&valid, train.standardization.as_ref().expect("just fitted"))?;
        Ok((train, valid.x))
    } else {
        Ok((train, valid.x))
    }
}

/// Candidates that share one estimation path, e.g. a λ sequence.
fn path_forecasts<F: Scalar>(spec: &ForecasterSpec, cands: &[Hyper], panel: &HourlyPanel<F>, fold: &Fold) -> Option<Result<Vec<Vec<F>>>> {
    if cands.len() < 2 {
        return None;
    }
    let run = || -> Result<Vec<Vec<F>>> {
        let (m, vx) = fold_design(spec, panel, fold)?;
        let out = match (spec.kind, &cands[0]) {
            (ModelKind::Ridge, Hyper::Penalty(p0)) => {
                let lambdas: Vec<F> = cands.iter().map(|h| F::of(penalty(h).lambda)).collect();
                linear::ridge_path(&m, &lambdas, p0.fit_intercept)?
                    .iter()
                    .map(|f| f.predict(vx.view()).to_vec())
                    .collect()
            }
            (ModelKind::Lasso, Hyper::Penalty(p0)) => {
                let lambdas: Vec<F> = cands.iter().map(|h| F::of(penalty(h).lambda)).collect();
                linear::lasso_path(&m, &lambdas, p0)?
                    .iter()
                    .map(|f| f.predict(vx.view()).to_vec())
                    .collect()
            }
            (ModelKind::Pcr, _) => {
                let ks: Vec<usize> = cands
                    .iter()
                    .map(|h| match h {
                        Hyper::Pcr(c) => c.k,
                        _ => unreachable!(),
                    })
                    .collect();
                pcr::pcr_path(&m, &ks)?
                    .iter()
                    .map(|f| f.predict(vx.view()).to_vec())
                    .collect()
            }
            (ModelKind::Blm, Hyper::Blm(b0)) => {
                let ms: Vec<usize> = cands
                    .iter()
                    .map(|h| match h {
                        Hyper::Blm(b) => b.m_stop,
                        _ => unreachable!(),
                    })
                    .collect();
                blm::blm_path(&m, b0.nu, &ms)?
                    .iter()
                    .map(|f| f.predict(vx.view()).to_vec())
                    .collect()
            }
            (ModelKind::Svr, Hyper::Svr(s0)) => {
                let sigma = if s0.sigma_rule {
                    svr::median_heuristic_sigma(m.x.view(), s0.seed)?
                } else {
                    F::of(s0.sigma)
                };
                let k = svr::rbf_kernel(m.x.view(), sigma);
                cands
                    .iter()
                    .map(|h| match h {
                        Hyper::Svr(c) => Ok(svr::fit_svr_with_kernel(&m, &k, sigma, c)?.predict(vx.view()).to_vec()),
                        _ => unreachable!(),
                    })
                    .collect::<Result<Vec<_>>>()?
            }
            _ => return Err(Error::Precondition("no shared path".into())),
        };
        Ok(out)
    };
    let shareable = match (spec.kind, &cands[0]) {
        (ModelKind::Ridge | ModelKind::Lasso, Hyper::Penalty(p0)) => cands
            .iter()
            .all(|h| matches!(h, Hyper::Penalty(p) if p.kind == p0.kind && p.fit_intercept == p0.fit_intercept && p.tolerance == p0.tolerance && p.max_sweeps == p0.max_sweeps)),
        (ModelKind::Pcr, _) => cands.iter().all(|h| matches!(h, Hyper::Pcr(_))),
        (ModelKind::Blm, Hyper::Blm(b0)) => cands.iter().all(|h| matches!(h, Hyper::Blm(b) if b.nu == b0.nu)),
        (ModelKind::Svr, Hyper::Svr(s0)) => cands
            .iter()
            .all(|h| matches!(h, Hyper::Svr(s) if s.sigma_rule == s0.sigma_rule && s.sigma == s0.sigma && s.seed == s0.seed)),
        _ => false,
    };
    if !shareable {
        return None;
    }
    Some(run())
}

fn penalty(h: &Hyper) -> &PenaltyConfig {
    match h {
        Hyper::Penalty(p) => p,
        _ => unreachable!("penalty path holds penalty candidates only"),
    }
}

fn rmse<F: Scalar>(pred: &[F], actual: &[F]) -> f64 {
    let ss: f64 = pred
        .iter()
        .zip(actual)
        .map(|(p, a)| {
            let e = p.as_f64() - a.as_f64();
            e * e
        })
        .sum();
    let r = (ss / pred.len() as f64).sqrt();
    if r.is_finite() {
        r
    } else {
        f64::INFINITY
    }
}

/// Evaluates every candidate on every fold and keeps the lowest mean RMSE
/// (first listed wins ties). A fit that fails scores `+∞` on that fold.
pub fn tune<F: Scalar>(spec: &ForecasterSpec, candidates: &[Hyper], folds: &[Fold], panel: &HourlyPanel<F>) -> Result<TuningResult<F>> {
    if candidates.is_empty() {
        return Err(Error::Config("empty hyperparameter grid".into()));
    }
    if folds.is_empty() {
        return Err(Error::Plan("no folds".into()));
    }
    for f in folds {
        if f.validate.start < f.train.end || f.validate.end > panel.len() {
            return Err(Error::Plan(format!("fold {:?} -> {:?} is not a valid split", f.train, f.validate)));
        }
    }
    let per_fold: Vec<Vec<Option<Vec<F>>>> = folds
        .par_iter()
        .map(|fold| {
            let shared = path_forecasts(spec, candidates, panel, fold);
            match shared {
                Some(Ok(preds)) => preds.into_iter().map(Some).collect(),
                _ => candidates
                    .iter()
                    .map(|h| single_fold_forecast(&with_hyper(spec, h), panel, fold).ok())
                    .collect(),
            }
        })
        .collect();
    let realized: Vec<&[F]> = folds.iter().map(|f| &panel.price()[f.validate.clone()]).collect();
    let mut failed = 0;
    let fold_scores: Vec<Vec<f64>> = (0..candidates.len())
        .map(|c| {
            (0..folds.len())
                .map(|j| match &per_fold[j][c] {
                    Some(p) => rmse(p, realized[j]),
                    None => {
                        failed += 1;
                        f64::INFINITY
                    }
                })
                .collect()
        })
        .collect();
    let scores: Vec<f64> = fold_scores
        .iter()
        .map(|s| s.iter().sum::<f64>() / s.len() as f64)
        .collect();
    let mut best_index = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s < scores[best_index] {
            best_index = i;
        }
    }
    let best_predictions = (0..folds.len())
        .map(|j| {
            per_fold[j][best_index]
                .clone()
                .unwrap_or_else(|| realized[j].iter().map(|_| F::nan()).collect())
        })
        .collect();
    Ok(TuningResult {
        candidates: candidates.to_vec(),
        scores,
        fold_scores,
        best_index,
        failed_fits: failed,
        folds: folds.to_vec(),
        best_predictions,
    })
}

/// Score table: one row per candidate with its mean and per-fold RMSE.
pub fn write_score_table<F: Scalar, W: Write>(result: &TuningResult<F>, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["candidate".to_string(), "params".to_string(), "mean_rmse".to_string()];
    header.extend((1..=result.folds.len()).map(|j| format!("fold_{j}")));
    w.write_record(&header)?;
    for (i, h) in result.candidates.iter().enumerate() {
        let mut rec = vec![(i + 1).to_string(), describe(h), format!("{:.4}", result.scores[i])];
        rec.extend(result.fold_scores[i].iter().map(|s| format!("{s:.4}")));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

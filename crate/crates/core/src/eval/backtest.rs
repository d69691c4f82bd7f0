//! Daily rolling re-estimation backtest.

use std::collections::BTreeMap;
use std::ops::Range;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{compute_metrics, MetricReport};
use crate::data::{HourlyCalendar, HourlyPanel};
use crate::error::{Error, Result};
use crate::models::fitted::{design_for, fit_model, forecast_24h, ForecastContext, HORIZON, NAIVE_LAG};
use crate::models::spec::{ForecasterSpec, Hyper, ModelKind};
use crate::models::{fit_ensemble, EnsembleFit};
use crate::scalar::Scalar;
use crate::seeds;
use crate::tuner::{auto_grid, describe, tune, TuningPlan, TuningResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BacktestPlan {
    /// Panel index of the first hour of each target day.
    pub evaluation_days: Vec<usize>,
    #[serde(default = "default_window")]
    pub training_window_hours: usize,
    #[serde(default)]
    pub tuning: TuningPlan,
    #[serde(default = "default_retune")]
    pub retune_every_days: usize,
    pub models: Vec<ForecasterSpec>,
    /// Explicit grids by model id; other tunable models use [`auto_grid`].
    #[serde(default)]
    pub grids: BTreeMap<String, Vec<Hyper>>,
    #[serde(default = "yes")]
    pub tune: bool,
    pub seed: u64,
    /// Worker threads; 0 uses the ambient pool.
    #[serde(default)]
    pub jobs: usize,
}

fn default_window() -> usize {
    672
}
fn default_retune() -> usize {
    7
}
fn yes() -> bool {
    true
}

impl BacktestPlan {
    pub fn new(models: Vec<ForecasterSpec>, evaluation_days: Vec<usize>, seed: u64) -> Self {
        Self {
            evaluation_days,
            training_window_hours: default_window(),
            tuning: TuningPlan::default(),
            retune_every_days: default_retune(),
            models,
            grids: BTreeMap::new(),
            tune: true,
            seed,
            jobs: 0,
        }
    }

    /// Hours of history each target day needs.
    pub fn required_history(&self) -> usize {
        let lag = self
            .models
            .iter()
            .map(|m| design_for(m).max_lag())
            .max()
            .unwrap_or(0)
            .max(NAIVE_LAG);
        self.training_window_hours.max(self.tuning.training_window_hours) + lag
    }

    pub fn validate<F: Scalar>(&self, panel: &HourlyPanel<F>) -> Result<()> {
        if self.models.is_empty() {
            return Err(Error::Config("backtest plan has no models".into()));
        }
        if self.evaluation_days.is_empty() {
            return Err(Error::Config("backtest plan has no evaluation days".into()));
        }
        if self.retune_every_days == 0 {
            return Err(Error::Config("retune cadence must be at least one day".into()));
        }
        let mut ids: Vec<&str> = self.models.iter().map(|m| m.id.as_str()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("model ids must be unique".into()));
        }
        for m in &self.models {
            m.validate()?;
            if let Hyper::Ensemble(e) = &m.hyper {
                if e.members.len() < 2 {
                    return Err(Error::Config(format!("ensemble `{}` needs at least two members", m.id)));
                }
                for id in &e.members {
                    match self.models.iter().find(|x| &x.id == id) {
                        None => return Err(Error::Config(format!("ensemble member `{id}` is not in the plan"))),
                        Some(x) if x.kind == ModelKind::Ensemble => {
                            return Err(Error::Config("ensembles cannot nest".into()))
                        }
                        _ => {}
                    }
                }
            }
        }
        self.tuning.fold_count()?;
        let need = self.required_history();
        for w in self.evaluation_days.windows(2) {
            if w[1] < w[0] + HORIZON {
                return Err(Error::Config("evaluation days must be increasing and non-overlapping".into()));
            }
        }
        let first = self.evaluation_days[0];
        if first < need {
            return Err(Error::History {
                needed: need,
                available: first,
            });
        }
        let last = *self.evaluation_days.last().expect("non-empty");
        if last + HORIZON > panel.len() {
            return Err(Error::Range(format!("target day at hour {last} runs past the panel end")));
        }
        Ok(())
    }
}

/// Starts of the `n` consecutive days beginning at the first midnight at
/// or after hour `from`.
pub fn days_from<F: Scalar>(panel: &HourlyPanel<F>, from: usize, n: usize) -> Result<Vec<usize>> {
    let cal = panel.calendar();
    let mut start = from;
    while start < panel.len() && cal.hour_of_day(start) != 1 {
        start += 1;
    }
    let days: Vec<usize> = (0..n).map(|i| start + i * HORIZON).collect();
    match days.last() {
        Some(&l) if l + HORIZON <= panel.len() => Ok(days),
        _ => Err(Error::Range(format!("{n} days from hour {from} run past the panel end"))),
    }
}

/// Starts of the last `n` complete days of the panel.
pub fn last_days<F: Scalar>(panel: &HourlyPanel<F>, n: usize) -> Result<Vec<usize>> {
    let cal = panel.calendar();
    let mut end = panel.len();
    while end > 0 && cal.hour_of_day(end - 1) != 24 {
        end -= 1;
    }
    if end < n * HORIZON {
        return Err(Error::Range(format!("panel has fewer than {n} complete days")));
    }
    Ok((0..n).map(|i| end - (n - i) * HORIZON).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TuningRecord {
    /// Index into the evaluation days where this choice took effect.
    pub from_day: usize,
    pub choice: String,
    pub cv_rmse: f64,
    pub failed_fits: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelRun<F> {
    pub id: String,
    pub label: String,
    pub uses_externals: bool,
    /// 24 forecasts per evaluation day, in chronological order.
    pub forecasts: Vec<F>,
    /// Evaluation-day indices that fell back to the naive forecast.
    pub fallback_days: Vec<usize>,
    pub failures: Vec<String>,
    pub notes: Vec<String>,
    pub tuning: Vec<TuningRecord>,
    /// Training target hours used for each evaluation day.
    pub training_windows: Vec<Range<usize>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BacktestResult<F> {
    pub calendar: HourlyCalendar,
    pub evaluation_days: Vec<usize>,
    /// Panel index of every forecast hour.
    pub hours: Vec<usize>,
    pub realized: Vec<F>,
    pub runs: Vec<ModelRun<F>>,
}

impl<F: Scalar> BacktestResult<F> {
    pub fn run(&self, id: &str) -> Result<&ModelRun<F>> {
        self.runs
            .iter()
            .find(|r| r.id == id)
            .ok_or_else(|| Error::Config(format!("no model `{id}` in the backtest")))
    }

    pub fn metrics(&self, id: &str) -> Result<MetricReport> {
        let r = self.run(id)?;
        compute_metrics(&r.forecasts, &self.realized, &self.calendar, &self.hours)
    }

    /// Realized minus forecast.
    pub fn errors(&self, id: &str) -> Result<Vec<F>> {
        let r = self.run(id)?;
        Ok(self.realized.iter().zip(&r.forecasts).map(|(a, f)| *a - *f).collect())
    }
}

fn with_seed(h: &Hyper, seed: u64) -> Hyper {
    match h {
        Hyper::Forest(r) => Hyper::Forest(crate::models::RfConfig { seed, ..r.clone() }),
        Hyper::Svr(s) => Hyper::Svr(crate::models::SvrConfig { seed, ..s.clone() }),
        other => other.clone(),
    }
}

fn naive_forecast<F: Scalar>(panel: &HourlyPanel<F>, cutoff: usize) -> Vec<F> {
    (0..HORIZON).map(|h| panel.price()[cutoff + h - NAIVE_LAG]).collect()
}

struct DayOutcome<F> {
    forecast: Vec<F>,
    failure: Option<String>,
    notes: Vec<String>,
}

fn forecast_day<F: Scalar>(spec: &ForecasterSpec, panel: &HourlyPanel<F>, cutoff: usize, window: usize) -> Result<(Vec<F>, Vec<String>)> {
    let model = fit_model(spec, panel, cutoff - window..cutoff)?;
    let lookback = design_for(spec).max_lag().max(NAIVE_LAG);
    let ctx = ForecastContext::from_panel(panel, cutoff, lookback)?;
    let f = forecast_24h(&model, &ctx)?;
    if f.iter().any(|v| !v.is_finite()) {
        return Err(Error::Degenerate("non-finite forecast".into()));
    }
    Ok((f, model.notes))
}

pub fn run_backtest<F: Scalar>(panel: &HourlyPanel<F>, plan: &BacktestPlan) -> Result<BacktestResult<F>> {
    plan.validate(panel)?;
    with_workers(plan.jobs, || execute(panel, plan))
}

/// Runs `f` on a pool of `jobs` threads, or on the ambient pool for 0.
pub fn with_workers<T: Send>(jobs: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    if jobs == 0 {
        return f();
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?
        .install(f)
}

fn execute<F: Scalar>(panel: &HourlyPanel<F>, plan: &BacktestPlan) -> Result<BacktestResult<F>> {
    let days = &plan.evaluation_days;
    let window = plan.training_window_hours;
    let blocks: Vec<usize> = (0..days.len()).step_by(plan.retune_every_days).collect();
    let block_of = |day: usize| day / plan.retune_every_days;

    let members: Vec<&str> = plan
        .models
        .iter()
        .filter_map(|m| match &m.hyper {
            Hyper::Ensemble(e) => Some(e.members.iter().map(String::as_str).collect::<Vec<_>>()),
            _ => None,
        })
        .flatten()
        .collect();

    // grids fixed per (model, block)
    // ensemble members always need validation forecasts for the stacking fit
    let needs_tuning = |m: &ForecasterSpec| -> bool {
        m.kind != ModelKind::Ensemble && (plan.tune || members.contains(&m.id.as_str()))
    };
    let tasks: Vec<(usize, usize)> = plan
        .models
        .iter()
        .enumerate()
        .filter(|(_, m)| needs_tuning(m))
        .flat_map(|(i, _)| blocks.iter().map(move |&b| (i, b)))
        .collect();
    let tuned: Vec<Result<Option<TuningResult<F>>>> = tasks
        .par_iter()
        .map(|&(i, b)| {
            let spec = &plan.models[i];
            let cutoff = days[b];
            let seed = seeds::derive_named(plan.seed, &spec.id, cutoff as u64);
            let grid = match plan.grids.get(&spec.id) {
                _ if !plan.tune => vec![spec.hyper.clone()],
                Some(g) => g.clone(),
                None => auto_grid(spec, panel, cutoff - plan.tuning.training_window_hours..cutoff)?,
            };
            if grid.len() < 2 && !members.contains(&spec.id.as_str()) {
                return Ok(None);
            }
            let grid: Vec<Hyper> = grid.iter().map(|h| with_seed(h, seed)).collect();
            let folds = plan.tuning.folds_ending_at(cutoff)?;
            tune(spec, &grid, &folds, panel).map(Some)
        })
        .collect();
    let mut tuning: BTreeMap<(usize, usize), Result<Option<TuningResult<F>>>> = BTreeMap::new();
    for (t, r) in tasks.iter().zip(tuned) {
        tuning.insert(*t, r);
    }

    let chosen = |i: usize, day: usize| -> Hyper {
        let spec = &plan.models[i];
        let b = block_of(day) * plan.retune_every_days;
        match tuning.get(&(i, b)) {
            Some(Ok(Some(t))) => t.best().clone(),
            _ => spec.hyper.clone(),
        }
    };

    let fit_tasks: Vec<(usize, usize)> = plan
        .models
        .iter()
        .enumerate()
        .filter(|(_, m)| m.kind != ModelKind::Ensemble)
        .flat_map(|(i, _)| (0..days.len()).map(move |d| (i, d)))
        .collect();
    let outcomes: Vec<DayOutcome<F>> = fit_tasks
        .par_iter()
        .map(|&(i, d)| {
            let cutoff = days[d];
            let seed = seeds::derive_named(plan.seed, &plan.models[i].id, cutoff as u64);
            let spec = ForecasterSpec {
                hyper: with_seed(&chosen(i, d), seed),
                ..plan.models[i].clone()
            };
            match forecast_day(&spec, panel, cutoff, window) {
                Ok((forecast, notes)) => DayOutcome {
                    forecast,
                    failure: None,
                    notes,
                },
                Err(e) => DayOutcome {
                    forecast: naive_forecast(panel, cutoff),
                    failure: Some(format!("day {d}: {e}")),
                    notes: Vec::new(),
                },
            }
        })
        .collect();

    let mut runs: Vec<Option<ModelRun<F>>> = vec![None; plan.models.len()];
    let mut cursor = 0;
    for (i, spec) in plan.models.iter().enumerate() {
        if spec.kind == ModelKind::Ensemble {
            continue;
        }
        let mut run = empty_run(spec);
        for d in 0..days.len() {
            let o = &outcomes[cursor];
            cursor += 1;
            run.forecasts.extend_from_slice(&o.forecast);
            run.training_windows.push(days[d] - window..days[d]);
            if let Some(msg) = &o.failure {
                run.fallback_days.push(d);
                run.failures.push(msg.clone());
            }
            for n in &o.notes {
                let tagged = format!("day {d}: {n}");
                run.notes.push(tagged);
            }
        }
        for &b in &blocks {
            match tuning.get(&(i, b)) {
                Some(Ok(Some(t))) => run.tuning.push(TuningRecord {
                    from_day: b,
                    choice: describe(t.best()),
                    cv_rmse: t.best_score(),
                    failed_fits: t.failed_fits,
                }),
                Some(Err(e)) => run.failures.push(format!("tuning from day {b}: {e}")),
                _ => {}
            }
        }
        runs[i] = Some(run);
    }

    for (i, spec) in plan.models.iter().enumerate() {
        let Hyper::Ensemble(cfg) = &spec.hyper else { continue };
        let member_idx: Vec<usize> = cfg
            .members
            .iter()
            .map(|id| plan.models.iter().position(|m| &m.id == id).expect("validated"))
            .collect();
        let mut run = empty_run(spec);
        for &b in &blocks {
            let fit = ensemble_weights(&member_idx, b, &tuning, panel);
            let span = b..(b + plan.retune_every_days).min(days.len());
            match &fit {
                Ok(f) => {
                    run.tuning.push(TuningRecord {
                        from_day: b,
                        choice: format!(
                            "weights {}",
                            f.weights.iter().map(|w| format!("{:.4}", w.as_f64())).collect::<Vec<_>>().join(" ")
                        ),
                        cv_rmse: f64::NAN,
                        failed_fits: 0,
                    });
                    if f.ridge_fallback {
                        run.notes.push(format!("day {b}: collinear members, ridge fallback"));
                    }
                }
                Err(e) => run.failures.push(format!("ensemble weights from day {b}: {e}")),
            }
            for d in span {
                run.training_windows.push(days[d] - window..days[d]);
                let cutoff = days[d];
                match &fit {
                    Ok(f) => {
                        let mut cols = Array2::<F>::zeros((HORIZON, member_idx.len()));
                        for (j, &m) in member_idx.iter().enumerate() {
                            let src = runs[m].as_ref().expect("members fitted first");
                            for h in 0..HORIZON {
                                cols[[h, j]] = src.forecasts[d * HORIZON + h];
                            }
                        }
                        run.forecasts.extend(f.combine(cols.view()).iter().copied());
                    }
                    Err(_) => {
                        run.forecasts.extend(naive_forecast(panel, cutoff));
                        run.fallback_days.push(d);
                    }
                }
            }
        }
        runs[i] = Some(run);
    }

    let hours: Vec<usize> = days.iter().flat_map(|&d| d..d + HORIZON).collect();
    let realized = hours.iter().map(|&t| panel.price()[t]).collect();
    Ok(BacktestResult {
        calendar: panel.calendar().clone(),
        evaluation_days: days.clone(),
        hours,
        realized,
        runs: runs.into_iter().map(|r| r.expect("every model run")).collect(),
    })
}

fn empty_run<F>(spec: &ForecasterSpec) -> ModelRun<F> {
    ModelRun {
        id: spec.id.clone(),
        label: spec.display_name(),
        uses_externals: spec.uses_externals(),
        forecasts: Vec::new(),
        fallback_days: Vec::new(),
        failures: Vec::new(),
        notes: Vec::new(),
        tuning: Vec::new(),
        training_windows: Vec::new(),
    }
}

#[allow(clippy::type_complexity)]
fn ensemble_weights<F: Scalar>(
    members: &[usize],
    block: usize,
    tuning: &BTreeMap<(usize, usize), Result<Option<TuningResult<F>>>>,
    panel: &HourlyPanel<F>,
) -> Result<EnsembleFit<F>> {
    let mut cols: Vec<Vec<F>> = Vec::with_capacity(members.len());
    let mut realized: Vec<F> = Vec::new();
    for (j, &m) in members.iter().enumerate() {
        let t = match tuning.get(&(m, block)) {
            Some(Ok(Some(t))) => t,
            Some(Err(e)) => return Err(Error::Degenerate(format!("member tuning failed: {e}"))),
            _ => return Err(Error::Precondition("member has no cross-validation predictions".into())),
        };
        let flat: Vec<F> = t.best_predictions.iter().flatten().copied().collect();
        if flat.iter().any(|v| !v.is_finite()) {
            return Err(Error::Degenerate("member failed on a validation fold".into()));
        }
        if j == 0 {
            realized = t
                .folds
                .iter()
                .flat_map(|f| panel.price()[f.validate.clone()].iter().copied())
                .collect();
        }
        cols.push(flat);
    }
    let n = realized.len();
    let mut p = Array2::<F>::zeros((n, members.len()));
    for (j, c) in cols.iter().enumerate() {
        if c.len() != n {
            return Err(Error::Schema("members used different folds".into()));
        }
        for (i, v) in c.iter().enumerate() {
            p[[i, j]] = *v;
        }
    }
    fit_ensemble(p.view(), &realized)
}

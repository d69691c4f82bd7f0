//! Fitted models, forecast contexts and 24-hour forecasts.

use std::fmt::Write as _;
use std::ops::Range;

use ndarray::{Array1, Array2, ArrayView2};

use super::arma::{self, ArmaFit};
use super::blm::{self, BlmFit};
use super::ensemble::EnsembleFit;
use super::forest::{self, ForestFit};
use super::linear::{self, LinearFit};
use super::pcr::{self, PcrFit};
use super::spec::{ForecasterSpec, Hyper, ModelKind};
use super::svr::{self, SvrFit};
use crate::data::{HourlyPanel, PredictorColumn};
use crate::error::{Error, Result};
use crate::features::{self, FeatureMatrix, FeatureSpec, Standardization};
use crate::scalar::Scalar;

pub const HORIZON: usize = 24;
/// Lag of the naive benchmark.
pub const NAIVE_LAG: usize = 168;

/// Estimated parameters of one forecaster.
#[derive(Clone, Debug, PartialEq)]
pub enum ModelState<F> {
    Naive,
    Linear(LinearFit<F>),
    Arma(ArmaFit<F>),
    Svr(SvrFit<F>),
    Forest(ForestFit<F>),
    Pcr(PcrFit<F>),
    Blm(BlmFit<F>),
    Ensemble {
        fit: EnsembleFit<F>,
        members: Vec<FittedModel<F>>,
    },
}

impl<F: Scalar> ModelState<F> {
    /// Predictions for design rows. ARMA models and ensembles need
    /// [`forecast_24h`] instead.
    pub fn predict_rows(&self, x: ArrayView2<F>) -> Result<Array1<F>> {
        Ok(match self {
            ModelState::Linear(f) => f.predict(x),
            ModelState::Svr(f) => f.predict(x),
            ModelState::Forest(f) => f.predict(x),
            ModelState::Pcr(f) => f.predict(x),
            ModelState::Blm(f) => f.predict(x),
            _ => return Err(Error::Precondition("model does not predict from design rows alone".into())),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FittedModel<F> {
    pub spec: ForecasterSpec,
    /// Feature spec actually used to build rows (ARMA adds recent lags).
    pub design: FeatureSpec,
    pub columns: Vec<String>,
    pub state: ModelState<F>,
    /// Target hours of the training rows, as panel indices.
    pub training_window: Range<usize>,
    pub standardization: Option<Standardization<F>>,
    /// Diagnostics raised during fitting.
    pub notes: Vec<String>,
}

/// Design spec for `spec`, adding the recent lags an ARMA order requires.
pub fn design_for(spec: &ForecasterSpec) -> FeatureSpec {
    let mut d = spec.features.clone();
    if let Hyper::Arma(o) = &spec.hyper {
        d.n_recent_lags = arma::max_recent_lag(o);
    }
    d
}

/// Stateless benchmark echoing the price one week earlier.
pub fn fit_naive<F: Scalar>(spec: &ForecasterSpec, history: &[F]) -> Result<FittedModel<F>> {
    if history.len() < NAIVE_LAG {
        return Err(Error::History {
            needed: NAIVE_LAG,
            available: history.len(),
        });
    }
    Ok(FittedModel {
        spec: spec.clone(),
        design: spec.features.clone(),
        columns: vec![format!("lag{NAIVE_LAG}")],
        state: ModelState::Naive,
        training_window: 0..history.len(),
        standardization: None,
        notes: Vec::new(),
    })
}

/// Estimates the kind-specific state on a prepared (and, where the kind
/// requires it, standardized) design.
pub fn fit_state<F: Scalar>(spec: &ForecasterSpec, m: &FeatureMatrix<F>) -> Result<(ModelState<F>, Vec<String>)> {
    let mut notes = Vec::new();
    let state = match (&spec.kind, &spec.hyper) {
        (ModelKind::Naive, _) => ModelState::Naive,
        (ModelKind::Dlr, _) => ModelState::Linear(linear::fit_ols(m)?),
        (ModelKind::Ridge | ModelKind::Lasso, Hyper::Penalty(p)) => ModelState::Linear(linear::fit_linear(m, Some(p))?),
        (_, Hyper::Arma(o)) => {
            let fit = arma::fit_seasonal_arma(m, o)?;
            if fit.reflected {
                notes.push("MA polynomial reflected into the invertible region".into());
            }
            if fit.stalled {
                notes.push("CSS line search stalled at machine precision".into());
            }
            ModelState::Arma(fit)
        }
        (_, Hyper::Svr(c)) => ModelState::Svr(svr::fit_svr(m, c)?),
        (_, Hyper::Forest(c)) => ModelState::Forest(forest::fit_random_forest(m, c)?),
        (_, Hyper::Pcr(c)) => ModelState::Pcr(pcr::fit_pcr(m, c.k)?),
        (_, Hyper::Blm(c)) => {
            let fit = blm::fit_blm(m, c)?;
            if !fit.skipped.is_empty() {
                notes.push(format!("zero-variance columns skipped: {}", fit.skipped.join(" ")));
            }
            ModelState::Blm(fit)
        }
        (ModelKind::Ensemble, _) => {
            return Err(Error::Config(
                "ensembles are fitted from member cross-validation predictions".into(),
            ))
        }
        _ => return Err(Error::Config(format!("hyperparameters do not match {:?}", spec.kind))),
    };
    Ok((state, notes))
}

/// Design rows for `hours`, standardized on those rows when the kind
/// requires it.
pub fn training_design<F: Scalar>(spec: &ForecasterSpec, panel: &HourlyPanel<F>, hours: Range<usize>) -> Result<FeatureMatrix<F>> {
    let m = features::build_rows(panel, &design_for(spec), hours)?;
    if spec.kind.standardizes() {
        features::standardize_fit_transform(&m, true)
    } else {
        Ok(m)
    }
}

/// Fits `spec` on the target hours `train` of `panel`. Every row reads only
/// prices before its own hour, so the training set never sees hours at or
/// after `train.end`.
pub fn fit_model<F: Scalar>(spec: &ForecasterSpec, panel: &HourlyPanel<F>, train: Range<usize>) -> Result<FittedModel<F>> {
    spec.validate()?;
    if spec.kind == ModelKind::Naive {
        let mut f = fit_naive(spec, &panel.price()[..train.end.min(panel.len())])?;
        f.training_window = train;
        return Ok(f);
    }
    let m = training_design(spec, panel, train.clone())?;
    let (state, notes) = fit_state(spec, &m)?;
    let columns = match &state {
        ModelState::Arma(a) => a.columns.iter().map(|c| c.label()).collect(),
        _ => m.column_names(),
    };
    let mut design = design_for(spec);
    if let ModelState::Arma(a) = &state {
        design.n_recent_lags = a.p;
    }
    Ok(FittedModel {
        spec: spec.clone(),
        design,
        columns,
        state,
        training_window: train,
        standardization: m.standardization,
        notes,
    })
}

/// Owned history slice ending at a day-ahead cutoff, followed by the 24
/// target hours whose prices are masked and whose predictor values are
/// known in advance.
#[derive(Clone, Debug, PartialEq)]
pub struct ForecastContext<F> {
    panel: HourlyPanel<F>,
    origin: usize,
    cutoff: usize,
}

impl<F: Scalar> ForecastContext<F> {
    /// Context for forecasting hours `cutoff..cutoff + 24` of `panel` from
    /// the `lookback` hours before `cutoff`. Target-day prices are zeroed.
    pub fn from_panel(panel: &HourlyPanel<F>, cutoff: usize, lookback: usize) -> Result<Self> {
        if cutoff < lookback {
            return Err(Error::History {
                needed: lookback,
                available: cutoff,
            });
        }
        if cutoff + HORIZON > panel.len() {
            return Err(Error::MissingExog(format!(
                "panel ends at hour {} before the target day {}..{}",
                panel.len(),
                cutoff,
                cutoff + HORIZON
            )));
        }
        let sub = panel.slice(cutoff - lookback, cutoff + HORIZON)?;
        let mut price = sub.price().to_vec();
        for v in &mut price[lookback..] {
            *v = F::zero();
        }
        let masked = HourlyPanel::new(sub.calendar().clone(), price, sub.predictors().to_vec(), sub.market_label())?;
        Ok(Self {
            panel: masked,
            origin: cutoff - lookback,
            cutoff: lookback,
        })
    }

    /// Context from a history that ends at the cutoff plus the target-day
    /// values of every predictor in `history`.
    pub fn from_history(history: &HourlyPanel<F>, target_day: &[(String, Vec<F>)]) -> Result<Self> {
        let n = history.len();
        let mut preds = Vec::with_capacity(history.predictors().len());
        for col in history.predictors() {
            let Some((_, vals)) = target_day.iter().find(|(name, _)| name == &col.name) else {
                return Err(Error::MissingExog(format!("no target-day values for `{}`", col.name)));
            };
            if vals.len() != HORIZON || vals.iter().any(|v| !v.is_finite()) {
                return Err(Error::MissingExog(format!(
                    "`{}` needs {HORIZON} finite target-day values",
                    col.name
                )));
            }
            let mut values = col.values.clone();
            values.extend_from_slice(vals);
            preds.push(PredictorColumn {
                name: col.name.clone(),
                frequency: col.frequency,
                values,
            });
        }
        let cal = history.calendar().shifted(0, n + HORIZON);
        let mut price = history.price().to_vec();
        price.extend(std::iter::repeat_n(F::zero(), HORIZON));
        let panel = HourlyPanel::new(cal, price, preds, history.market_label())?;
        Ok(Self { panel, origin: 0, cutoff: n })
    }

    pub fn panel(&self) -> &HourlyPanel<F> {
        &self.panel
    }

    /// Panel index of the first target hour.
    pub fn cutoff_hour(&self) -> usize {
        self.origin + self.cutoff
    }

    /// Local row of the first target hour.
    pub fn local_cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn target_hours(&self) -> Range<usize> {
        self.cutoff_hour()..self.cutoff_hour() + HORIZON
    }
}

/// Forecasts for hours 1..24 of the day after the context's cutoff.
pub fn forecast_24h<F: Scalar>(model: &FittedModel<F>, ctx: &ForecastContext<F>) -> Result<Vec<F>> {
    let c = ctx.local_cutoff();
    let price = ctx.panel().price();
    match &model.state {
        ModelState::Naive => {
            if c < NAIVE_LAG {
                return Err(Error::History {
                    needed: NAIVE_LAG,
                    available: c,
                });
            }
            Ok((0..HORIZON).map(|h| price[c + h - NAIVE_LAG]).collect())
        }
        ModelState::Ensemble { fit, members } => {
            let mut cols = Array2::<F>::zeros((HORIZON, members.len()));
            for (j, mem) in members.iter().enumerate() {
                let f = forecast_24h(mem, ctx)?;
                for h in 0..HORIZON {
                    cols[[h, j]] = f[h];
                }
            }
            Ok(fit.combine(cols.view()).to_vec())
        }
        state => {
            let rows = features::build_rows(ctx.panel(), &model.design, c..c + HORIZON)?;
            let rows = match &model.standardization {
                Some(s) => features::apply_standardization(&rows, s)?,
                None => rows,
            };
            if let ModelState::Arma(a) = state {
                let tail: &[F] = if ctx.cutoff_hour() == model.training_window.end {
                    &a.residual_tail
                } else {
                    &[]
                };
                return Ok(arma::forecast_recursive(a, rows.x.view(), tail));
            }
            Ok(state.predict_rows(rows.x.view())?.to_vec())
        }
    }
}

impl<F: Scalar> FittedModel<F> {
    /// Versioned plain-text dump of the model for audit trails.
    pub fn to_report(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "pricecast-model v1");
        let _ = writeln!(s, "id\t{}", self.spec.id);
        let _ = writeln!(s, "kind\t{}", self.spec.display_name());
        let _ = writeln!(s, "training_window\t{}\t{}", self.training_window.start, self.training_window.end);
        let _ = writeln!(
            s,
            "hyper\t{}",
            serde_json::to_string(&self.spec.hyper).unwrap_or_default()
        );
        for n in &self.notes {
            let _ = writeln!(s, "note\t{n}");
        }
        let _ = writeln!(s, "[coefficients]");
        let mut row = |name: &str, v: F| {
            let _ = writeln!(s, "{name}\t{v:e}");
        };
        match &self.state {
            ModelState::Naive => {}
            ModelState::Linear(f) => {
                row("intercept", f.intercept);
                for (c, w) in self.columns.iter().zip(f.weights.iter()) {
                    row(c, *w);
                }
            }
            ModelState::Arma(a) => {
                row("intercept", a.intercept);
                for (c, w) in self.columns.iter().zip(a.weights.iter()) {
                    row(c, *w);
                }
                for (j, t) in a.theta.iter().enumerate() {
                    row(&format!("theta{}", j + 1), *t);
                }
                row("sigma2", a.sigma2());
                row("aicc", a.aicc);
            }
            ModelState::Svr(f) => {
                row("bias", f.bias);
                row("sigma", f.sigma);
                for (i, a) in f.coef.iter().enumerate() {
                    row(&format!("alpha{i}"), *a);
                }
            }
            ModelState::Forest(f) => {
                row("trees", F::of_usize(f.trees.len()));
                row("m_try", F::of_usize(f.m_try));
                row("nodes", F::of_usize(f.trees.iter().map(|t| t.nodes.len()).sum()));
            }
            ModelState::Pcr(f) => {
                row("intercept", f.y_mean - f.x_mean.dot(&f.weights));
                for (c, w) in self.columns.iter().zip(f.weights.iter()) {
                    row(c, *w);
                }
            }
            ModelState::Blm(f) => {
                row("intercept", f.intercept);
                for (c, w) in self.columns.iter().zip(f.weights.iter()) {
                    row(c, *w);
                }
            }
            ModelState::Ensemble { fit, members } => {
                row("intercept", fit.intercept);
                for (m, w) in members.iter().zip(fit.weights.iter()) {
                    row(&m.spec.id, *w);
                }
            }
        }
        s
    }
}

//! Leave-one-group-out predictor sensitivity fused across models.
//!
//! For each group `α` every affected model is backtested again without the
//! group's columns. `S_mα = RMSE_m^α / RMSE_m^0` and the fused score is
//! `S_α = Σ_m ω_m S_mα` with `ω_m ∝ max(R²_m, 0)` taken from the baseline's
//! out-of-sample forecasts.

use std::collections::BTreeSet;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::HourlyPanel;
use crate::error::{Error, Result};
use crate::eval::{compute_metrics, r_squared, run_backtest, BacktestPlan, BacktestResult};
use crate::features::SEASONAL_LAGS;
use crate::models::{ForecasterSpec, Hyper, ModelKind};
use crate::scalar::Scalar;

pub const WEEKEND_TOKEN: &str = "weekend_dummies";
pub const HOUR_TOKEN: &str = "hour_dummies";

/// Named set of removable columns. Tokens are predictor names, `lag24`,
/// `lag48`, `lag168`, `weekend_dummies` or `hour_dummies`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictorGroup {
    pub name: String,
    pub tokens: Vec<String>,
}

impl PredictorGroup {
    pub fn new(name: impl Into<String>, tokens: &[&str]) -> Self {
        Self {
            name: name.into(),
            tokens: tokens.iter().map(|t| t.to_string()).collect(),
        }
    }

    pub fn single(token: &str) -> Self {
        Self::new(token, &[token])
    }
}

/// One group per external predictor used by the plan, then one per seasonal
/// lag, then the two dummy blocks.
pub fn default_groups(plan: &BacktestPlan) -> Vec<PredictorGroup> {
    let mut seen = Vec::new();
    for m in &plan.models {
        for p in &m.features.predictors {
            if !seen.contains(p) {
                seen.push(p.clone());
            }
        }
    }
    let mut groups: Vec<PredictorGroup> = seen.iter().map(|p| PredictorGroup::single(p)).collect();
    groups.extend(SEASONAL_LAGS.iter().map(|l| PredictorGroup::single(&format!("lag{l}"))));
    groups.push(PredictorGroup::single(WEEKEND_TOKEN));
    groups.push(PredictorGroup::single(HOUR_TOKEN));
    groups
}

/// Rejects empty or overlapping group lists and tokens the panel lacks.
pub fn validate_groups<F: Scalar>(panel: &HourlyPanel<F>, groups: &[PredictorGroup]) -> Result<()> {
    if groups.is_empty() {
        return Err(Error::Config("no predictor groups given".into()));
    }
    let mut names = BTreeSet::new();
    let mut used = BTreeSet::new();
    for g in groups {
        if g.tokens.is_empty() {
            return Err(Error::Config(format!("group `{}` is empty", g.name)));
        }
        if !names.insert(g.name.as_str()) {
            return Err(Error::Config(format!("group `{}` appears twice", g.name)));
        }
        for t in &g.tokens {
            let known = t == WEEKEND_TOKEN
                || t == HOUR_TOKEN
                || SEASONAL_LAGS.iter().any(|l| *t == format!("lag{l}"))
                || panel.predictor(t).is_some();
            if !known {
                return Err(Error::Schema(format!("group `{}`: unknown column `{t}`", g.name)));
            }
            if !used.insert(t.as_str()) {
                return Err(Error::Config(format!("column `{t}` is in more than one group")));
            }
        }
    }
    Ok(())
}

/// `spec` with the group's columns taken out, or `None` if it uses none of
/// them. Seasonal-ARMAX left without predictors becomes Seasonal-ARMA.
pub fn without_group(spec: &ForecasterSpec, group: &PredictorGroup) -> Option<ForecasterSpec> {
    if matches!(spec.kind, ModelKind::Naive | ModelKind::Ensemble) {
        return None;
    }
    let mut out = spec.clone();
    let f = &mut out.features;
    for t in &group.tokens {
        match t.as_str() {
            WEEKEND_TOKEN => f.weekend_dummies = false,
            HOUR_TOKEN => f.hour_dummies = false,
            _ => {
                if let Some(l) = t.strip_prefix("lag").and_then(|s| s.parse::<usize>().ok()) {
                    f.lags.retain(|x| *x != l);
                }
                f.predictors.retain(|p| p != t);
            }
        }
    }
    if out.features == spec.features {
        return None;
    }
    if out.kind == ModelKind::SeasonalArmax && out.features.predictors.is_empty() {
        out.kind = ModelKind::SeasonalArma;
    }
    Some(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub groups: Vec<String>,
    /// Model ids taking part in the fusion (all but Naive).
    pub models: Vec<String>,
    pub baseline_rmse: Vec<f64>,
    /// `[group][model]` RMSE after removing the group.
    pub rmse: Vec<Vec<f64>>,
    /// `[group][model]` ratio `S_mα`.
    pub ratios: Vec<Vec<f64>>,
    pub r_squared: Vec<f64>,
    pub weights: Vec<f64>,
    pub fused: Vec<f64>,
    /// Fused scores in percent of the largest.
    pub scaled: Vec<f64>,
    /// Group indices ordered by fused score, largest first.
    pub ranking: Vec<usize>,
    /// `[group]` ids of the models that were backtested again.
    pub rerun: Vec<Vec<String>>,
    /// Whether reruns tuned their hyperparameters afresh.
    pub retuned: bool,
}

impl SensitivityReport {
    pub fn top(&self) -> &str {
        &self.groups[self.ranking[0]]
    }

    pub fn group_score(&self, name: &str) -> Option<f64> {
        self.groups.iter().position(|g| g == name).map(|i| self.fused[i])
    }
}

/// Normalized weights from R² values, negatives clipped to zero.
pub fn fusion_weights(r2: &[f64]) -> Result<Vec<f64>> {
    let clipped: Vec<f64> = r2.iter().map(|v| if v.is_finite() { v.max(0.0) } else { 0.0 }).collect();
    let total: f64 = clipped.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Weight("no model has a positive out-of-sample R²".into()));
    }
    Ok(clipped.iter().map(|v| v / total).collect())
}

/// `S_α = Σ_m ω_m S_mα` for every group.
pub fn fuse(ratios: &[Vec<f64>], weights: &[f64]) -> Vec<f64> {
    ratios
        .iter()
        .map(|row| row.iter().zip(weights).map(|(s, w)| s * w).sum())
        .collect()
}

/// Descending order; equal scores keep group order.
pub fn rank(fused: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..fused.len()).collect();
    idx.sort_by(|&a, &b| fused[b].total_cmp(&fused[a]));
    idx
}

pub fn scale_to_percent(fused: &[f64]) -> Vec<f64> {
    let max = fused.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    fused.iter().map(|v| if *v == max { 100.0 } else { 100.0 * v / max }).collect()
}

pub fn run_sensitivity<F: Scalar>(
    panel: &HourlyPanel<F>,
    plan: &BacktestPlan,
    groups: &[PredictorGroup],
) -> Result<SensitivityReport> {
    validate_groups(panel, groups)?;
    let baseline = run_backtest(panel, plan)?;
    sensitivity_from_baseline(panel, plan, groups, &baseline)
}

/// Like [`run_sensitivity`] with an existing baseline backtest of `plan`.
pub fn sensitivity_from_baseline<F: Scalar>(
    panel: &HourlyPanel<F>,
    plan: &BacktestPlan,
    groups: &[PredictorGroup],
    baseline: &BacktestResult<F>,
) -> Result<SensitivityReport> {
    validate_groups(panel, groups)?;
    let fused_models: Vec<&ForecasterSpec> = plan.models.iter().filter(|m| m.kind != ModelKind::Naive).collect();
    if fused_models.is_empty() {
        return Err(Error::Config("sensitivity needs at least one model besides Naive".into()));
    }
    let rmse_of = |res: &BacktestResult<F>, id: &str| -> Result<f64> { Ok(compute_metrics(&res.run(id)?.forecasts, &res.realized, &res.calendar, &res.hours)?.rmse) };
    let baseline_rmse = fused_models.iter().map(|m| rmse_of(baseline, &m.id)).collect::<Result<Vec<_>>>()?;
    let r2 = fused_models
        .iter()
        .map(|m| Ok(r_squared(&baseline.run(&m.id)?.forecasts, &baseline.realized)))
        .collect::<Result<Vec<_>>>()?;
    let weights = fusion_weights(&r2)?;

    let mut rmse = Vec::with_capacity(groups.len());
    let mut rerun = Vec::with_capacity(groups.len());
    for g in groups {
        let changed: Vec<Option<ForecasterSpec>> = plan.models.iter().map(|m| without_group(m, g)).collect();
        let mut include: Vec<bool> = changed.iter().map(Option::is_some).collect();
        // ensembles follow their members
        for (i, m) in plan.models.iter().enumerate() {
            if let Hyper::Ensemble(e) = &m.hyper {
                let hit = e.members.iter().any(|id| plan.models.iter().position(|x| &x.id == id).is_some_and(|j| include[j]));
                if hit {
                    include[i] = true;
                    for id in &e.members {
                        if let Some(j) = plan.models.iter().position(|x| &x.id == id) {
                            include[j] = true;
                        }
                    }
                }
            }
        }
        let models: Vec<ForecasterSpec> = plan
            .models
            .iter()
            .zip(&changed)
            .zip(&include)
            .filter(|(_, inc)| **inc)
            .map(|((m, c), _)| c.clone().unwrap_or_else(|| m.clone()))
            .collect();
        let affected: Vec<String> = plan
            .models
            .iter()
            .zip(&changed)
            .zip(&include)
            .filter(|((m, c), inc)| **inc && (c.is_some() || m.kind == ModelKind::Ensemble))
            .map(|((m, _), _)| m.id.clone())
            .collect();
        let result = if models.is_empty() {
            None
        } else {
            let sub = BacktestPlan {
                models,
                grids: plan.grids.clone(),
                ..plan.clone()
            };
            Some(run_backtest(panel, &sub)?)
        };
        let row = fused_models
            .iter()
            .zip(&baseline_rmse)
            .map(|(m, base)| match &result {
                Some(res) if affected.contains(&m.id) => rmse_of(res, &m.id),
                _ => Ok(*base),
            })
            .collect::<Result<Vec<_>>>()?;
        rmse.push(row);
        rerun.push(affected);
    }
    let ratios: Vec<Vec<f64>> = rmse
        .iter()
        .map(|row| row.iter().zip(&baseline_rmse).map(|(a, b)| a / b).collect())
        .collect();
    let fused = fuse(&ratios, &weights);
    Ok(SensitivityReport {
        groups: groups.iter().map(|g| g.name.clone()).collect(),
        models: fused_models.iter().map(|m| m.id.clone()).collect(),
        baseline_rmse,
        rmse,
        ratios,
        r_squared: r2,
        weights,
        ranking: rank(&fused),
        scaled: scale_to_percent(&fused),
        fused,
        rerun,
        retuned: plan.tune,
    })
}

/// Rows in ranking order: rank, group, one `S_<id>` column per model, fused
/// score and scaled percent.
pub fn write_sensitivity_csv<W: Write>(report: &SensitivityReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["rank".to_string(), "group".to_string()];
    header.extend(report.models.iter().map(|m| format!("S_{m}")));
    header.push("fused".into());
    header.push("scaled_pct".into());
    w.write_record(&header)?;
    for (r, &g) in report.ranking.iter().enumerate() {
        let mut row = vec![(r + 1).to_string(), report.groups[g].clone()];
        row.extend(report.ratios[g].iter().map(|s| format!("{s:.6}")));
        row.push(format!("{:.6}", report.fused[g]));
        row.push(format!("{:.2}", report.scaled[g]));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureSpec;

    #[test]
    fn equal_rmse_gives_unit_score() {
        let w = fusion_weights(&[0.5, 0.3, -0.2]).unwrap();
        assert_eq!(w[2], 0.0);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        let s = fuse(&[vec![1.0, 1.0, 1.0]], &w);
        assert!((s[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn single_model_is_passed_through() {
        let w = fusion_weights(&[0.7]).unwrap();
        assert_eq!(fuse(&[vec![1.37], vec![0.99]], &w), vec![1.37, 0.99]);
    }

    #[test]
    fn no_positive_r2() {
        assert!(matches!(fusion_weights(&[-0.1, 0.0]), Err(Error::Weight(_))));
    }

    #[test]
    fn ranking_and_scaling() {
        let f = [1.1, 1.4, 1.1, 0.9];
        assert_eq!(rank(&f), vec![1, 0, 2, 3]);
        let s = scale_to_percent(&f);
        assert_eq!(s[1], 100.0);
        assert!((s[3] - 100.0 * 0.9 / 1.4).abs() < 1e-12);
    }

    #[test]
    fn armax_without_predictors_becomes_arma() {
        let features = FeatureSpec {
            predictors: vec!["load".into()],
            ..FeatureSpec::default()
        };
        let spec = ForecasterSpec::default_for("sarmax", ModelKind::SeasonalArmax, features).unwrap();
        let out = without_group(&spec, &PredictorGroup::single("load")).unwrap();
        assert_eq!(out.kind, ModelKind::SeasonalArma);
        out.validate().unwrap();
        assert!(without_group(&spec, &PredictorGroup::single("wind")).is_none());
        let h = without_group(&spec, &PredictorGroup::single(HOUR_TOKEN)).unwrap();
        assert!(!h.features.hour_dummies && h.kind == ModelKind::SeasonalArmax);
    }
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Naive,
    Dlr,
    SeasonalArma,
    SeasonalArmax,
    Ridge,
    Lasso,
    Svr,
    Pcr,
    RandomForest,
    Blm,
    Ensemble,
}

impl ModelKind {
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Naive => "Naive",
            ModelKind::Dlr => "DLR",
            ModelKind::SeasonalArma => "Seasonal-ARMA",
            ModelKind::SeasonalArmax => "Seasonal-ARMAX",
            ModelKind::Ridge => "Ridge",
            ModelKind::Lasso => "LASSO",
            ModelKind::Svr => "SVR",
            ModelKind::Pcr => "PCR",
            ModelKind::RandomForest => "RF",
            ModelKind::Blm => "BLM",
            ModelKind::Ensemble => "Ensemble",
        }
    }

    /// Kinds whose features are standardized on the training rows.
    pub fn standardizes(self) -> bool {
        matches!(
            self,
            ModelKind::Svr | ModelKind::Ridge | ModelKind::Lasso | ModelKind::Pcr | ModelKind::Blm
        )
    }

    pub fn is_arma(self) -> bool {
        matches!(self, ModelKind::SeasonalArma | ModelKind::SeasonalArmax)
    }
}

/// Seasonal-ARMA(X) order. The seasonal lags are the feature spec's lags
/// (24, 48 and 168 hours by default).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArmaOrder {
    #[serde(default = "one")]
    pub p: usize,
    #[serde(default = "one")]
    pub q: usize,
    #[serde(default)]
    pub select_by_aicc: bool,
    /// Candidate `(p, q)` orders when `select_by_aicc` is set.
    #[serde(default = "default_arma_grid")]
    pub grid: Vec<(usize, usize)>,
    #[serde(default = "default_arma_iter")]
    pub max_iterations: usize,
}

fn one() -> usize {
    1
}
fn default_arma_iter() -> usize {
    500
}

pub fn default_arma_grid() -> Vec<(usize, usize)> {
    let mut g = Vec::new();
    for p in 1..=3 {
        for q in 0..=2 {
            g.push((p, q));
        }
    }
    g
}

impl Default for ArmaOrder {
    fn default() -> Self {
        Self {
            p: 1,
            q: 1,
            select_by_aicc: false,
            grid: default_arma_grid(),
            max_iterations: default_arma_iter(),
        }
    }
}

impl ArmaOrder {
    pub fn fixed(p: usize, q: usize) -> Self {
        Self {
            p,
            q,
            ..Self::default()
        }
    }

    pub fn aicc() -> Self {
        Self {
            select_by_aicc: true,
            ..Self::default()
        }
    }

    pub fn candidates(&self) -> Vec<(usize, usize)> {
        if self.select_by_aicc {
            self.grid.clone()
        } else {
            vec![(self.p, self.q)]
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyKind {
    Lasso,
    Ridge,
}

impl PenaltyKind {
    pub fn exponent(self) -> u32 {
        match self {
            PenaltyKind::Lasso => 1,
            PenaltyKind::Ridge => 2,
        }
    }
}

/// Penalized least squares.
///
/// Ridge minimizes `Σ r² + λ Σ ω²`. LASSO minimizes `(1/2n) Σ r² + λ Σ |ω|`,
/// so its all-zero threshold is `max_j |x_jᵀ y_c| / n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    pub kind: PenaltyKind,
    #[serde(default)]
    pub lambda: f64,
    #[serde(default = "yes")]
    pub fit_intercept: bool,
    #[serde(default = "default_cd_tol")]
    pub tolerance: f64,
    #[serde(default = "default_cd_sweeps")]
    pub max_sweeps: usize,
}

fn yes() -> bool {
    true
}
fn default_cd_tol() -> f64 {
    1e-7
}
fn default_cd_sweeps() -> usize {
    10_000
}

impl PenaltyConfig {
    pub fn lasso(lambda: f64) -> Self {
        Self {
            kind: PenaltyKind::Lasso,
            lambda,
            fit_intercept: true,
            tolerance: default_cd_tol(),
            max_sweeps: default_cd_sweeps(),
        }
    }

    pub fn ridge(lambda: f64) -> Self {
        Self {
            kind: PenaltyKind::Ridge,
            ..Self::lasso(lambda)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvrConfig {
    #[serde(default = "default_c")]
    pub c: f64,
    /// Tube half-width on the standardized target scale.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Gaussian kernel width; ignored when `sigma_rule` is set.
    #[serde(default = "one_f")]
    pub sigma: f64,
    /// Use the median pairwise-distance heuristic for `sigma`.
    #[serde(default = "yes")]
    pub sigma_rule: bool,
    #[serde(default = "default_svr_tol")]
    pub tolerance: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_c() -> f64 {
    8.0
}
fn default_epsilon() -> f64 {
    0.1
}
fn one_f() -> f64 {
    1.0
}
fn default_svr_tol() -> f64 {
    1e-4
}

impl Default for SvrConfig {
    fn default() -> Self {
        Self {
            c: default_c(),
            epsilon: default_epsilon(),
            sigma: 1.0,
            sigma_rule: true,
            tolerance: default_svr_tol(),
            seed: 0,
        }
    }
}

/// Regularization constants searched by cross-validation.
pub const SVR_C_GRID: [f64; 5] = [0.5, 2.0, 8.0, 32.0, 64.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RfConfig {
    #[serde(default = "default_trees")]
    pub n_trees: usize,
    #[serde(default = "default_node")]
    pub min_node_size: usize,
    /// Columns sampled per split; `None` means `⌊√p⌋`.
    #[serde(default)]
    pub m_try: Option<usize>,
    #[serde(default = "yes")]
    pub bootstrap: bool,
    #[serde(default)]
    pub seed: u64,
}

fn default_trees() -> usize {
    500
}
fn default_node() -> usize {
    5
}

impl Default for RfConfig {
    fn default() -> Self {
        Self {
            n_trees: default_trees(),
            min_node_size: default_node(),
            m_try: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

/// `{⌊√p⌋ − 1, ⌊√p⌋, ⌊√p⌋ + 1}` clipped to `1..=p`.
pub fn m_try_grid(p: usize) -> Vec<usize> {
    let r = (p as f64).sqrt().floor() as usize;
    let mut g: Vec<usize> = [r.saturating_sub(1), r, r + 1]
        .into_iter()
        .map(|m| m.clamp(1, p.max(1)))
        .collect();
    g.dedup();
    g
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PcrConfig {
    pub k: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlmConfig {
    #[serde(default = "default_mstop")]
    pub m_stop: usize,
    #[serde(default = "default_nu")]
    pub nu: f64,
}

fn default_mstop() -> usize {
    1000
}
fn default_nu() -> f64 {
    0.5
}

pub const BLM_MSTOP_GRID: [usize; 5] = [500, 1000, 1500, 2000, 2500];

impl Default for BlmConfig {
    fn default() -> Self {
        Self {
            m_stop: default_mstop(),
            nu: default_nu(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct EnsembleConfig {
    /// Ids of the member forecasters within the same plan.
    #[serde(default)]
    pub members: Vec<String>,
}

/// Kind-specific hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Hyper {
    None,
    Arma(ArmaOrder),
    Penalty(PenaltyConfig),
    Svr(SvrConfig),
    Forest(RfConfig),
    Pcr(PcrConfig),
    Blm(BlmConfig),
    Ensemble(EnsembleConfig),
}

/// Declarative forecaster configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForecasterSpec {
    /// Unique id within a plan (used in reports and for ensemble membership).
    pub id: String,
    pub kind: ModelKind,
    pub hyper: Hyper,
    pub features: FeatureSpec,
}

impl ForecasterSpec {
    pub fn new(id: impl Into<String>, kind: ModelKind, hyper: Hyper, features: FeatureSpec) -> Result<Self> {
        let spec = Self {
            id: id.into(),
            kind,
            hyper,
            features,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Default hyperparameters for `kind`.
    pub fn default_for(id: impl Into<String>, kind: ModelKind, features: FeatureSpec) -> Result<Self> {
        let hyper = match kind {
            ModelKind::Naive | ModelKind::Dlr => Hyper::None,
            ModelKind::SeasonalArma | ModelKind::SeasonalArmax => Hyper::Arma(ArmaOrder::default()),
            ModelKind::Ridge => Hyper::Penalty(PenaltyConfig::ridge(1.0)),
            ModelKind::Lasso => Hyper::Penalty(PenaltyConfig::lasso(0.1)),
            ModelKind::Svr => Hyper::Svr(SvrConfig::default()),
            ModelKind::Pcr => Hyper::Pcr(PcrConfig { k: 1 }),
            ModelKind::RandomForest => Hyper::Forest(RfConfig::default()),
            ModelKind::Blm => Hyper::Blm(BlmConfig::default()),
            ModelKind::Ensemble => Hyper::Ensemble(EnsembleConfig::default()),
        };
        Self::new(id, kind, hyper, features)
    }

    pub fn validate(&self) -> Result<()> {
        self.features.validate()?;
        let ok = matches!(
            (self.kind, &self.hyper),
            (ModelKind::Naive | ModelKind::Dlr, Hyper::None)
                | (ModelKind::SeasonalArma | ModelKind::SeasonalArmax, Hyper::Arma(_))
                | (ModelKind::Svr, Hyper::Svr(_))
                | (ModelKind::Pcr, Hyper::Pcr(_))
                | (ModelKind::RandomForest, Hyper::Forest(_))
                | (ModelKind::Blm, Hyper::Blm(_))
                | (ModelKind::Ensemble, Hyper::Ensemble(_))
        ) || matches!((self.kind, &self.hyper), (ModelKind::Ridge, Hyper::Penalty(p)) if p.kind == PenaltyKind::Ridge)
            || matches!((self.kind, &self.hyper), (ModelKind::Lasso, Hyper::Penalty(p)) if p.kind == PenaltyKind::Lasso);
        if !ok {
            return Err(Error::Config(format!(
                "hyperparameters {:?} do not match model kind {:?}",
                self.hyper, self.kind
            )));
        }
        match (self.kind, &self.hyper) {
            (ModelKind::Naive, _) if !self.features.lags.contains(&168) => {
                return Err(Error::Config("the naive benchmark needs the 168-hour lag".into()))
            }
            (ModelKind::SeasonalArma, _) if !self.features.predictors.is_empty() => {
                return Err(Error::Config("Seasonal-ARMA takes no external predictors; use Seasonal-ARMAX".into()))
            }
            (ModelKind::SeasonalArmax, _) if self.features.predictors.is_empty() => {
                return Err(Error::Config("Seasonal-ARMAX needs at least one external predictor".into()))
            }
            (_, Hyper::Arma(o)) => {
                if o.candidates().iter().any(|&(p, q)| p + q == 0) {
                    return Err(Error::Config("ARMA order needs p + q >= 1".into()));
                }
                if self.features.n_recent_lags != 0 {
                    return Err(Error::Config("ARMA recent lags are set by the order, not the feature spec".into()));
                }
            }
            (_, Hyper::Penalty(p)) if !(p.lambda >= 0.0) => {
                return Err(Error::Config("lambda must be non-negative".into()))
            }
            (_, Hyper::Svr(s)) if !(s.c > 0.0) || !(s.epsilon >= 0.0) || (!s.sigma_rule && !(s.sigma > 0.0)) => {
                return Err(Error::Config("SVR needs C > 0, epsilon >= 0 and sigma > 0".into()))
            }
            (_, Hyper::Forest(r)) if r.n_trees == 0 || r.min_node_size == 0 || r.m_try == Some(0) => {
                return Err(Error::Config("random forest needs n_trees, min_node_size and m_try >= 1".into()))
            }
            (_, Hyper::Pcr(c)) if c.k == 0 => return Err(Error::Config("PCR needs k >= 1".into())),
            (_, Hyper::Blm(b)) if !(b.nu > 0.0 && b.nu <= 1.0) => {
                return Err(Error::Config("BLM shrinkage nu must lie in (0, 1]".into()))
            }
            _ => {}
        }
        if self.kind != ModelKind::Naive && self.kind != ModelKind::Ensemble && !self.kind.is_arma() && self.features.n_recent_lags > 0 {
            return Err(Error::Config(format!(
                "{} cannot use recent-hour lags in a 24-hour-ahead design",
                self.kind.label()
            )));
        }
        Ok(())
    }

    pub fn uses_externals(&self) -> bool {
        !self.features.predictors.is_empty()
    }

    /// Human-readable label such as `Seasonal-ARMAX(p,q)`.
    pub fn display_name(&self) -> String {
        match &self.hyper {
            Hyper::Arma(o) if o.select_by_aicc => format!("{}(p,q)", self.kind.label()),
            Hyper::Arma(o) => format!("{}({},{})", self.kind.label(), o.p, o.q),
            _ => self.kind.label().to_string(),
        }
    }
}

impl ModelKind {
    /// Short id stem used by [`paired_roster`].
    pub fn slug(self) -> &'static str {
        match self {
            ModelKind::Naive => "naive",
            ModelKind::Dlr => "dlr",
            ModelKind::SeasonalArma | ModelKind::SeasonalArmax => "arma",
            ModelKind::Ridge => "ridge",
            ModelKind::Lasso => "lasso",
            ModelKind::Svr => "svr",
            ModelKind::Pcr => "pcr",
            ModelKind::RandomForest => "rf",
            ModelKind::Blm => "blm",
            ModelKind::Ensemble => "ensemble",
        }
    }

    /// Inverse of [`ModelKind::slug`]; `arma` gives the plain Seasonal-ARMA.
    pub fn from_slug(s: &str) -> Result<Self> {
        Ok(match s {
            "naive" => ModelKind::Naive,
            "dlr" => ModelKind::Dlr,
            "arma" => ModelKind::SeasonalArma,
            "ridge" => ModelKind::Ridge,
            "lasso" => ModelKind::Lasso,
            "svr" => ModelKind::Svr,
            "pcr" => ModelKind::Pcr,
            "rf" => ModelKind::RandomForest,
            "blm" => ModelKind::Blm,
            "ensemble" => ModelKind::Ensemble,
            other => return Err(Error::Config(format!("unknown model `{other}`"))),
        })
    }
}

/// Naive plus a twin of every kind in `kinds`: `<slug>` without external
/// predictors and `<slug>_x` with `predictors`. An ensemble kind stacks the
/// other twins of its own side. Either ARMA kind yields the
/// Seasonal-ARMA / Seasonal-ARMAX pair.
pub fn paired_roster(kinds: &[ModelKind], predictors: &[String], base: &FeatureSpec) -> Result<Vec<ForecasterSpec>> {
    if predictors.is_empty() {
        return Err(Error::Config("a paired roster needs external predictors".into()));
    }
    let mut out = vec![ForecasterSpec::default_for("naive", ModelKind::Naive, base.clone())?];
    let mut sides: [Vec<String>; 2] = [Vec::new(), Vec::new()];
    let mut ensemble = false;
    for &k in kinds {
        match k {
            ModelKind::Naive => continue,
            ModelKind::Ensemble => {
                ensemble = true;
                continue;
            }
            _ => {}
        }
        for (side, ext) in [false, true].into_iter().enumerate() {
            let id = if ext { format!("{}_x", k.slug()) } else { k.slug().to_string() };
            if sides[side].contains(&id) {
                continue;
            }
            let kind = match k {
                ModelKind::SeasonalArma | ModelKind::SeasonalArmax if ext => ModelKind::SeasonalArmax,
                ModelKind::SeasonalArma | ModelKind::SeasonalArmax => ModelKind::SeasonalArma,
                other => other,
            };
            let features = FeatureSpec {
                predictors: if ext { predictors.to_vec() } else { Vec::new() },
                ..base.clone()
            };
            out.push(ForecasterSpec::default_for(id.clone(), kind, features)?);
            sides[side].push(id);
        }
    }
    if ensemble {
        for (side, ext) in [false, true].into_iter().enumerate() {
            let id = if ext { "ensemble_x" } else { "ensemble" };
            let features = FeatureSpec {
                predictors: if ext { predictors.to_vec() } else { Vec::new() },
                ..base.clone()
            };
            let hyper = Hyper::Ensemble(EnsembleConfig {
                members: sides[side].clone(),
            });
            out.push(ForecasterSpec::new(id, ModelKind::Ensemble, hyper, features)?);
        }
    }
    Ok(out)
}

/// Id of the other side of a [`paired_roster`] pair.
pub fn twin_id(id: &str) -> String {
    match id.strip_suffix("_x") {
        Some(stem) => stem.to_string(),
        None => format!("{id}_x"),
    }
}

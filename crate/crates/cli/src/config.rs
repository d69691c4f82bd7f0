//! Run configuration: one TOML file, overridable from the command line.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use pricecast_core::data::CsvSchema;
use pricecast_core::features::FeatureSpec;
use pricecast_core::models::Hyper;
use pricecast_core::sensitivity::PredictorGroup;
use pricecast_core::synth::SynthConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Environment variable that replaces the configured output directory.
pub const OUT_ENV: &str = "PRICECAST_OUT";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub jobs: usize,
    pub data: DataConfig,
    #[serde(default)]
    pub roster: RosterConfig,
    #[serde(default)]
    pub windows: WindowConfig,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    #[serde(default)]
    pub sensitivity: SensitivityConfig,
}

fn default_out() -> PathBuf {
    PathBuf::from("pricecast-out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Panel file; relative paths resolve against the config file.
    #[serde(default)]
    pub csv: Option<PathBuf>,
    /// Full column mapping. Without it every column other than the
    /// timestamp and price is an hourly predictor unless listed in `daily`.
    #[serde(default)]
    pub schema: Option<CsvSchema>,
    #[serde(default)]
    pub daily: Vec<String>,
    #[serde(default)]
    pub ffill_limit: usize,
    /// Synthetic market; its `seed` defaults to the run seed.
    #[serde(default)]
    pub synth: Option<toml::Table>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RosterConfig {
    /// Model slugs. Every entry but `naive` yields a twin without and with
    /// external predictors.
    #[serde(default = "default_models")]
    pub models: Vec<String>,
    /// External predictors of the `_x` twins; all panel predictors if unset.
    #[serde(default)]
    pub externals: Option<Vec<String>>,
    /// Lags and dummies shared by all models.
    #[serde(default)]
    pub features: Option<FeatureSpec>,
    /// Hyperparameters by model slug (both twins) or model id.
    #[serde(default)]
    pub hyper: BTreeMap<String, Hyper>,
    /// Explicit search grids, keyed like `hyper`.
    #[serde(default)]
    pub grids: BTreeMap<String, Vec<Hyper>>,
}

fn default_models() -> Vec<String> {
    ["naive", "dlr", "arma", "ridge", "lasso", "svr", "pcr", "rf", "blm", "ensemble"]
        .map(String::from)
        .to_vec()
}

impl Default for RosterConfig {
    fn default() -> Self {
        Self {
            models: default_models(),
            externals: None,
            features: None,
            hyper: BTreeMap::new(),
            grids: BTreeMap::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowConfig {
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

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            training_window_hours: default_window(),
            subset_size_hours: default_subset(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationConfig {
    /// Number of forecast days.
    #[serde(default = "default_days")]
    pub days: usize,
    /// First forecast day (ISO timestamp); the last `days` days of the
    /// panel when unset.
    #[serde(default)]
    pub start: Option<String>,
    #[serde(default = "default_retune")]
    pub retune_every_days: usize,
    #[serde(default = "yes")]
    pub tune: bool,
}

fn default_days() -> usize {
    28
}
fn default_retune() -> usize {
    7
}
fn yes() -> bool {
    true
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            days: default_days(),
            start: None,
            retune_every_days: default_retune(),
            tune: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SensitivityConfig {
    /// Groups to leave out; one per predictor, lag and dummy block if unset.
    #[serde(default)]
    pub groups: Option<Vec<PredictorGroup>>,
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub days: Option<usize>,
    pub retune_every_days: Option<usize>,
    pub no_tune: bool,
}

impl RunConfig {
    pub fn parse(text: &str, base: &Path) -> Result<Self, CliError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))?;
        if let Some(csv) = &cfg.data.csv {
            if csv.is_relative() {
                cfg.data.csv = Some(base.join(csv));
            }
        }
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Flags first, then `PRICECAST_OUT`, then the file.
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(out) = &o.out_dir {
            self.out_dir = out.clone();
        } else if let Some(env) = std::env::var_os(OUT_ENV) {
            self.out_dir = PathBuf::from(env);
        }
        if let Some(j) = o.jobs {
            self.jobs = j;
        }
        if let Some(d) = o.days {
            self.evaluation.days = d;
        }
        if let Some(r) = o.retune_every_days {
            self.evaluation.retune_every_days = r;
        }
        if o.no_tune {
            self.evaluation.tune = false;
        }
    }

    fn check(&self) -> Result<(), CliError> {
        match (&self.data.csv, &self.data.synth) {
            (Some(_), Some(_)) => return Err(CliError::Usage("data: give either `csv` or `synth`, not both".into())),
            (None, None) => return Err(CliError::Usage("data: one of `csv` or `synth` is required".into())),
            (Some(p), None) if !p.is_file() => {
                return Err(CliError::Usage(format!("data file {} does not exist", p.display())))
            }
            _ => {}
        }
        if self.roster.models.is_empty() {
            return Err(CliError::Usage("roster: no models".into()));
        }
        Ok(())
    }

    /// Synthetic settings with the run seed filled in where none is given.
    pub fn synth_config(&self) -> Result<Option<SynthConfig>, CliError> {
        let Some(table) = &self.data.synth else {
            return Ok(None);
        };
        let mut table = table.clone();
        if !table.contains_key("seed") {
            table.insert("seed".into(), toml::Value::Integer(self.seed as i64));
        }
        let cfg: SynthConfig = table
            .try_into()
            .map_err(|e| CliError::Usage(format!("data.synth: {e}")))?;
        Ok(Some(cfg))
    }
}

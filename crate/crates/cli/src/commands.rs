//! Subcommand implementations.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use pricecast_core::data::{
    ingest_csv, parse_timestamp, schema_for, summarize, write_csv, write_summary, ColumnRole, CsvSchema,
    KurtosisConvention,
};
use pricecast_core::eval::{
    days_from, diebold_mariano, dm::DM_MIN_LENGTH, last_days, paired_errors, read_forecasts, run_backtest, select_model, with_workers,
    write_dm_matrix, write_forecasts, write_metrics, write_tuning_log, BacktestPlan, BacktestResult,
};
use pricecast_core::features::FeatureSpec;
use pricecast_core::models::{paired_roster, ForecasterSpec, ModelKind, HORIZON};
use pricecast_core::sensitivity::{default_groups, sensitivity_from_baseline, validate_groups, write_sensitivity_csv};
use pricecast_core::synth::{generate, SynthConfig};
use pricecast_core::tuner::{auto_grid, describe, tune as tune_model, write_score_table, TuningPlan};
use pricecast_core::{Error, Panel};
use serde::Serialize;

use crate::config::RunConfig;
use crate::CliError;

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Errors a bad configuration provokes before any model is fitted.
fn setup(e: Error) -> CliError {
    match e {
        Error::Config(_) | Error::Schema(_) | Error::Plan(_) | Error::History { .. } | Error::Range(_) => {
            CliError::Usage(e.to_string())
        }
        other => runtime(other),
    }
}

fn create(path: &Path) -> Result<fs::File, CliError> {
    fs::File::create(path).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn out_dir(dir: &Path) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|e| runtime(format!("{}: {e}", dir.display())))?;
    Ok(dir.to_path_buf())
}

fn header_columns(path: &Path) -> Result<Vec<String>, CliError> {
    let file = fs::File::open(path).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
    let mut line = String::new();
    BufReader::new(file).read_line(&mut line).map_err(runtime)?;
    Ok(line.trim().split(',').map(|c| c.trim().trim_matches('"').to_string()).collect())
}

pub fn load_panel(cfg: &RunConfig) -> Result<(Panel, Option<SynthConfig>), CliError> {
    if let Some(sc) = cfg.synth_config()? {
        let (panel, _) = generate(&sc).map_err(setup)?;
        return Ok((panel, Some(sc)));
    }
    let path = cfg.data.csv.as_ref().expect("checked at load");
    let schema = match &cfg.data.schema {
        Some(s) => s.clone(),
        None => {
            let base = CsvSchema {
                ffill_limit: cfg.data.ffill_limit,
                ..CsvSchema::default()
            };
            let predictors = header_columns(path)?
                .into_iter()
                .filter(|c| *c != base.timestamp && *c != base.price)
                .map(|c| {
                    if cfg.data.daily.contains(&c) {
                        ColumnRole::daily(&c)
                    } else {
                        ColumnRole::hourly(&c)
                    }
                })
                .collect();
            CsvSchema { predictors, ..base }
        }
    };
    Ok((ingest_csv(path, &schema).map_err(runtime)?, None))
}

fn matches_key(key: &str, spec: &ForecasterSpec) -> bool {
    key == spec.id || key == spec.kind.slug()
}

/// An exact id beats the slug shared by both twins.
fn pick<T: Clone>(map: &BTreeMap<String, T>, spec: &ForecasterSpec) -> Option<T> {
    map.get(&spec.id)
        .or_else(|| map.iter().find(|(k, _)| matches_key(k, spec)).map(|(_, v)| v))
        .cloned()
}

pub fn build_plan(cfg: &RunConfig, panel: &Panel) -> Result<BacktestPlan, CliError> {
    let r = &cfg.roster;
    let mut kinds = Vec::new();
    for slug in &r.models {
        kinds.push(ModelKind::from_slug(slug).map_err(setup)?);
    }
    let externals = r.externals.clone().unwrap_or_else(|| panel.predictor_names());
    for name in &externals {
        if panel.predictor(name).is_none() {
            return Err(CliError::Usage(format!("roster: panel has no predictor `{name}`")));
        }
    }
    let base = FeatureSpec {
        predictors: Vec::new(),
        ..r.features.clone().unwrap_or_default()
    };
    let mut models = paired_roster(&kinds, &externals, &base).map_err(setup)?;
    if !kinds.contains(&ModelKind::Naive) {
        models.retain(|m| m.kind != ModelKind::Naive);
    }
    for key in r.hyper.keys().chain(r.grids.keys()) {
        if !models.iter().any(|m| matches_key(key, m)) {
            return Err(CliError::Usage(format!("roster: `{key}` names no model in the roster")));
        }
    }
    let mut grids = BTreeMap::new();
    for m in &mut models {
        if let Some(h) = pick(&r.hyper, m) {
            m.hyper = h;
        }
        if let Some(g) = pick(&r.grids, m) {
            grids.insert(m.id.clone(), g);
        }
        m.validate().map_err(setup)?;
    }
    let ev = &cfg.evaluation;
    let days = match &ev.start {
        Some(s) => {
            let ts = parse_timestamp(s).map_err(|e| CliError::Usage(format!("evaluation.start: {e}")))?;
            let offset = (ts - panel.calendar().start()).num_hours();
            if offset < 0 {
                return Err(CliError::Usage(format!("evaluation.start {s} precedes the panel")));
            }
            days_from(panel, offset as usize, ev.days).map_err(setup)?
        }
        None => last_days(panel, ev.days).map_err(setup)?,
    };
    let mut plan = BacktestPlan::new(models, days, cfg.seed);
    plan.training_window_hours = cfg.windows.training_window_hours;
    plan.tuning = TuningPlan {
        training_window_hours: cfg.windows.training_window_hours,
        subset_size_hours: cfg.windows.subset_size_hours,
    };
    plan.retune_every_days = ev.retune_every_days;
    plan.tune = ev.tune;
    plan.grids = grids;
    plan.jobs = cfg.jobs;
    plan.validate(panel).map_err(setup)?;
    Ok(plan)
}

#[derive(Serialize)]
struct ModelEntry {
    id: String,
    label: String,
    uses_externals: bool,
    fallback_days: usize,
    failures: Vec<String>,
}

/// Run record written next to the reports. It holds no wall-clock data so
/// reruns stay byte-identical.
#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    status: &'a str,
    version: &'a str,
    seed: u64,
    synth_seed: Option<u64>,
    market: String,
    hours: usize,
    first_forecast: Option<String>,
    last_forecast: Option<String>,
    outputs: Vec<String>,
    models: Vec<ModelEntry>,
    error: Option<String>,
    conventions: Vec<&'static str>,
    config: serde_json::Value,
}

struct Run<'a> {
    command: &'a str,
    cfg: &'a RunConfig,
    dir: PathBuf,
    panel: Panel,
    synth: Option<SynthConfig>,
    plan: BacktestPlan,
}

impl<'a> Run<'a> {
    fn start(command: &'a str, cfg: &'a RunConfig) -> Result<Self, CliError> {
        let (panel, synth) = load_panel(cfg)?;
        let plan = build_plan(cfg, &panel)?;
        let dir = out_dir(&cfg.out_dir)?;
        let run = Run {
            command,
            cfg,
            dir,
            panel,
            synth,
            plan,
        };
        run.manifest("incomplete", &[], None, None)?;
        Ok(run)
    }

    fn manifest(
        &self,
        status: &str,
        outputs: &[&str],
        result: Option<&BacktestResult<f64>>,
        error: Option<String>,
    ) -> Result<(), CliError> {
        let mut config = serde_json::to_value(self.cfg).map_err(runtime)?;
        if let Some(obj) = config.as_object_mut() {
            obj.remove("out_dir");
            obj.remove("jobs");
        }
        let mut conventions = vec![
            "ARMAX exogenous predictors enter unstandardized",
            "ridge lambda grids start at the LASSO lambda_max",
            "SVR sigma is the median pairwise distance heuristic",
            "DM statistic uses Bartlett weights with 23 lags and the Harvey factor",
        ];
        if self.command == "sensitivity" {
            conventions.push(if self.plan.tune {
                "leave-one-out reruns retune hyperparameters"
            } else {
                "leave-one-out reruns keep configured hyperparameters"
            });
        }
        let cal = self.panel.calendar();
        let days = &self.plan.evaluation_days;
        let m = Manifest {
            command: self.command,
            status,
            version: env!("CARGO_PKG_VERSION"),
            seed: self.cfg.seed,
            synth_seed: self.synth.as_ref().map(|s| s.seed),
            market: self.panel.market_label().to_string(),
            hours: self.panel.len(),
            first_forecast: days.first().map(|&d| cal.format_timestamp(d)),
            last_forecast: days.last().map(|&d| cal.format_timestamp(d + HORIZON - 1)),
            outputs: outputs.iter().map(|s| s.to_string()).collect(),
            models: result
                .map(|r| {
                    r.runs
                        .iter()
                        .map(|run| ModelEntry {
                            id: run.id.clone(),
                            label: run.label.clone(),
                            uses_externals: run.uses_externals,
                            fallback_days: run.fallback_days.len(),
                            failures: run.failures.clone(),
                        })
                        .collect()
                })
                .unwrap_or_default(),
            error,
            conventions,
            config,
        };
        let mut f = create(&self.dir.join("manifest.json"))?;
        serde_json::to_writer_pretty(&mut f, &m).map_err(runtime)?;
        writeln!(f).map_err(runtime)?;
        Ok(())
    }

    fn fail(&self, e: CliError) -> CliError {
        // the error reported to the caller matters more than a failed note
        let _ = self.manifest("incomplete", &[], None, Some(e.to_string()));
        e
    }

    fn backtest(&self) -> Result<BacktestResult<f64>, CliError> {
        run_backtest(&self.panel, &self.plan).map_err(|e| self.fail(runtime(e)))
    }

    fn write(&self, name: &str, f: impl FnOnce(fs::File) -> pricecast_core::Result<()>) -> Result<(), CliError> {
        let file = create(&self.dir.join(name)).map_err(|e| self.fail(e))?;
        f(file).map_err(|e| self.fail(runtime(e)))
    }
}

pub fn ingest(cfg: &RunConfig) -> Result<(), CliError> {
    let (panel, _) = load_panel(cfg)?;
    let stats = summarize(&panel, KurtosisConvention::Plain).map_err(runtime)?;
    let dir = out_dir(&cfg.out_dir)?;
    write_summary(&stats, create(&dir.join("summary.csv"))?).map_err(runtime)?;
    let cal = panel.calendar();
    println!(
        "{} hours from {} to {}, {} predictors",
        panel.len(),
        cal.format_timestamp(0),
        cal.format_timestamp(panel.len() - 1),
        panel.predictors().len()
    );
    write_summary(&stats, std::io::stdout().lock()).map_err(runtime)
}

#[derive(Serialize)]
struct SynthSidecar<'a> {
    config: &'a SynthConfig,
    daily_columns: Vec<&'a str>,
    truth: pricecast_core::synth::GroundTruth,
}

pub fn synth(
    config: Option<&Path>,
    seed: Option<u64>,
    hours: Option<usize>,
    decoy: bool,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let (mut sc, dir) = match config {
        Some(p) => {
            let cfg = RunConfig::load(p)?;
            let sc = cfg
                .synth_config()?
                .ok_or_else(|| CliError::Usage("config has no [data.synth] table".into()))?;
            (sc, cfg.out_dir)
        }
        None => {
            let s = seed.ok_or_else(|| CliError::Usage("synth needs --seed or a config".into()))?;
            (
                SynthConfig {
                    seed: s,
                    ..SynthConfig::default()
                },
                PathBuf::from("pricecast-out"),
            )
        }
    };
    if let Some(s) = seed {
        sc.seed = s;
    }
    if let Some(h) = hours {
        sc.horizon_hours = h;
    }
    sc.include_decoy |= decoy;
    let dir = match (out, std::env::var_os(crate::OUT_ENV)) {
        (Some(o), _) => o,
        (None, Some(env)) => PathBuf::from(env),
        (None, None) => dir,
    };
    let (panel, truth) = generate(&sc).map_err(setup)?;
    let dir = out_dir(&dir)?;
    write_csv(&panel, create(&dir.join("panel.csv"))?, Some(6)).map_err(runtime)?;
    let schema = schema_for(&panel);
    let sidecar = SynthSidecar {
        config: &sc,
        daily_columns: schema
            .predictors
            .iter()
            .filter(|c| c.frequency == pricecast_core::data::Frequency::Daily)
            .map(|c| c.name.as_str())
            .collect(),
        truth,
    };
    let mut f = create(&dir.join("ground_truth.json"))?;
    serde_json::to_writer_pretty(&mut f, &sidecar).map_err(runtime)?;
    writeln!(f).map_err(runtime)?;
    println!("wrote {} hours to {}", panel.len(), dir.join("panel.csv").display());
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn tune(cfg: &RunConfig, only: Option<&str>) -> Result<(), CliError> {
    let (panel, _) = load_panel(cfg)?;
    let plan = build_plan(cfg, &panel)?;
    let models: Vec<&ForecasterSpec> = plan
        .models
        .iter()
        .filter(|m| !matches!(m.kind, ModelKind::Naive | ModelKind::Ensemble))
        .filter(|m| only.is_none_or(|id| m.id == id))
        .collect();
    if models.is_empty() {
        return Err(CliError::Usage("no tunable model selected".into()));
    }
    let end = plan.evaluation_days[0];
    let folds = plan.tuning.folds_ending_at(end).map_err(setup)?;
    let window = end - plan.tuning.training_window_hours..end;
    let dir = out_dir(&cfg.out_dir.join("tuning"))?;
    let mut summary = create(&dir.join("summary.csv"))?;
    writeln!(summary, "model,best,cv_rmse,failed_fits,candidates").map_err(runtime)?;
    for spec in models {
        let grid = match plan.grids.get(&spec.id) {
            Some(g) => g.clone(),
            None => auto_grid(spec, &panel, window.clone()).map_err(runtime)?,
        };
        let res = with_workers(cfg.jobs, || tune_model(spec, &grid, &folds, &panel)).map_err(runtime)?;
        write_score_table(&res, create(&dir.join(format!("{}.csv", spec.id)))?).map_err(runtime)?;
        writeln!(
            summary,
            "{},{},{:.4},{},{}",
            spec.id,
            csv_field(&describe(res.best())),
            res.best_score(),
            res.failed_fits,
            grid.len()
        )
        .map_err(runtime)?;
        println!("{:<12} {:<32} cv RMSE {:.4}", spec.id, describe(res.best()), res.best_score());
    }
    Ok(())
}

pub fn evaluate(cfg: &RunConfig) -> Result<(), CliError> {
    let run = Run::start("evaluate", cfg)?;
    let result = run.backtest()?;
    run.write("forecasts.csv", |f| write_forecasts(&result, f))?;
    run.write("metrics.csv", |f| write_metrics(&result, f))?;
    let mut outputs = vec!["forecasts.csv", "metrics.csv"];
    let paired = result.runs.iter().any(|r| r.uses_externals) && result.runs.iter().any(|r| !r.uses_externals);
    if paired && result.hours.len() >= DM_MIN_LENGTH {
        run.write("dm_matrix.csv", |f| write_dm_matrix(&result, f))?;
        outputs.push("dm_matrix.csv");
    } else if paired {
        eprintln!("pricecast: fewer than {DM_MIN_LENGTH} forecast hours, dm_matrix.csv skipped");
    }
    run.write("tuning_log.csv", |f| write_tuning_log(&result, f))?;
    outputs.push("tuning_log.csv");
    run.manifest("complete", &outputs, Some(&result), None)?;
    for r in &result.runs {
        let m = result.metrics(&r.id).map_err(runtime)?;
        println!("{:<12} RMSE {:>8.2}  MAE {:>8.2}", r.id, m.rmse, m.mae);
    }
    Ok(())
}

pub fn sensitivity(cfg: &RunConfig) -> Result<(), CliError> {
    let run = Run::start("sensitivity", cfg)?;
    let groups = match &cfg.sensitivity.groups {
        Some(g) => g.clone(),
        None => default_groups(&run.plan),
    };
    validate_groups(&run.panel, &groups).map_err(|e| run.fail(setup(e)))?;
    let baseline = run.backtest()?;
    let report =
        sensitivity_from_baseline(&run.panel, &run.plan, &groups, &baseline).map_err(|e| run.fail(runtime(e)))?;
    run.write("sensitivity.csv", |f| write_sensitivity_csv(&report, f))?;
    run.manifest("complete", &["sensitivity.csv"], Some(&baseline), None)?;
    for &g in &report.ranking {
        println!("{:<16} {:.4}  {:>6.2}%", report.groups[g], report.fused[g], report.scaled[g]);
    }
    Ok(())
}

pub fn dm(a: &Path, b: &Path, model_a: Option<&str>, model_b: Option<&str>, out: Option<PathBuf>) -> Result<(), CliError> {
    let read = |p: &Path| -> Result<_, CliError> {
        let f = fs::File::open(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
        read_forecasts(f).map_err(runtime)
    };
    let (ra, rb) = (read(a)?, read(b)?);
    let sa = select_model(&ra, model_a).map_err(runtime)?;
    let sb = select_model(&rb, model_b).map_err(runtime)?;
    let (ea, eb) = paired_errors(&sa, &sb).map_err(runtime)?;
    let res = diebold_mariano(&ea, &eb, HORIZON).map_err(runtime)?;
    let name = |rows: &[&pricecast_core::eval::ForecastRow]| rows[0].model.clone();
    println!(
        "{} vs {}: DM {:.4}{} p {:.4} (n = {}, lags = {}{})",
        name(&sa),
        name(&sb),
        res.statistic,
        res.stars(),
        res.p_value,
        res.n,
        res.hac_lags,
        if res.degenerate { ", identical losses" } else { "" }
    );
    let dir = match (out, std::env::var_os(crate::OUT_ENV)) {
        (Some(o), _) => o,
        (None, Some(env)) => PathBuf::from(env),
        (None, None) => PathBuf::from("."),
    };
    let dir = out_dir(&dir)?;
    let mut f = create(&dir.join("dm.csv"))?;
    writeln!(f, "model_a,model_b,statistic,p_value,stars,n,hac_lags,degenerate").map_err(runtime)?;
    writeln!(
        f,
        "{},{},{:.4},{:.4},{},{},{},{}",
        csv_field(&name(&sa)),
        csv_field(&name(&sb)),
        res.statistic,
        res.p_value,
        res.stars(),
        res.n,
        res.hac_lags,
        res.degenerate
    )
    .map_err(runtime)
}

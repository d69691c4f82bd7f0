//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Exits 0 regardless of outcome unless `PRICECAST_ACCEPTANCE_STRICT` is set,
//! in which case any FAIL makes the exit status 1.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use pricecast_core::eval::{compute_metrics, diebold_mariano, last_days, run_backtest, BacktestPlan};
use pricecast_core::features::FeatureSpec;
use pricecast_core::models::{paired_roster, twin_id, ForecasterSpec, Hyper, ModelKind};
use pricecast_core::sensitivity::{run_sensitivity, PredictorGroup};
use pricecast_core::synth::{generate, SynthConfig};
use pricecast_core::tuner::{make_folds, TuningPlan};
use support::{oracles, sim};

const STRICT_ENV: &str = "PRICECAST_ACCEPTANCE_STRICT";
const FOREST_TREES: usize = 100;
const EVAL_DAYS: usize = 28;
const DM_SEEDS: u64 = 10;
const SENSITIVITY_DAYS: usize = 56;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

const ALL_KINDS: [ModelKind; 10] = [
    ModelKind::Naive,
    ModelKind::Dlr,
    ModelKind::SeasonalArma,
    ModelKind::Ridge,
    ModelKind::Lasso,
    ModelKind::Svr,
    ModelKind::Pcr,
    ModelKind::RandomForest,
    ModelKind::Blm,
    ModelKind::Ensemble,
];

/// RMSE per with-externals model and DM p-value of each pair on one seed.
struct PairedRun {
    pairs: Vec<(String, f64, f64, f64)>,
    seconds: f64,
}

fn paired_run(seed: u64) -> PairedRun {
    let (panel, _) = generate(&SynthConfig {
        seed,
        ..SynthConfig::default()
    })
    .unwrap();
    let mut models = paired_roster(&ALL_KINDS, &panel.predictor_names(), &FeatureSpec::default()).unwrap();
    for m in &mut models {
        if let Hyper::Forest(rf) = &mut m.hyper {
            rf.n_trees = FOREST_TREES;
        }
    }
    let mut plan = BacktestPlan::new(models, last_days(&panel, EVAL_DAYS).unwrap(), seed);
    plan.jobs = 1;
    let started = Instant::now();
    let res = run_backtest(&panel, &plan).unwrap();
    let seconds = started.elapsed().as_secs_f64();
    let pairs = plan
        .models
        .iter()
        .filter(|m| m.uses_externals())
        .map(|m| {
            let twin = twin_id(&m.id);
            let with = res.metrics(&m.id).unwrap().rmse;
            let without = res.metrics(&twin).unwrap().rmse;
            let dm = diebold_mariano(&res.errors(&twin).unwrap(), &res.errors(&m.id).unwrap(), 24).unwrap();
            (m.id.clone(), with, without, dm.p_value)
        })
        .collect();
    PairedRun { pairs, seconds }
}

fn externals_improve(first: &PairedRun) -> Verdict {
    let worse: Vec<&str> = first.pairs.iter().filter(|p| p.1 >= p.2).map(|p| p.0.as_str()).collect();
    let best = first.pairs.iter().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
    let reduction = 1.0 - best.1 / best.2;
    let pass = worse.is_empty() && reduction >= 0.10 && first.seconds < 600.0;
    verdict(
        pass,
        format!(
            "best {} rmse {:.3} vs {:.3} ({:.1}% lower), twins not beaten: {:?}, single-threaded {:.0}s",
            best.0,
            best.1,
            best.2,
            100.0 * reduction,
            worse,
            first.seconds
        ),
    )
}

fn dm_significance(runs: &[PairedRun]) -> Verdict {
    let ids: Vec<String> = runs[0].pairs.iter().map(|p| p.0.clone()).collect();
    let counts: Vec<(String, usize)> = ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.clone(), runs.iter().filter(|r| r.pairs[i].3 < 0.001).count()))
        .collect();
    let size = sim::dm_null_rejection_rate(1000);
    let pass = counts.iter().all(|c| c.1 >= 9) && (0.03..=0.07).contains(&size);
    let tally: Vec<String> = counts.iter().map(|(id, n)| format!("{id} {n}/{}", runs.len())).collect();
    verdict(pass, format!("p<0.001 seeds: {}; null size {:.1}%", tally.join(", "), 100.0 * size))
}

fn solver_oracles() -> Verdict {
    let ridge = oracles::ridge_gap(20);
    let lasso = oracles::lasso_threshold_violations(20);
    let pcr = oracles::pcr_full_rank_gap(20);
    let svr = oracles::svr_qp_gap(10);
    let split = oracles::split_mismatches(10);
    let blm = oracles::blm_orthonormal_gap(10);
    let pass = ridge < 1e-8 && lasso.0 == 0 && pcr < 1e-8 && svr < 1e-4 && split == 0 && blm < 1e-4;
    verdict(
        pass,
        format!(
            "ridge {ridge:.1e}, lasso nonzero at max {}, pcr {pcr:.1e}, svr {svr:.1e}, split mismatches {split}, blm {blm:.1e}",
            lasso.0
        ),
    )
}

fn arma_recovery() -> Verdict {
    let hits = sim::arma_recovery_hits(0..100, 0.05);
    let tally = sim::aicc_choices(0..100);
    let right = tally.get(&(1, 1)).copied().unwrap_or(0);
    let spread: Vec<String> = tally.iter().map(|((p, q), n)| format!("({p},{q}) {n}")).collect();
    verdict(
        hits >= 95 && right >= 80,
        format!("within 0.05: {hits}/100; AICc picks (1,1) {right}/100 [{}]", spread.join(", ")),
    )
}

fn tuning_plan() -> Verdict {
    let plan = TuningPlan::default();
    let end = 5000;
    let folds = make_folds(end - plan.training_window_hours..end, plan.subset_size_hours).unwrap();
    let separated = folds.iter().all(|f| {
        f.train.end <= f.validate.start
            && f.validate.len() == 24
            && f.validate.end <= end
            && f.train.start >= end - plan.training_window_hours
    });
    verdict(folds.len() == 7 && separated, format!("{} folds, separated: {separated}", folds.len()))
}

fn metrics_fixture() -> Verdict {
    let (f, r, h) = sim::metrics_fixture();
    let cal = sim::fixture_calendar(336);
    let m = compute_metrics(&f, &r, &cal, &h).unwrap();
    let want = sim::metrics_fixture_expected();
    let got = [m.mae, m.rmse, m.avg_drmse, m.avg_wrmse];
    let gap = got.iter().zip(want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let day = 24 * 9..24 * 10;
    let one = compute_metrics(&f[day.clone()], &r[day.clone()], &cal, &h[day]).unwrap();
    let single = (one.avg_drmse - one.rmse).abs();
    verdict(gap < 1e-12 && single < 1e-12, format!("fixture gap {gap:.1e}, single-day DRMSE-RMSE {single:.1e}"))
}

fn sensitivity_ranking() -> Verdict {
    let kinds = [
        ModelKind::Dlr,
        ModelKind::SeasonalArmax,
        ModelKind::Ridge,
        ModelKind::Lasso,
        ModelKind::Pcr,
        ModelKind::Blm,
    ];
    let (mut top_hits, mut decoy_range, mut weight_gap) = (0, (f64::INFINITY, f64::NEG_INFINITY), 0.0f64);
    let mut misses = Vec::new();
    for seed in 0..20 {
        let (panel, truth) = generate(&SynthConfig {
            seed: 1000 + seed,
            include_decoy: true,
            ..SynthConfig::default()
        })
        .unwrap();
        let names = panel.predictor_names();
        let features = FeatureSpec::with_predictors(names.clone());
        let mut models = vec![ForecasterSpec::default_for("naive", ModelKind::Naive, FeatureSpec::default()).unwrap()];
        for k in kinds {
            models.push(ForecasterSpec::default_for(format!("{}_x", k.slug()), k, features.clone()).unwrap());
        }
        let plan = BacktestPlan::new(models, last_days(&panel, SENSITIVITY_DAYS).unwrap(), seed);
        let groups: Vec<PredictorGroup> = names.iter().map(|n| PredictorGroup::single(n)).collect();
        let rep = run_sensitivity(&panel, &plan, &groups).unwrap();
        let dominant = truth.dominant_predictor().unwrap();
        if rep.top() == dominant {
            top_hits += 1;
        } else {
            misses.push(format!("seed {seed}: {} over {dominant}", rep.top()));
        }
        let d = rep.group_score("decoy").unwrap();
        decoy_range = (decoy_range.0.min(d), decoy_range.1.max(d));
        weight_gap = weight_gap.max((rep.weights.iter().sum::<f64>() - 1.0).abs());
    }
    let pass = top_hits >= 18 && decoy_range.0 >= 0.97 && decoy_range.1 <= 1.03 && weight_gap < 1e-12;
    verdict(
        pass,
        format!(
            "dominant group first {top_hits}/20 {misses:?}, decoy S in [{:.4}, {:.4}], weight sum gap {weight_gap:.1e}",
            decoy_range.0, decoy_range.1
        ),
    )
}

fn determinism() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let config = "seed = 5\n\n[data.synth]\nhorizon_hours = 2400\n\n[roster.hyper.rf]\ntype = \"forest\"\nn_trees = 100\n\n[evaluation]\ndays = 7\n";
    fs::write(dir.join("run.toml"), config).unwrap();
    let mut outputs = Vec::new();
    for (out, jobs) in [("a", None), ("b", None), ("c", Some("8"))] {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_pricecast"));
        cmd.current_dir(dir).env_remove("PRICECAST_OUT");
        if let Some(j) = jobs {
            cmd.args(["--jobs", j]);
        }
        let status = cmd.args(["evaluate", "-c", "run.toml", "--out", out]).output().unwrap();
        if !status.status.success() {
            return verdict(false, format!("evaluate failed: {}", String::from_utf8_lossy(&status.stderr).trim()));
        }
        outputs.push(snapshot(&dir.join(out)));
    }
    let same = outputs[0] == outputs[1] && outputs[0] == outputs[2];
    let names: Vec<&str> = outputs[0].iter().map(|f| f.0.as_str()).collect();
    verdict(same && names.len() >= 5, format!("identical across reruns and --jobs 8: {same}, files {names:?}"))
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn main() {
    let mut failed = 0;
    let mut report = |label: &str, started: Instant, v: Verdict| {
        let tag = if v.pass { "PASS" } else { "FAIL" };
        failed += !v.pass as usize;
        println!("{tag} {label}: {} ({:.0}s)", v.detail, started.elapsed().as_secs_f64());
    };

    let t = Instant::now();
    let runs: Vec<PairedRun> = (0..DM_SEEDS).map(paired_run).collect();
    report("1 externals improve forecasts", t, externals_improve(&runs[0]));
    let t = Instant::now();
    report("2 DM significance and size", t, dm_significance(&runs));
    let t = Instant::now();
    report("3 solver oracles", t, solver_oracles());
    let t = Instant::now();
    report("4 ARMA recovery and AICc order", t, arma_recovery());
    let t = Instant::now();
    report("5 tuning folds", t, tuning_plan());
    let t = Instant::now();
    report("6 metrics fixture", t, metrics_fixture());
    let t = Instant::now();
    report("7 sensitivity ranking", t, sensitivity_ranking());
    let t = Instant::now();
    report("8 determinism", t, determinism());

    println!("{failed} of 8 criteria failed");
    if failed > 0 && std::env::var_os(STRICT_ENV).is_some() {
        std::process::exit(1);
    }
}

use pricecast_core::error::Error;
use pricecast_core::eval::{last_days, run_backtest, BacktestPlan};
use pricecast_core::features::FeatureSpec;
use pricecast_core::models::{ForecasterSpec, ModelKind};
use pricecast_core::sensitivity::{
    run_sensitivity, sensitivity_from_baseline, write_sensitivity_csv, PredictorGroup, HOUR_TOKEN,
};
use pricecast_core::synth::{generate, SynthConfig};
use pricecast_core::Panel;

fn planted() -> Panel {
    generate(&SynthConfig {
        horizon_hours: 10_000,
        include_decoy: true,
        seed: 12,
        ..SynthConfig::default()
    })
    .unwrap()
    .0
}

fn plan(panel: &Panel, days: usize) -> BacktestPlan {
    let f = FeatureSpec::with_predictors(panel.predictor_names());
    let models = vec![
        ForecasterSpec::default_for("naive", ModelKind::Naive, FeatureSpec::default()).unwrap(),
        ForecasterSpec::default_for("dlr_x", ModelKind::Dlr, f.clone()).unwrap(),
        ForecasterSpec::default_for("ridge_x", ModelKind::Ridge, f.clone()).unwrap(),
        ForecasterSpec::default_for("lasso_x", ModelKind::Lasso, f).unwrap(),
    ];
    BacktestPlan::new(models, last_days(panel, days).unwrap(), 2)
}

#[test]
fn planted_ranking_and_decoy() {
    let panel = planted();
    let plan = plan(&panel, 14);
    let groups: Vec<PredictorGroup> = ["load", "wind", "solar", "gas", "decoy", HOUR_TOKEN]
        .iter()
        .map(|g| PredictorGroup::single(g))
        .collect();
    let rep = run_sensitivity(&panel, &plan, &groups).unwrap();
    assert_eq!(rep.models, ["dlr_x", "ridge_x", "lasso_x"]);
    assert_eq!(rep.top(), "load");
    let decoy = rep.group_score("decoy").unwrap();
    assert!((0.97..=1.03).contains(&decoy), "decoy {decoy}");
    assert!((rep.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    for (g, row) in rep.ratios.iter().enumerate() {
        let lo = row.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!(rep.fused[g] >= lo - 1e-12 && rep.fused[g] <= hi + 1e-12);
    }
    assert_eq!(rep.scaled[rep.ranking[0]], 100.0);
    assert!(rep.scaled.iter().all(|s| *s <= 100.0));
    // naive never sees a predictor, so no group touches it
    assert!(rep.rerun.iter().all(|r| !r.iter().any(|m| m == "naive")));
}

#[test]
fn one_group_reports_one_full_row() {
    let panel = planted();
    let plan = plan(&panel, 3);
    let baseline = run_backtest(&panel, &plan).unwrap();
    let rep = sensitivity_from_baseline(&panel, &plan, &[PredictorGroup::single("wind")], &baseline).unwrap();
    let mut buf = Vec::new();
    write_sensitivity_csv(&rep, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], "rank,group,S_dlr_x,S_ridge_x,S_lasso_x,fused,scaled_pct");
    assert!(lines[1].starts_with("1,wind,"));
    assert!(lines[1].ends_with(",100.00"));
}

#[test]
fn bad_group_lists_are_rejected_before_any_run() {
    let panel = planted();
    let plan = plan(&panel, 3);
    assert!(matches!(run_sensitivity(&panel, &plan, &[]), Err(Error::Config(_))));
    assert!(matches!(
        run_sensitivity(&panel, &plan, &[PredictorGroup::single("sunspots")]),
        Err(Error::Schema(_))
    ));
    let overlap = [PredictorGroup::new("a", &["load", "wind"]), PredictorGroup::new("b", &["wind"])];
    assert!(matches!(run_sensitivity(&panel, &plan, &overlap), Err(Error::Config(_))));
}

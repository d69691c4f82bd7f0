use pricecast_core::data::{ingest_reader, schema_for, write_csv};
use pricecast_core::eval::{last_days, run_backtest, BacktestPlan};
use pricecast_core::features::FeatureSpec;
use pricecast_core::models::{ForecasterSpec, ModelKind};
use pricecast_core::synth::{generate, SynthConfig};
use pricecast_core::Panel32;

#[test]
fn single_precision_backtest_tracks_double() {
    let (panel, _) = generate(&SynthConfig {
        horizon_hours: 24 * 45,
        seed: 31,
        ..SynthConfig::default()
    })
    .unwrap();
    let mut buf = Vec::new();
    write_csv(&panel, &mut buf, Some(4)).unwrap();
    let schema = schema_for(&panel);
    let p32: Panel32 = ingest_reader(buf.as_slice(), &schema).unwrap();
    let p64 = ingest_reader::<f64, _>(buf.as_slice(), &schema).unwrap();
    let f = FeatureSpec::with_predictors(panel.predictor_names());
    let models = vec![
        ForecasterSpec::default_for("naive", ModelKind::Naive, FeatureSpec::default()).unwrap(),
        ForecasterSpec::default_for("dlr_x", ModelKind::Dlr, f.clone()).unwrap(),
        ForecasterSpec::default_for("ridge_x", ModelKind::Ridge, f.clone()).unwrap(),
        ForecasterSpec::default_for("lasso_x", ModelKind::Lasso, f.clone()).unwrap(),
        ForecasterSpec::default_for("arma_x", ModelKind::SeasonalArmax, f).unwrap(),
    ];
    let plan = BacktestPlan::new(models, last_days(&p64, 5).unwrap(), 1);
    let r32 = run_backtest(&p32, &plan).unwrap();
    let r64 = run_backtest(&p64, &plan).unwrap();
    for id in ["naive", "dlr_x", "ridge_x", "lasso_x", "arma_x"] {
        let a = r32.metrics(id).unwrap().rmse;
        let b = r64.metrics(id).unwrap().rmse;
        assert!((a - b).abs() <= 0.02 * b, "{id}: f32 {a} vs f64 {b}");
    }
}

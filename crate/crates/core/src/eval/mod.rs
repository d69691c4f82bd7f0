//! Rolling backtests, accuracy metrics and forecast comparison tests.

pub mod backtest;
pub mod dm;
pub mod export;
pub mod metrics;

pub use backtest::{days_from, last_days, run_backtest, with_workers, BacktestPlan, BacktestResult, ModelRun, TuningRecord};
pub use dm::{diebold_mariano, significance_stars, DmResult};
pub use export::{
    dm_matrix, paired_errors, read_forecasts, select_model, write_dm_matrix, write_forecasts, write_metrics, write_tuning_log, ForecastRow,
};
pub use metrics::{compute_metrics, r_squared, MetricReport};

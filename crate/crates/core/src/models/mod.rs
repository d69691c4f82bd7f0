//! Forecasting models behind one fit/forecast contract.

pub mod arma;
pub mod blm;
pub mod ensemble;
pub mod fitted;
pub mod forest;
pub mod linear;
pub mod pcr;
pub mod spec;
pub mod svr;

pub use arma::{fit_seasonal_arma, ArmaFit};
pub use blm::{fit_blm, BlmFit};
pub use ensemble::{fit_ensemble, EnsembleFit};
pub use fitted::{
    design_for, fit_model, fit_naive, fit_state, forecast_24h, training_design, FittedModel, ForecastContext, ModelState,
    HORIZON, NAIVE_LAG,
};
pub use forest::{fit_random_forest, ForestFit};
pub use linear::{fit_linear, fit_ols, lambda_max, LinearFit};
pub use pcr::{fit_pcr, PcrFit};
pub use spec::{
    ArmaOrder, BlmConfig, EnsembleConfig, ForecasterSpec, Hyper, ModelKind, PcrConfig, PenaltyConfig, PenaltyKind, RfConfig,
    SvrConfig, paired_roster, twin_id,
};
pub use svr::{fit_svr, SvrFit};

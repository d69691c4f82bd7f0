//! Hourly electricity price forecasting engine.
//!
//! Panels of hourly prices and external predictors feed a roster of
//! forecasters (naive, Seasonal-ARMA(X), linear, penalized, kernel, tree and
//! boosting models plus a stacked ensemble). Models are re-estimated daily in
//! a rolling backtest, tuned by rolling-origin cross-validation, compared
//! with Diebold–Mariano tests and ranked for predictor sensitivity.
//!
//! All numerics are generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the usual `f64` instantiation.

pub mod data;
pub mod error;
pub mod eval;
pub mod features;
pub mod linalg;
pub mod models;
pub mod scalar;
pub mod sensitivity;
pub mod seeds;
pub mod synth;
pub mod tuner;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Panel = data::HourlyPanel<f64>;
pub type Matrix = features::FeatureMatrix<f64>;
pub type Model = models::FittedModel<f64>;
pub type Context = models::ForecastContext<f64>;

pub type Panel32 = data::HourlyPanel<f32>;
pub type Model32 = models::FittedModel<f32>;

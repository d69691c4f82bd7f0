use thiserror::Error;

/// Errors raised anywhere in the forecasting engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("gap in hourly timestamps: first missing hour is {first_missing}")]
    Gap { first_missing: String },
    #[error("duplicate timestamp {timestamp}")]
    Duplicate { timestamp: String },
    #[error("cannot parse row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },
    #[error("missing value at row {row}, column `{column}`")]
    Missing { row: usize, column: String },
    #[error("range error: {0}")]
    Range(String),
    #[error("insufficient history: need {needed} hours, have {available}")]
    History { needed: usize, available: usize },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("zero-variance column `{0}` cannot be standardized")]
    Variance(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("singular least-squares system ({0}); consider a ridge penalty")]
    Singular(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("requested {requested} components but design rank is {rank}")]
    Rank { requested: usize, rank: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("optimizer did not converge after {iterations} iterations (best objective {best_objective:e})")]
    Convergence {
        iterations: usize,
        best_objective: f64,
        best_params: Vec<f64>,
    },
    #[error("missing predictor value for the target day: {0}")]
    MissingExog(String),
    #[error("tuning plan error: {0}")]
    Plan(String),
    #[error("empty input: {0}")]
    Empty(String),
    #[error("model weights undefined: {0}")]
    Weight(String),
    #[error("forecast files are not paired: {0}")]
    Pair(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

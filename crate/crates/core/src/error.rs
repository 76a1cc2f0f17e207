use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid function: {0}")]
    InvalidFunction(String),
    #[error("x = {x} outside domain [{lo}, {hi}]")]
    OutOfDomain { x: f64, lo: f64, hi: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("segment [{x0}, {x1}] is flat at level {level}, a multiple of delta; jitter the function first")]
    FlatLevel { x0: f64, x1: f64, level: f64 },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("quadrature budget exhausted: estimate {estimate} with error {error}")]
    BudgetExhausted { estimate: f64, error: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

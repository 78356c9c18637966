use thiserror::Error;

/// Errors raised by the library layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("argument out of range: {0}")]
    Argument(String),

    #[error("degenerate population: {0}")]
    Degenerate(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("arm {arm} has {size} units, at least {required} required")]
    ArmTooSmall {
        arm: usize,
        size: usize,
        required: usize,
    },

    #[error("tied values under strict tie policy: {0:?}")]
    Ties(Vec<f64>),

    #[error("enumeration refused: {count} assignments exceeds cap {cap}")]
    CapExceeded { count: u128, cap: u128 },

    #[error("matrix is singular: eigenvalue {eigenvalue:e} below {threshold:e} (consider reducing the contrast)")]
    Singular { eigenvalue: f64, threshold: f64 },

    #[error("no acceptable assignment after {tries} tries (empirical acceptance rate {rate})")]
    MaxTries { tries: usize, rate: f64 },

    #[error("internal consistency check failed: {0}")]
    Internal(String),

    #[error("csv: missing column `{0}`")]
    MissingColumn(String),

    #[error("csv: non-numeric cell at row {row}, column `{column}`: {value:?}")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

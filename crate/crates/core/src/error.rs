use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not symmetric: entries ({row},{col}) and ({col},{row}) differ by {gap:e}")]
    NotSymmetric { row: usize, col: usize, gap: f64 },

    #[error("matrix is not positive definite: pivot {pivot} is {value:e}")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("row index {index} out of range for a dataset with {len} rows")]
    Index { index: usize, len: usize },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("cannot impute column c{column}: it has no observed cells")]
    ImputationImpossible { column: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("overlap calibration failed: {reason} (achieved max overlap {achieved})")]
    Calibration { reason: String, achieved: f64 },

    #[error("resource {name} is corrupt: expected sha256 {expected}, found {actual}")]
    Checksum {
        name: String,
        expected: String,
        actual: String,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by invalid user input rather than by a failed
    /// computation. The CLI maps these to exit code 1.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Parse(_) | Error::InvalidDataset(_) | Error::Shape(_)
        )
    }
}

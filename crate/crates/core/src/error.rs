//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors raised by configuration checks, estimators, model fitting and I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value or resolved tuning count is out of range.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Input data violates a documented precondition.
    #[error("invalid input: {0}")]
    Input(String),

    /// An index window does not fit inside the series it reads from.
    #[error("window [{start}, {end}) exceeds series length {len}")]
    Window { start: usize, end: usize, len: usize },

    /// Parameters violate the box bounds or the stationarity constraint.
    #[error("parameter constraint violated: {0}")]
    Constraint(String),

    /// A matrix that must be inverted is numerically singular.
    #[error("singular matrix: eigenvalue {eigenvalue:e} along direction {direction:?}")]
    Singular { eigenvalue: f64, direction: Vec<f64> },

    /// A numerical routine produced a non-finite or otherwise unusable value.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Returns a [`Error::Window`] unless `end <= len`.
pub(crate) fn check_window(start: usize, end: usize, len: usize) -> Result<()> {
    if end > len {
        Err(Error::Window { start, end, len })
    } else {
        Ok(())
    }
}

//! Error type shared across the crate.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Array shapes or lengths do not line up.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A configuration value is out of its legal range.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A data file could not be read or parsed.
    #[error("ingestion failed: {0}")]
    Ingestion(String),

    /// A metric was requested on inputs where it is undefined.
    #[error("metric undefined: {0}")]
    Metric(String),

    /// A computation produced or received a non-finite value.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// A statistic was requested on a sample that is too small.
    #[error("insufficient sample: {0}")]
    InsufficientSample(String),

    /// Training produced a non-finite loss and was aborted.
    #[error("training diverged at epoch {epoch}, batch {batch}: loss = {loss}")]
    Diverged {
        epoch: usize,
        batch: usize,
        loss: f64,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

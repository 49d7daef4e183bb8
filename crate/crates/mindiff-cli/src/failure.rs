//! Exit-code policy.
//!
//! 1 — configuration problems (bad flags, bad config file, bad CSV input);
//! 2 — data problems (ingestion, downloads, checksums, file system);
//! 3 — training diverged or produced non-finite numbers;
//! 4 — a sweep finished but some runs failed.

use mindiff::Error;

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

pub type CliResult<T> = Result<T, Failure>;

impl Failure {
    pub fn config(message: impl Into<String>) -> Failure {
        Failure {
            code: 1,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Failure {
        Failure {
            code: 2,
            message: message.into(),
        }
    }

    pub fn partial_sweep(message: impl Into<String>) -> Failure {
        Failure {
            code: 4,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        let code = match &e {
            Error::Config(_)
            | Error::DimensionMismatch(_)
            | Error::InsufficientSample(_)
            | Error::Metric(_) => 1,
            Error::Ingestion(_) | Error::Io(_) => 2,
            Error::Diverged { .. } | Error::NonFinite(_) => 3,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Failure {
        Failure::data(e.to_string())
    }
}

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {message}")]
    ConfigFile { path: PathBuf, message: String },

    #[error("infeasible equilibrium: {0}")]
    Infeasible(String),

    #[error("numerical failure at t = {time} s: {message}")]
    Numerical { time: f64, message: String },

    #[error("traces are not aligned: {0}")]
    Misaligned(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("open-loop tuning failed: {0}")]
    Tuning(String),

    #[error("invalid input data: {0}")]
    Data(String),

    #[error("check failed: {0}")]
    Check(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by the numerical integration rather than by
    /// the user's configuration or input data.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Numerical { .. } | Error::Infeasible(_) | Error::Tuning(_)
        )
    }
}

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("line {line}: field `{field}`: {message}")]
    InvalidField {
        line: u64,
        field: &'static str,
        message: String,
    },

    #[error("{0}")]
    InvalidInput(String),

    #[error("invalid model configuration: {0}")]
    InvalidConfiguration(String),

    #[error("cannot impute covariate: no observed donors for arm={arm}, response={response}")]
    NoImputationDonors { arm: u8, response: u8 },

    #[error("no records in input")]
    Empty,

    #[error("optimizer did not converge in {iterations} iterations (gradient max-norm {gradient_norm:e})")]
    NonConvergence { iterations: usize, gradient_norm: f64 },

    #[error("separation detected: {parameter} reached {value}")]
    Separation { parameter: String, value: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerical machinery rather than of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. } | Error::Separation { .. } | Error::Numerical(_)
        )
    }
}

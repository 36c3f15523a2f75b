use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    /// A chain or sweep produced a non-finite state, or a state whose norm
    /// exceeded the divergence threshold.
    #[error("divergence at layer {layer}: state norm {norm:e}")]
    Divergence { layer: usize, norm: f64 },

    #[error("time {0} outside [0, 1]")]
    Domain(f64),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("statistic undefined: {0}")]
    UndefinedStatistic(&'static str),

    #[error("loss increased from {before:e} to {after:e} at t = {t}; reduce dt")]
    StepSize { t: f64, before: f64, after: f64 },

    #[error("csv: {0}")]
    Csv(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}

pub(crate) fn check_dim(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        })
    }
}

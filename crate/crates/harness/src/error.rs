use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),

    #[error("every depth diverged: {0}")]
    AllDiverged(String),

    #[error("initialisation violates the small-loss/small-weight conditions at N = {depth}: {detail}")]
    Assumption1 { depth: usize, detail: String },

    #[error("training diverged at N = {depth}, epoch {epoch}: {source}")]
    TrainingDiverged {
        depth: usize,
        epoch: usize,
        source: odenet_core::Error,
    },

    #[error(transparent)]
    Core(#[from] odenet_core::Error),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl HarnessError {
    pub fn config(msg: impl Into<String>) -> Self {
        Self::Config(msg.into())
    }

    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::AllDiverged(_) | Self::TrainingDiverged { .. } => 3,
            Self::Assumption1 { .. } => 4,
            Self::Core(_) | Self::Io { .. } => 1,
        }
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> HarnessError {
    let path = path.into();
    move |source| HarnessError::Io { path, source }
}

use std::path::PathBuf;

use thiserror::Error;

/// Failures of the harness, grouped by the exit code they map to.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("{failed} audit row(s) failed")]
    AuditFailed { failed: usize },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Data(_) | CliError::Io { .. } | CliError::Csv(_) => 2,
            CliError::AuditFailed { .. } => 3,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<prising_core::Error> for CliError {
    fn from(e: prising_core::Error) -> Self {
        use prising_core::Error as E;
        match e {
            E::InvalidParameter(_) | E::TooLarge { .. } => CliError::Config(e.to_string()),
            E::DimensionMismatch { .. }
            | E::InvalidCoupling(_)
            | E::InvalidNetwork(_)
            | E::Parse { .. }
            | E::GenerationFailed(_)
            | E::IsolatedNode(_) => CliError::Data(e.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

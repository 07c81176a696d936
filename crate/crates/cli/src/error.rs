use std::path::PathBuf;

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] maskaggr::Error),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 config error, 3 I/O error, 4 computation error.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Core(e) if e.is_io() => 3,
            CliError::Core(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            2 => "config",
            3 => "io",
            _ => "computation",
        }
    }

    pub fn record(&self, stage: &str) -> ErrorRecord {
        ErrorRecord {
            stage: stage.to_owned(),
            exit_code: self.exit_code(),
            kind: self.kind().to_owned(),
            message: self.to_string(),
        }
    }
}

/// Machine-readable failure description stored in manifests.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub stage: String,
    pub exit_code: u8,
    pub kind: String,
    pub message: String,
}

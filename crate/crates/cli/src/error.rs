use std::path::PathBuf;

use ae1svm_core::Error as CoreError;

/// Failures surfaced by the command-line layer, each mapped to a process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration:\n{}", .0.iter().map(|v| format!("  - {v}")).collect::<Vec<_>>().join("\n"))]
    Config(Vec<String>),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("{path}: {message}")]
    Data { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] CoreError),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn data(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        CliError::Data {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for configuration or argument errors, 3 for data errors, 4 for training or numeric errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Argument(_) => 2,
            CliError::Data { .. } | CliError::Io { .. } => 3,
            CliError::Core(e) => match e {
                CoreError::Argument(_) => 2,
                CoreError::Shape { .. } | CoreError::Contract(_) | CoreError::Metric(_) => 3,
                CoreError::Training { .. } | CoreError::NonFiniteGradient { .. } => 4,
            },
        }
    }
}

use thiserror::Error;

/// Everything that ends a command; each variant maps to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] debtsim::Error),
    /// A well-formed request with a negative answer (an infeasible system).
    #[error("{0}")]
    Negative(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Negative(_) => 2,
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

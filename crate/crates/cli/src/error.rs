use pricelab_core::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0} of {1} properties failed")]
    PropertyFailure(usize, usize),
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    /// 1 when a checked property or a numerical solve failed, 2 for anything
    /// the caller can fix by changing the input.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::PropertyFailure(..) => 1,
            CliError::Core(CoreError::Numerics(_) | CoreError::NoConvergence(_)) => 1,
            _ => 2,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

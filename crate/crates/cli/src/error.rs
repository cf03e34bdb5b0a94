use spinsq_core::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

pub(crate) fn config(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl CliError {
    /// 2 for bad input, 3 for numerical failure, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Core(e) => match e {
                CoreError::InvalidParameter(_) | CoreError::Domain(_) | CoreError::TooLarge(_) => EXIT_CONFIG,
                CoreError::NotConverged { .. }
                | CoreError::Stiffness { .. }
                | CoreError::CriticalDivergence(_)
                | CoreError::NoStableFixedPoint(_)
                | CoreError::Singular(_) => EXIT_NUMERICAL,
                _ => 1,
            },
            _ => 1,
        }
    }
}

use ppboot_core::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("data error: {0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Data(_) => 4,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidParameter(_) | CoreError::InvalidBound { .. } => CliError::Config(e.to_string()),
            CoreError::DuplicatePoint { first, second } => CliError::Data(format!(
                "data rows {} and {} hold the same point; points must be pairwise different",
                first + 1,
                second + 1
            )),
            CoreError::OutOfWindow { index } => {
                CliError::Data(format!("data row {} lies outside the observation window", index + 1))
            }
            CoreError::LengthMismatch { .. } => CliError::Data(e.to_string()),
            CoreError::UnattainableLevel { .. }
            | CoreError::DegenerateCount
            | CoreError::UndefinedMoment { .. }
            | CoreError::NonFiniteIntegrand { .. } => CliError::Numerical(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

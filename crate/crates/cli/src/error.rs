//! CLI error type: wraps the library error and adds config failures, with a
//! stable one-word category for machine parsing.

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Core(#[from] perfquant_core::Error),

    #[error("{0}")]
    Config(String),
}

impl CliError {
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.category(),
            CliError::Config(_) => "config",
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// A check ran and failed.
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Verification(_) => 1,
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl From<polystab::Error> for CliError {
    fn from(e: polystab::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

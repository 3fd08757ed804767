use thiserror::Error;

/// Exit statuses besides 0 (success) and 2 (usage error, from `clap`).
pub mod exit {
    pub const RUNTIME: i32 = 1;
    pub const CONFIG: i32 = 3;
    pub const CAP_EXCEEDED: i32 = 4;
    pub const SUITE_FAILED: i32 = 5;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("{0}; reduce the blocklength or rates, or use monte-carlo mode")]
    Cap(strongsec::Error),

    #[error("{0}")]
    Core(strongsec::Error),

    #[error("property suites failed: {0}")]
    SuiteFailed(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => exit::CONFIG,
            CliError::Cap(_) => exit::CAP_EXCEEDED,
            CliError::SuiteFailed(_) => exit::SUITE_FAILED,
            CliError::Core(_) | CliError::Io(_) => exit::RUNTIME,
        }
    }
}

impl From<strongsec::Error> for CliError {
    fn from(e: strongsec::Error) -> Self {
        match e {
            strongsec::Error::CapExceeded { .. } => CliError::Cap(e),
            strongsec::Error::InvalidParameter(_) => CliError::Config(e.to_string()),
            e => CliError::Core(e),
        }
    }
}

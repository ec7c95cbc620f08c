use thiserror::Error;

/// Exit status 2 for bad input, 3 for failed audits, 1 for anything else.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    #[error("audit failed: {0}")]
    AuditFailed(String),

    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::AuditFailed(_) => 3,
            CliError::Runtime(_) => 1,
        }
    }

    pub fn config(context: impl std::fmt::Display, e: impl std::fmt::Display) -> Self {
        CliError::Config(format!("{context}: {e}"))
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl From<ipir_core::Error> for CliError {
    fn from(e: ipir_core::Error) -> Self {
        use ipir_core::Error as E;
        match e {
            E::NotSquare { .. }
            | E::Empty
            | E::NegativeEntry { .. }
            | E::SumNotOne { .. }
            | E::InvalidParams(_)
            | E::PartialSupport { .. }
            | E::TooLarge { .. }
            | E::UnsupportedPair { .. }
            | E::BlockMismatch { .. }
            | E::ScheduleMismatch { .. }
            | E::Parse(_) => CliError::Config(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<ipir_net::NetError> for CliError {
    fn from(e: ipir_net::NetError) -> Self {
        match e {
            ipir_net::NetError::Store(_) => CliError::Config(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

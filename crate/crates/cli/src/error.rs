use std::fmt;

use vortex_core::Error;

/// Failure classes, each with its own process exit status.
#[derive(Debug)]
pub enum CliError {
    /// bad arguments, config or input files
    User(String),
    /// the configured physics falls outside the model's validity
    Physics(String),
    /// the fit stopped at its iteration cap
    NotConverged(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::User(_) => 1,
            CliError::Physics(_) => 2,
            CliError::NotConverged(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::User(m) => write!(f, "{m}"),
            CliError::Physics(m) => write!(f, "physics validity: {m}"),
            CliError::NotConverged(m) => write!(f, "not converged: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::FresnelRegime { .. }
            | Error::KernelTooWide { .. }
            | Error::UnreliableWinding { .. }
            | Error::EmptyDistribution
            | Error::NonFiniteResidual(_) => CliError::Physics(msg),
            _ => CliError::User(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::User(e.to_string())
    }
}

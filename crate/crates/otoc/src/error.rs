use std::process::ExitCode;

use otoc_core::Error;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Malformed or inconsistent configuration, or unusable paths.
    #[error("schema error: {0}")]
    Schema(String),
    /// Quadrature or Fock truncation failed to converge.
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// The request is well formed but outside what the engines support.
    #[error("capability error: {0}")]
    Capability(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Schema(_) | CliError::Io(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Capability(_) => 3,
        }
    }

    pub fn to_exit(&self) -> ExitCode {
        ExitCode::from(self.exit_code())
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::Quadrature { .. } | Error::Truncation { .. } => CliError::Numerical(msg),
            Error::Capability(_) | Error::DimensionCap { .. } | Error::Domain(_) => CliError::Capability(msg),
            Error::DimensionMismatch(_)
            | Error::NotHermitian(_)
            | Error::InvalidState(_)
            | Error::InvalidSubsystems(_)
            | Error::InvalidParameter(_)
            | Error::SpanMismatch(_) => CliError::Schema(msg),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn core_errors_map_to_exit_codes() {
        assert_eq!(CliError::from(Error::InvalidParameter("x".into())).exit_code(), 1);
        assert_eq!(CliError::from(Error::Truncation { deviation: 1.0, n_max: 4 }).exit_code(), 2);
        assert_eq!(CliError::from(Error::Quadrature { estimate: 1.0, tolerance: 0.1 }).exit_code(), 2);
        assert_eq!(CliError::from(Error::Capability("x".into())).exit_code(), 3);
        assert_eq!(CliError::from(Error::DimensionCap { requested: 9000, cap: 4096 }).exit_code(), 3);
    }
}

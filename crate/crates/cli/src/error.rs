use std::process::ExitCode;

/// Failures mapped onto the documented exit codes.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad input; nothing was run. Exit code 2.
    #[error("{0}")]
    Validation(String),
    /// The optimiser missed its target; results were still written. Exit code 3.
    #[error("{0}")]
    NotConverged(String),
    /// Anything else, such as an unwritable output directory. Exit code 1.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Validation(_) => 2,
            CliError::NotConverged(_) => 3,
            CliError::Runtime(_) => 1,
        })
    }
}

impl From<pulseprep::Error> for CliError {
    fn from(e: pulseprep::Error) -> Self {
        use pulseprep::Error as E;
        match e {
            E::InvalidParameter(_) | E::Parse(_) | E::Dimension(_) | E::NonFinite(_) => {
                CliError::Validation(e.to_string())
            }
            E::NoConvergence(_) => CliError::NotConverged(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

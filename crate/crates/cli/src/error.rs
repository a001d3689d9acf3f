use fgg_experiments::ExpError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration or input files; exit code 1.
    #[error("{0}")]
    Invalid(String),
    /// Some invariant checks failed; exit code 1.
    #[error("{0} check(s) failed")]
    ChecksFailed(usize),
    /// The experiment itself failed; exit code 2.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid(_) | CliError::ChecksFailed(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl From<lorentz_fgg::Error> for CliError {
    fn from(e: lorentz_fgg::Error) -> Self {
        use lorentz_fgg::Error as E;
        match e {
            E::InvalidConfig(_) | E::InvalidCurvature(_) | E::UnsupportedVersion { .. } | E::Corrupt(_) => {
                CliError::Invalid(e.to_string())
            }
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<ExpError> for CliError {
    fn from(e: ExpError) -> Self {
        match e {
            ExpError::InvalidConfig(_) => CliError::Invalid(e.to_string()),
            ExpError::Core(c) => c.into(),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

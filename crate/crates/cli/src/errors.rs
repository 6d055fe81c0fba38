use std::fmt;
use std::process::ExitCode;

/// CLI failure classes with fixed exit codes: 1 usage, 2 data, 3 numeric.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) => ExitCode::from(1),
            CliError::Data(_) => ExitCode::from(2),
            CliError::Numeric(_) => ExitCode::from(3),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<klda::Error> for CliError {
    fn from(e: klda::Error) -> Self {
        CliError::Numeric(e.to_string())
    }
}

/// File-system and parse errors are data errors.
pub fn data_err(context: &str, e: impl fmt::Display) -> CliError {
    CliError::Data(format!("{context}: {e}"))
}

pub type CliResult<T> = Result<T, CliError>;

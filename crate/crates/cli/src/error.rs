use std::process::ExitCode;

/// Failures mapped onto the process exit status: 2 for bad input, 3 for
/// runtime or numeric failures.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Runtime(String),
    #[error(transparent)]
    Core(#[from] tl2_core::Error),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Input(_) => ExitCode::from(2),
            CliError::Core(tl2_core::Error::Unsupported(_)) | CliError::Runtime(_) => ExitCode::from(3),
            CliError::Core(_) => ExitCode::from(2),
        }
    }
}

/// Fail with a runtime error unless every value is finite.
pub fn ensure_finite(what: &str, values: impl IntoIterator<Item = f64>) -> CliResult<()> {
    match values.into_iter().find(|v| !v.is_finite()) {
        Some(v) => Err(CliError::Runtime(format!("{what} produced non-finite value {v}"))),
        None => Ok(()),
    }
}

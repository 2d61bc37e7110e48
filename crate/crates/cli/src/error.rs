use std::fmt;

use ma_lab_core::error::LabError;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, configs or missing parameters; exit code 2.
    Usage(String),
    /// Failure inside a computation; exit code 1.
    Domain(LabError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Domain(_) => 1,
        }
    }

    /// The single line written to stderr.
    pub fn line(&self) -> String {
        match self {
            CliError::Usage(m) => format!("error: {m}"),
            CliError::Domain(e) => {
                serde_json::json!({ "error": e.kind(), "message": e.to_string() }).to_string()
            }
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Domain(e) => write!(f, "{e}"),
        }
    }
}

impl From<LabError> for CliError {
    fn from(e: LabError) -> Self {
        CliError::Domain(e)
    }
}

pub fn missing(flag: &str) -> CliError {
    CliError::Usage(format!("missing required parameter --{flag}"))
}

pub trait Required<T> {
    fn required(self, flag: &str) -> Result<T, CliError>;
}

impl<T> Required<T> for Option<T> {
    fn required(self, flag: &str) -> Result<T, CliError> {
        self.ok_or_else(|| missing(flag))
    }
}

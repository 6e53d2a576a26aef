use std::fmt;

use agingrates_core::Error as CoreError;
use serde::Serialize;

pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_RUNTIME: u8 = 3;

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Runtime(String),
    Core(CoreError),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn is_validation(&self) -> bool {
        match self {
            CliError::Validation(_) => true,
            CliError::Runtime(_) => false,
            CliError::Core(e) => e.is_validation(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        if self.is_validation() {
            EXIT_VALIDATION
        } else {
            EXIT_RUNTIME
        }
    }

    /// Single-line JSON document describing the failure.
    pub fn to_json(&self, command: &str) -> String {
        #[derive(Serialize)]
        struct Doc<'a> {
            error: &'a str,
            command: &'a str,
            exit_code: u8,
            message: String,
        }
        serde_json::to_string(&Doc {
            error: if self.is_validation() { "validation" } else { "runtime" },
            command,
            exit_code: self.exit_code(),
            message: self.to_string(),
        })
        .unwrap_or_else(|_| format!("{{\"error\":\"runtime\",\"message\":{:?}}}", self.to_string()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) | CliError::Runtime(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

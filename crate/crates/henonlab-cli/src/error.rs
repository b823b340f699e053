use serde::Serialize;
use std::fmt;

#[derive(Debug, Clone, Serialize)]
pub struct CliError {
    pub kind: String,
    pub message: String,
}

impl CliError {
    pub fn new(kind: &str, message: impl Into<String>) -> Self {
        CliError { kind: kind.to_string(), message: message.into() }
    }

    pub fn from<E: fmt::Display>(kind: &str, e: E) -> Self {
        CliError::new(kind, e.to_string())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind, self.message)
    }
}

impl std::error::Error for CliError {}

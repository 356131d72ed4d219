use std::fmt;

use memix_core::model::ModelError;
use memix_core::sim::SimError;
use memix_core::trace::TraceError;

/// Process exit codes.
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_IO: u8 = 2;
pub const EXIT_VALIDATION: u8 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub error: anyhow::Error,
}

impl CliError {
    pub fn usage(msg: impl fmt::Display) -> Self {
        Self::new(EXIT_USAGE, anyhow::anyhow!("{msg}"))
    }

    pub fn io(error: impl Into<anyhow::Error>) -> Self {
        Self::new(EXIT_IO, error.into())
    }

    pub fn invalid(msg: impl fmt::Display) -> Self {
        Self::new(EXIT_VALIDATION, anyhow::anyhow!("{msg}"))
    }

    fn new(code: u8, error: anyhow::Error) -> Self {
        Self { code, error }
    }

    pub fn context(self, what: impl fmt::Display) -> Self {
        Self { code: self.code, error: self.error.context(what.to_string()) }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Sources already quoted by their parent's message are skipped.
        let mut shown = String::new();
        for cause in self.error.chain() {
            let msg = cause.to_string();
            if shown.ends_with(&msg) {
                continue;
            }
            if !shown.is_empty() {
                shown.push_str(": ");
            }
            shown.push_str(&msg);
        }
        f.write_str(&shown)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::io(e)
    }
}

impl From<TraceError> for CliError {
    fn from(e: TraceError) -> Self {
        let code = if matches!(e, TraceError::Io(_)) { EXIT_IO } else { EXIT_VALIDATION };
        Self::new(code, e.into())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        let code = if matches!(e, ModelError::Io(_)) { EXIT_IO } else { EXIT_VALIDATION };
        Self::new(code, e.into())
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Model(m) => m.into(),
            other => Self::new(EXIT_VALIDATION, other.into()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::new(EXIT_IO, e.into())
    }
}

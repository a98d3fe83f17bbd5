//! Batch driver behind the `teamtrack` binary. Every command returns a [`Failure`] carrying a stable exit
//! code on error.

pub mod checks;
pub mod commands;
pub mod config;
pub mod table;

use std::fmt;
use std::process::ExitCode;

use teamtrack_core::error::Error as CoreError;

/// Exit status contract: 0 success, 1 I/O, 2 validation, 3 acceptance failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Io = 1,
    Validation = 2,
    Acceptance = 3,
}

#[derive(Debug)]
pub struct Failure {
    pub kind: ExitKind,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn io(error: impl Into<anyhow::Error>) -> Self {
        Failure { kind: ExitKind::Io, error: error.into() }
    }

    pub fn validation(error: impl Into<anyhow::Error>) -> Self {
        Failure { kind: ExitKind::Validation, error: error.into() }
    }

    pub fn acceptance(error: impl Into<anyhow::Error>) -> Self {
        Failure { kind: ExitKind::Acceptance, error: error.into() }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.kind as u8)
    }

    /// Prefix the message while keeping the exit kind.
    pub fn context(self, msg: impl fmt::Display + Send + Sync + 'static) -> Self {
        Failure { kind: self.kind, error: self.error.context(msg) }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

/// File-system failures map to exit 1; everything else is a validation error.
impl From<CoreError> for Failure {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Io { .. } | CoreError::MissingDirectory(_) => Failure::io(e),
            _ => Failure::validation(e),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, Failure>;

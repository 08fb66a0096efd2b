use std::process::ExitCode;

use thiserror::Error;
use weatlab::sim::SimError;
use weatlab::{AuditError, LexiconError, ParseError};

#[derive(Debug, Error)]
pub enum CliError {
    /// Missing, unreadable or malformed input.
    #[error("{0}")]
    Input(String),
    /// Well-formed input that violates a constraint.
    #[error("{0}")]
    Validation(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            Self::Input(_) => 1,
            Self::Validation(_) => 2,
            Self::Internal(_) => 3,
        })
    }

    pub fn lexicon(context: &str, e: LexiconError) -> Self {
        let msg = format!("{context}: {e}");
        match e {
            LexiconError::Io(_) | LexiconError::Syntax { .. } => Self::Input(msg),
            LexiconError::Schema { .. } | LexiconError::Validation(_) => Self::Validation(msg),
        }
    }

    pub fn table(context: &str, e: ParseError) -> Self {
        Self::Input(format!("{context}: {e}"))
    }
}

impl From<AuditError> for CliError {
    fn from(e: AuditError) -> Self {
        match e {
            AuditError::Table { path, source } => Self::table(&path.display().to_string(), source),
            AuditError::Lexicon { path, source } => {
                Self::lexicon(&path.display().to_string(), source)
            }
            AuditError::LexiconInvalid(source) => Self::lexicon("lexicon", source),
            AuditError::Config(msg) => Self::Validation(msg),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        Self::Validation(e.to_string())
    }
}

impl From<weatlab::report::RenderError> for CliError {
    fn from(e: weatlab::report::RenderError) -> Self {
        Self::Internal(e.to_string())
    }
}

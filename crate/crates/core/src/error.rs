use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the toolkit can report.
///
/// Variants are grouped by the exit-status family the command-line front end
/// maps them to: input problems, transport problems, and numeric or search
/// problems.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {what}: {reason}")]
    Validation { what: String, reason: String },

    #[error("format error{}: {reason}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Format { line: Option<usize>, reason: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("transport error: {0}")]
    Transport(String),

    #[error("segmentation error: {0}")]
    Segmentation(String),

    #[error("degenerate input: {0}")]
    Degeneracy(String),

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("fitting error: {0}")]
    Fitting(String),

    #[error("search error: {0}")]
    Search(String),
}

impl Error {
    pub(crate) fn validation(what: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation { what: what.into(), reason: reason.into() }
    }

    pub(crate) fn format(line: Option<usize>, reason: impl Into<String>) -> Self {
        Error::Format { line, reason: reason.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// True for errors caused by bad input files or configuration.
    pub fn is_input_error(&self) -> bool {
        matches!(self, Error::Validation { .. } | Error::Format { .. } | Error::Config(_) | Error::Io { .. })
    }

    pub fn is_transport_error(&self) -> bool {
        matches!(self, Error::Transport(_))
    }
}

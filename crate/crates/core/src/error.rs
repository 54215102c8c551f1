use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the crate.
///
/// Each variant maps onto one of the CLI exit categories through
/// [`Error::category`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error in {op}: {detail}")]
    Dimension { op: String, detail: String },

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("invalid configuration field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("validation failed for {} row(s): {}", .rows.len(), format_rows(.rows))]
    Validation { rows: Vec<RowIssue> },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("training diverged at epoch {epoch} (last finite loss {last_finite_loss:?})")]
    Divergence {
        epoch: usize,
        last_finite_loss: Option<f64>,
    },

    #[error("file not found: {}", .0.display())]
    NotFound(PathBuf),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// A single offending input row, with its 1-based line number in the source file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowIssue {
    pub line: usize,
    pub reason: String,
}

fn format_rows(rows: &[RowIssue]) -> String {
    rows.iter()
        .map(|r| format!("line {}: {}", r.line, r.reason))
        .collect::<Vec<_>>()
        .join("; ")
}

/// Coarse error classes used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Usage,
    Data,
    Divergence,
    Internal,
}

impl ErrorCategory {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Usage => 1,
            ErrorCategory::Data => 2,
            ErrorCategory::Divergence => 3,
            ErrorCategory::Internal => 4,
        }
    }
}

impl Error {
    pub(crate) fn dim(op: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Dimension {
            op: op.into(),
            detail: detail.into(),
        }
    }

    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Config { .. } | Error::Contract(_) => ErrorCategory::Usage,
            Error::Parse { .. }
            | Error::Validation { .. }
            | Error::EmptyInput(_)
            | Error::Domain(_)
            | Error::NotFound(_)
            | Error::Checkpoint(_)
            | Error::Csv(_) => ErrorCategory::Data,
            Error::Divergence { .. } => ErrorCategory::Divergence,
            Error::Dimension { .. } | Error::Io(_) | Error::Json(_) => ErrorCategory::Internal,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

//! Crate-wide error types.

use thiserror::Error;

/// A single configuration problem, tied to the field that caused it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationIssue {
    /// Dotted path to the offending field, e.g. `ifat.lut[3].dst`.
    pub path: String,
    pub message: String,
}

impl ValidationIssue {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl std::fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    /// One or more configuration fields failed validation. Collects every
    /// problem found, not just the first.
    #[error("configuration invalid ({} issue(s)):\n{}", .0.len(), format_issues(.0))]
    Validation(Vec<ValidationIssue>),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("numerical overflow in `{variable}`: value became non-finite")]
    Numerics { variable: &'static str },

    #[error("event stream not sorted by tick (event #{index} at tick {tick} after tick {prev})")]
    UnsortedEvents { index: usize, tick: u64, prev: u64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("singular resistive network: {0}")]
    SingularSystem(String),

    #[error("config parse error: {0}")]
    ConfigParse(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn validation_one(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation(vec![ValidationIssue::new(path, message)])
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

fn format_issues(issues: &[ValidationIssue]) -> String {
    issues
        .iter()
        .map(|i| format!("  - {i}"))
        .collect::<Vec<_>>()
        .join("\n")
}

pub type Result<T> = std::result::Result<T, Error>;

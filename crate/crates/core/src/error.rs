use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

/// A single validation finding, located by a JSON-path-like string.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Issue {
    pub severity: Severity,
    pub at: String,
    pub message: String,
}

impl Issue {
    pub fn error(at: impl Into<String>, message: impl Into<String>) -> Self {
        Issue {
            severity: Severity::Error,
            at: at.into(),
            message: message.into(),
        }
    }

    pub fn warning(at: impl Into<String>, message: impl Into<String>) -> Self {
        Issue {
            severity: Severity::Warning,
            at: at.into(),
            message: message.into(),
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        if self.at.is_empty() {
            write!(f, "{tag}: {}", self.message)
        } else {
            write!(f, "{tag}: {}: {}", self.at, self.message)
        }
    }
}

pub(crate) fn join_issues(issues: &[Issue]) -> String {
    issues
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

/// Failure to load or validate one of the input files.
#[derive(Debug, Error)]
pub enum InputError {
    #[error("failed to read {}: {cause}", path.display())]
    Io {
        path: PathBuf,
        cause: std::io::Error,
    },
    #[error("{}: schema violation at `{at}`: {message}", path.display())]
    Schema {
        path: PathBuf,
        at: String,
        message: String,
    },
    #[error("{}: {}", path.display(), join_issues(.issues))]
    Invalid { path: PathBuf, issues: Vec<Issue> },
}

impl InputError {
    /// Validation-class failures (as opposed to I/O) map to exit code 2.
    pub fn is_validation(&self) -> bool {
        !matches!(self, InputError::Io { .. })
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("no global prototypes")]
    NoGlobalPrototypes,
    #[error("empty test split")]
    EmptyTestSplit,
    #[error("empty train split")]
    EmptyTrainSplit,
    #[error("no localizable instances")]
    NoLocalizableInstances,
    #[error("total category count is zero")]
    ZeroTotalCategories,
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("unknown category level `{0}`")]
    UnknownLevel(String),
    #[error("reports were produced with different configs (fields: {})", .0.join(", "))]
    MixedConfigs(Vec<String>),
    #[error("nothing to aggregate")]
    NoReports,
}

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("infeasible synthetic spec ({}): {message}", fields.join(", "))]
    Infeasible {
        fields: Vec<&'static str>,
        message: String,
    },
    #[error("instance too large for brute-force recomputation: {0}")]
    TooLarge(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

impl SynthError {
    pub(crate) fn infeasible(fields: &[&'static str], message: impl Into<String>) -> Self {
        SynthError::Infeasible {
            fields: fields.to_vec(),
            message: message.into(),
        }
    }
}

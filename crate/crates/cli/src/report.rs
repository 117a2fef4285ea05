use std::path::Path;

use pefcoh_core::io::read_json;
use pefcoh_core::metrics::{Aggregate, Evaluation};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const REPORT_FORMAT: &str = "pefcoh-report/1";
pub const AGGREGATE_FORMAT: &str = "pefcoh-aggregate/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Inputs {
    pub dump: String,
    pub annotations: String,
    /// `None` when the lexicon was derived from the annotations.
    pub lexicon: Option<String>,
}

/// One evaluated dump.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub format: String,
    pub generated_at: String,
    pub tool_version: String,
    pub model_name: String,
    pub seed: u64,
    pub inputs: Inputs,
    #[serde(flatten)]
    pub evaluation: Evaluation,
}

/// Mean ± std over the reports of one `evaluate` invocation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateFile {
    pub format: String,
    pub generated_at: String,
    pub tool_version: String,
    pub model_names: Vec<String>,
    pub reports: Vec<String>,
    #[serde(flatten)]
    pub aggregate: Aggregate,
}

pub enum Loaded {
    Report(Box<Report>),
    Aggregate(Box<AggregateFile>),
}

#[derive(Deserialize)]
struct Header {
    format: String,
}

pub fn load(path: &Path) -> Result<Loaded, CliError> {
    let header: Header = read_json(path)?;
    Ok(match header.format.as_str() {
        REPORT_FORMAT => Loaded::Report(Box::new(read_json(path)?)),
        AGGREGATE_FORMAT => Loaded::Aggregate(Box::new(read_json(path)?)),
        other => {
            return Err(CliError::Invalid(format!(
                "{}: unsupported format \"{other}\" (expected \"{REPORT_FORMAT}\" or \"{AGGREGATE_FORMAT}\")",
                path.display()
            )))
        }
    })
}

pub fn tool_version() -> String {
    format!("pefcoh {}", env!("CARGO_PKG_VERSION"))
}

//! Command-line front end: validate inputs, evaluate dumps, compare models
//! and generate synthetic instances.

pub mod args;
pub mod commands;
pub mod report;
pub mod table;

use pefcoh_core::{InputError, MetricError, SynthError};

use args::{Cli, Command};

/// Failure of one command. Validation failures exit with 2, everything
/// else with 1.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error("{0:#}")]
    Runtime(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<InputError> for CliError {
    fn from(e: InputError) -> Self {
        if e.is_validation() {
            CliError::Invalid(e.to_string())
        } else {
            CliError::Runtime(e.into())
        }
    }
}

impl From<MetricError> for CliError {
    fn from(e: MetricError) -> Self {
        match e {
            MetricError::MixedConfigs(_) | MetricError::InvalidConfig(_) | MetricError::UnknownLevel(_) => {
                CliError::Invalid(e.to_string())
            }
            other => CliError::Runtime(other.into()),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::Infeasible { .. } => CliError::Invalid(e.to_string()),
            SynthError::Metric(m) => m.into(),
            other => CliError::Runtime(other.into()),
        }
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Validate(a) => commands::validate(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Compare(a) => commands::compare(a),
        Command::Synth(a) => commands::synth(a),
    }
}

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pefcoh_core::metrics::{LpClass, RunConfig, TcScope};

pub const EPOCH: &str = "1970-01-01T00:00:00Z";

#[derive(Debug, Parser)]
#[command(name = "pefcoh", version, about = "Evaluate prototype-based classifiers from evidence dumps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and cross-check dumps against annotations.
    Validate(InputArgs),
    /// Score one or more dumps and aggregate them as seed runs.
    Evaluate(EvaluateArgs),
    /// Build a comparison table from report or aggregate files.
    Compare(CompareArgs),
    /// Generate a synthetic instance with a ground-truth ledger.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    #[arg(long, num_args = 1.., required = true)]
    pub dump: Vec<PathBuf>,
    #[arg(long)]
    pub annotations: PathBuf,
    /// Lexicon file; derived from the annotations when omitted.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Markdown,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Extra output formats; JSON reports are always written.
    #[arg(long = "format", value_enum)]
    pub formats: Vec<Format>,
    /// Stamp outputs with a fixed time (default: the Unix epoch).
    #[arg(long, num_args = 0..=1, default_missing_value = EPOCH, value_name = "RFC3339")]
    pub fixed_timestamp: Option<String>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value_t = pefcoh_core::metrics::DEFAULT_K)]
    pub k: usize,
    #[arg(long, default_value_t = pefcoh_core::metrics::DEFAULT_PATCH_SIZE)]
    pub patch_size: u32,
    #[arg(long, default_value_t = pefcoh_core::metrics::DEFAULT_EPS)]
    pub eps: f64,
    /// Specialization levels, e.g. `type,mass/shape`. Default: all but combined.
    #[arg(long, value_delimiter = ',')]
    pub levels: Vec<String>,
    #[arg(long, default_value = "combined")]
    pub class_specific_level: String,
    /// Total category count for coverage, instead of counting annotations.
    #[arg(long)]
    pub tc: Option<usize>,
    #[arg(long, value_enum, default_value_t = TcScopeArg::All)]
    pub tc_scope: TcScopeArg,
    #[arg(long, value_enum, default_value_t = LpClassArg::GroundTruth)]
    pub lp_class: LpClassArg,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TcScopeArg {
    All,
    Train,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LpClassArg {
    GroundTruth,
    Predicted,
}

impl EvaluateArgs {
    pub fn config(&self) -> RunConfig {
        RunConfig {
            k: self.k,
            patch_size: self.patch_size,
            eps: self.eps,
            levels: self.levels.clone(),
            class_specific_level: self.class_specific_level.clone(),
            tc_override: self.tc,
            tc_scope: match self.tc_scope {
                TcScopeArg::All => TcScope::All,
                TcScopeArg::Train => TcScope::Train,
            },
            lp_class: match self.lp_class {
                LpClassArg::GroundTruth => LpClass::GroundTruth,
                LpClassArg::Predicted => LpClass::Predicted,
            },
        }
    }
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Report files (grouped into models by model name) or aggregate files.
    #[arg(required = true)]
    pub reports: Vec<PathBuf>,
    /// Output directory; the Markdown table goes to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Formats to write under `--out` (default: markdown and csv).
    #[arg(long = "format", value_enum)]
    pub formats: Vec<Format>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Spec file; the built-in default spec when omitted.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the spec's `rng_seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the spec's `model_name`.
    #[arg(long)]
    pub model_name: Option<String>,
}

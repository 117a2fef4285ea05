//! Synthetic instances with planted ground truth, and a brute-force
//! recomputation of every property for cross-checking.

mod generate;
mod oracle;
mod spec;

pub use generate::{generate, ExpectedVerdict, GroundTruthLedger, SynthInstance, LEDGER_FORMAT};
pub use oracle::{brute_force_scores, ORACLE_MAX_IMAGES, ORACLE_MAX_PROTOTYPES, ORACLE_MAX_SIDE};
pub use spec::{SynthSpec, SYNTH_SPEC_FORMAT};

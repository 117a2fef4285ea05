//! Quantitative evaluation of the prototypes learned by prototype-based
//! image classifiers.
//!
//! A model run is seen only through an [`EvidenceDump`]: its prototypes,
//! their classification weights, and where each prototype fires most on
//! each image. Ground truth comes from an [`AnnotationSet`] of ROI boxes
//! labelled with categories from a hierarchical [`Lexicon`].
//! [`metrics::evaluate`] turns the three into the seven property scores;
//! [`synth`] builds instances with known answers and a brute-force oracle.

pub mod annotations;
pub mod dump;
pub mod error;
pub mod geometry;
pub mod io;
pub mod lexicon;
pub mod metrics;
pub mod synth;

pub use annotations::{AnnotatedImage, AnnotationSet, RoiAnnotation};
pub use dump::{cross_validate, EvidenceDump, Split};
pub use error::{InputError, Issue, MetricError, Severity, SynthError};
pub use lexicon::{derive_category_universe, CategoryId, CategoryUniverse, Level, Lexicon};
pub use metrics::{evaluate, Evaluation, PropertyScores, RunConfig};

//! The seven prototype-quality properties.
//!
//! | Property | Scope | Measure |
//! |----------|-------|---------|
//! | Compactness | global / local | GP, LP (positive, negative), sparsity |
//! | Relevance | global | \|RP\| / GP |
//! | Specialization | global | mean purity over RP, per category level |
//! | Uniqueness | global | UC / \|RP\| |
//! | Coverage | global | UC / TC |
//! | Localization | local | mean IoU and DSC over test images |
//! | Class-specific | global | mean alignment of weights with category majority class |
//!
//! Everything is computed from an [`EvidenceDump`](crate::dump::EvidenceDump),
//! an [`AnnotationSet`](crate::annotations::AnnotationSet) and a
//! [`Lexicon`](crate::lexicon::Lexicon) by [`evaluate`].

mod aggregate;
mod coherence;
mod compactness;
mod evaluate;
mod evidence;
mod localization;

pub use aggregate::{aggregate, Aggregate, Stat};
pub use coherence::{
    class_specific, coverage, relevance, specialization, unique_categories, uniqueness,
    ClassSpecificOutcome,
};
pub use compactness::{global_prototypes, is_global, local_prototypes};
pub use evaluate::{evaluate, Evaluation};
pub use evidence::{build_verdicts, top_k_evidence, EvidenceItem, MatchedRoi, TopKEvidence};
pub use localization::{localization, LocalizationRow};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::MetricError;
use crate::lexicon::{Level, Lexicon};

pub const DEFAULT_K: usize = 10;
pub const DEFAULT_PATCH_SIZE: u32 = 130;
pub const DEFAULT_EPS: f64 = 1e-8;
/// The middle localization variant always takes ten prototypes,
/// independent of `k`.
pub const LOCALIZATION_TOP_N: usize = 10;

/// Which split's annotations define the category universe (TC).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TcScope {
    #[default]
    All,
    Train,
}

/// Which class weight signs a local prototype's contribution.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpClass {
    #[default]
    GroundTruth,
    /// The arg-max class of the summed contributions.
    Predicted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub k: usize,
    pub patch_size: u32,
    pub eps: f64,
    /// Specialization levels to report. Empty means "every level except
    /// combined"; [`RunConfig::resolve`] expands it.
    pub levels: Vec<String>,
    pub class_specific_level: String,
    pub tc_override: Option<usize>,
    pub tc_scope: TcScope,
    pub lp_class: LpClass,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            k: DEFAULT_K,
            patch_size: DEFAULT_PATCH_SIZE,
            eps: DEFAULT_EPS,
            levels: Vec::new(),
            class_specific_level: Level::Combined.to_string(),
            tc_override: None,
            tc_scope: TcScope::All,
            lp_class: LpClass::GroundTruth,
        }
    }
}

impl RunConfig {
    pub fn check(&self) -> Result<(), MetricError> {
        if self.k == 0 {
            return Err(MetricError::InvalidConfig("k must be >= 1".into()));
        }
        if self.patch_size == 0 {
            return Err(MetricError::InvalidConfig("patch_size must be >= 1".into()));
        }
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return Err(MetricError::InvalidConfig("eps must be finite and >= 0".into()));
        }
        if self.tc_override == Some(0) {
            return Err(MetricError::ZeroTotalCategories);
        }
        Ok(())
    }

    /// Expand defaults against a lexicon and canonicalize level names, so
    /// the echoed config names every level actually used.
    pub fn resolve(&self, lexicon: &Lexicon) -> Result<RunConfig, MetricError> {
        self.check()?;
        let levels = if self.levels.is_empty() {
            lexicon.default_report_levels()
        } else {
            self.levels
                .iter()
                .map(|l| lexicon.resolve_level(l))
                .collect::<Result<_, _>>()?
        };
        let class_level = lexicon.resolve_level(&self.class_specific_level)?;
        Ok(RunConfig {
            levels: levels.iter().map(ToString::to_string).collect(),
            class_specific_level: class_level.to_string(),
            ..self.clone()
        })
    }

    /// Names of fields that differ between two configs.
    pub fn diff(&self, other: &RunConfig) -> Vec<String> {
        let mut fields = Vec::new();
        if self.k != other.k {
            fields.push("k");
        }
        if self.patch_size != other.patch_size {
            fields.push("patch_size");
        }
        if self.eps.to_bits() != other.eps.to_bits() {
            fields.push("eps");
        }
        if self.levels != other.levels {
            fields.push("levels");
        }
        if self.class_specific_level != other.class_specific_level {
            fields.push("class_specific_level");
        }
        if self.tc_override != other.tc_override {
            fields.push("tc_override");
        }
        if self.tc_scope != other.tc_scope {
            fields.push("tc_scope");
        }
        if self.lp_class != other.lp_class {
            fields.push("lp_class");
        }
        fields.into_iter().map(String::from).collect()
    }
}

/// Purity of one prototype at one category level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelPurity {
    /// Majority category; `None` when no top-k patch has a category here.
    pub category: Option<String>,
    /// Top-k patches matched to `category`.
    pub count: usize,
    /// `count / k`.
    pub purity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrototypeVerdict {
    pub prototype_id: String,
    pub is_global: bool,
    pub is_relevant: bool,
    /// Number of top-k patches that contain an ROI center.
    pub matched: usize,
    pub purity_per_level: IndexMap<String, LevelPurity>,
    pub combined_category: Option<String>,
    /// Category used for class-specificity (at the configured level).
    pub class_category: Option<String>,
    pub align: Option<u8>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IouDsc {
    pub iou: f64,
    pub dsc: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LocalizationScores {
    pub top1: IouDsc,
    pub top10: IouDsc,
    pub all: IouDsc,
    /// Test images with at least one ROI.
    pub instances: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyScores {
    pub total_prototypes: usize,
    pub gp: usize,
    pub lp_positive: f64,
    pub lp_negative: f64,
    pub sparsity_ratio: f64,
    pub relevant_prototypes: usize,
    pub relevance: f64,
    pub specialization_per_level: IndexMap<String, Option<f64>>,
    pub unique_categories: usize,
    pub total_categories: usize,
    pub uniqueness: Option<f64>,
    pub coverage: f64,
    pub class_specific: Option<f64>,
    /// Relevant prototypes that passed the both-classes filter.
    pub class_specific_support: usize,
    pub localization: LocalizationScores,
}

impl PropertyScores {
    /// Flat `key -> value` view used by aggregation and tables. Key order is
    /// fixed: compactness, relevance, specialization levels, uniqueness,
    /// coverage, class-specific, localization.
    pub fn flatten(&self) -> IndexMap<String, Option<f64>> {
        let mut out = IndexMap::new();
        out.insert("compactness.global".into(), Some(self.gp as f64));
        out.insert("compactness.local.positive".into(), Some(self.lp_positive));
        out.insert("compactness.local.negative".into(), Some(self.lp_negative));
        out.insert("compactness.sparsity".into(), Some(self.sparsity_ratio));
        out.insert("relevance".into(), Some(self.relevance));
        for (level, v) in &self.specialization_per_level {
            out.insert(format!("specialization.{level}"), *v);
        }
        out.insert("uniqueness".into(), self.uniqueness);
        out.insert("coverage".into(), Some(self.coverage));
        out.insert("class_specific".into(), self.class_specific);
        let loc = &self.localization;
        for (name, v) in [("top1", loc.top1), ("top10", loc.top10), ("all", loc.all)] {
            out.insert(format!("localization.iou.{name}"), Some(v.iou));
        }
        for (name, v) in [("top1", loc.top1), ("top10", loc.top10), ("all", loc.all)] {
            out.insert(format!("localization.dsc.{name}"), Some(v.dsc));
        }
        out.insert("counts.relevant".into(), Some(self.relevant_prototypes as f64));
        out.insert("counts.unique_categories".into(), Some(self.unique_categories as f64));
        out.insert("counts.total_categories".into(), Some(self.total_categories as f64));
        out
    }
}

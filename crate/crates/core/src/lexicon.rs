//! Category hierarchy: abnormality types, their descriptor axes, and the
//! category levels derived from them.
//!
//! Levels are named `type`, `<type>/<axis>` (one per declared axis) and
//! `combined`. Category values are canonical lowercase text; the combined
//! value joins the type and every axis value in declared order with `-`,
//! e.g. `mass-oval-circumscribed`. A missing descriptor value is `na`.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::annotations::{AnnotationSet, RoiAnnotation};
use crate::dump::Split;
use crate::error::{InputError, Issue, MetricError};
use crate::io::{check_format, into_result, read_json};

pub const LEXICON_FORMAT: &str = "pefcoh-lex/1";

/// Token used for a descriptor axis the annotation leaves empty.
pub const MISSING_VALUE: &str = "na";

/// Lowercase, trimmed, inner whitespace collapsed to `_`.
pub fn canonical(raw: &str) -> String {
    raw.split_whitespace()
        .collect::<Vec<_>>()
        .join("_")
        .to_lowercase()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbnormalityType {
    pub name: String,
    pub axes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lexicon {
    pub format: String,
    pub types: Vec<AbnormalityType>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Level {
    Type,
    Axis { type_name: String, axis: String },
    Combined,
}

impl Level {
    pub fn axis(type_name: &str, axis: &str) -> Self {
        Level::Axis {
            type_name: type_name.to_string(),
            axis: axis.to_string(),
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Level::Type => f.write_str("type"),
            Level::Axis { type_name, axis } => write!(f, "{type_name}/{axis}"),
            Level::Combined => f.write_str("combined"),
        }
    }
}

impl FromStr for Level {
    type Err = MetricError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "type" => Ok(Level::Type),
            "combined" => Ok(Level::Combined),
            other => match other.split_once('/') {
                Some((t, a)) if !t.is_empty() && !a.is_empty() => {
                    Ok(Level::axis(&canonical(t), &canonical(a)))
                }
                _ => Err(MetricError::UnknownLevel(other.to_string())),
            },
        }
    }
}

impl Serialize for Level {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Level {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A category at one level, e.g. (`mass/shape`, `oval`).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CategoryId {
    pub level: Level,
    pub value: String,
}

impl Lexicon {
    pub fn new(types: Vec<AbnormalityType>) -> Self {
        Lexicon {
            format: LEXICON_FORMAT.to_string(),
            types: types
                .into_iter()
                .map(|t| AbnormalityType {
                    name: canonical(&t.name),
                    axes: t.axes.iter().map(|a| canonical(a)).collect(),
                })
                .collect(),
        }
    }

    /// Mass (shape, margin) and calcification (morphology, distribution).
    pub fn birads() -> Self {
        Lexicon::new(vec![
            AbnormalityType {
                name: "mass".into(),
                axes: vec!["shape".into(), "margin".into()],
            },
            AbnormalityType {
                name: "calcification".into(),
                axes: vec!["morphology".into(), "distribution".into()],
            },
        ])
    }

    pub fn parse(path: &Path) -> Result<Self, InputError> {
        let raw: Lexicon = read_json(path)?;
        let lexicon = Lexicon::new(raw.types);
        let mut issues = Vec::new();
        check_format(&raw.format, LEXICON_FORMAT, &mut issues);
        issues.extend(lexicon.validate());
        into_result(path, issues)?;
        Ok(lexicon)
    }

    pub fn validate(&self) -> Vec<Issue> {
        let mut issues = Vec::new();
        let mut names = HashSet::new();
        for (i, t) in self.types.iter().enumerate() {
            if t.name.is_empty() {
                issues.push(Issue::error(format!("types[{i}].name"), "empty type name"));
            }
            if !names.insert(t.name.as_str()) {
                issues.push(Issue::error(
                    format!("types[{i}].name"),
                    format!("duplicate type `{}`", t.name),
                ));
            }
            let mut axes = HashSet::new();
            for (j, a) in t.axes.iter().enumerate() {
                if a.is_empty() || a.contains('/') {
                    issues.push(Issue::error(
                        format!("types[{i}].axes[{j}]"),
                        format!("invalid axis name `{a}`"),
                    ));
                }
                if !axes.insert(a.as_str()) {
                    issues.push(Issue::error(
                        format!("types[{i}].axes[{j}]"),
                        format!("duplicate axis `{a}` for type `{}`", t.name),
                    ));
                }
            }
        }
        issues
    }

    /// Lexicon implied by the descriptor keys of an annotation set: types
    /// and axes in first-seen order.
    pub fn derive(annotations: &AnnotationSet) -> Self {
        let mut types: Vec<AbnormalityType> = Vec::new();
        for roi in annotations.images.iter().flat_map(|im| im.rois.iter()) {
            let name = canonical(&roi.abnormality_type);
            let idx = match types.iter().position(|t| t.name == name) {
                Some(idx) => idx,
                None => {
                    types.push(AbnormalityType {
                        name,
                        axes: Vec::new(),
                    });
                    types.len() - 1
                }
            };
            for key in roi.descriptors.keys() {
                let axis = canonical(key);
                if !types[idx].axes.contains(&axis) {
                    types[idx].axes.push(axis);
                }
            }
        }
        Lexicon::new(types)
    }

    pub fn find_type(&self, name: &str) -> Option<&AbnormalityType> {
        let name = canonical(name);
        self.types.iter().find(|t| t.name == name)
    }

    /// Every level: type, each (type, axis) in declared order, combined.
    pub fn levels(&self) -> Vec<Level> {
        let mut levels = vec![Level::Type];
        for t in &self.types {
            levels.extend(t.axes.iter().map(|a| Level::axis(&t.name, a)));
        }
        levels.push(Level::Combined);
        levels
    }

    /// Levels reported for specialization by default (everything except
    /// the combined level).
    pub fn default_report_levels(&self) -> Vec<Level> {
        self.levels()
            .into_iter()
            .filter(|l| *l != Level::Combined)
            .collect()
    }

    pub fn has_level(&self, level: &Level) -> bool {
        match level {
            Level::Type | Level::Combined => true,
            Level::Axis { type_name, axis } => self
                .types
                .iter()
                .any(|t| &t.name == type_name && t.axes.contains(axis)),
        }
    }

    pub fn resolve_level(&self, name: &str) -> Result<Level, MetricError> {
        let level: Level = name.parse()?;
        if self.has_level(&level) {
            Ok(level)
        } else {
            Err(MetricError::UnknownLevel(name.to_string()))
        }
    }

    /// The category an ROI belongs to at `level`, or `None` when the level
    /// is specific to another abnormality type.
    pub fn category(&self, roi: &RoiAnnotation, level: &Level) -> Option<CategoryId> {
        let type_name = canonical(&roi.abnormality_type);
        let value = match level {
            Level::Type => type_name,
            Level::Axis { type_name: t, axis } => {
                if *t != type_name {
                    return None;
                }
                descriptor_value(roi, axis)
            }
            Level::Combined => {
                let mut parts = vec![type_name.clone()];
                if let Some(t) = self.types.iter().find(|t| t.name == type_name) {
                    parts.extend(t.axes.iter().map(|a| descriptor_value(roi, a)));
                }
                parts.join("-")
            }
        };
        Some(CategoryId {
            level: level.clone(),
            value,
        })
    }
}

fn descriptor_value(roi: &RoiAnnotation, axis: &str) -> String {
    roi.descriptors
        .iter()
        .find(|(k, _)| canonical(k) == axis)
        .and_then(|(_, v)| v.as_deref())
        .map(canonical)
        .filter(|v| !v.is_empty())
        .unwrap_or_else(|| MISSING_VALUE.to_string())
}

/// Distinct categories observed at one level, with ROI counts per class.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CategoryUniverse {
    pub level: Level,
    pub counts: BTreeMap<String, Vec<usize>>,
}

impl CategoryUniverse {
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Number of classes with at least one ROI of this category.
    pub fn classes_present(&self, value: &str) -> usize {
        self.counts
            .get(value)
            .map_or(0, |c| c.iter().filter(|&&n| n > 0).count())
    }

    /// Strict majority class; `None` for unknown categories or tied maxima.
    pub fn majority_class(&self, value: &str) -> Option<usize> {
        let counts = self.counts.get(value)?;
        let max = *counts.iter().max()?;
        let mut winners = counts.iter().enumerate().filter(|(_, &n)| n == max);
        let (idx, _) = winners.next()?;
        if winners.next().is_some() {
            None
        } else {
            Some(idx)
        }
    }
}

/// Distinct categories at `level` across the annotation set (optionally one
/// split only) with per-class ROI counts.
pub fn derive_category_universe(
    annotations: &AnnotationSet,
    lexicon: &Lexicon,
    level: &Level,
    split: Option<Split>,
) -> CategoryUniverse {
    let n_classes = annotations.class_names.len();
    let mut counts: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for image in &annotations.images {
        if split.is_some_and(|s| s != image.split) {
            continue;
        }
        for roi in &image.rois {
            if let Some(cat) = lexicon.category(roi, level) {
                let row = counts
                    .entry(cat.value)
                    .or_insert_with(|| vec![0; n_classes]);
                if let Some(slot) = row.get_mut(roi.roi_class) {
                    *slot += 1;
                }
            }
        }
    }
    CategoryUniverse {
        level: level.clone(),
        counts,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotations::AnnotatedImage;
    use indexmap::IndexMap;

    fn roi(t: &str, desc: &[(&str, Option<&str>)], class: usize) -> RoiAnnotation {
        RoiAnnotation {
            bbox: [0, 0, 10, 10],
            abnormality_type: t.into(),
            descriptors: desc
                .iter()
                .map(|(k, v)| (k.to_string(), v.map(str::to_string)))
                .collect::<IndexMap<_, _>>(),
            roi_class: class,
        }
    }

    fn set(rois: Vec<RoiAnnotation>) -> AnnotationSet {
        AnnotationSet::new(
            vec!["benign".into(), "malignant".into()],
            vec![AnnotatedImage {
                image_id: "a".into(),
                width: 100,
                height: 100,
                split: Split::Train,
                class_label: 0,
                rois,
            }],
        )
    }

    #[test]
    fn combined_category_follows_axis_order() {
        let lex = Lexicon::birads();
        let r = roi(
            "Mass",
            &[("margin", Some("CIRCUMSCRIBED")), ("shape", Some("Oval"))],
            1,
        );
        let cat = lex.category(&r, &Level::Combined).unwrap();
        assert_eq!(cat.value, "mass-oval-circumscribed");
        let shape = lex.category(&r, &Level::axis("mass", "shape")).unwrap();
        assert_eq!(shape.value, "oval");
        assert!(lex
            .category(&r, &Level::axis("calcification", "morphology"))
            .is_none());
    }

    #[test]
    fn missing_descriptor_is_na() {
        let lex = Lexicon::birads();
        let r = roi("mass", &[("shape", Some("oval")), ("margin", None)], 0);
        assert_eq!(
            lex.category(&r, &Level::Combined).unwrap().value,
            "mass-oval-na"
        );
        let r = roi("mass", &[("shape", Some("oval"))], 0);
        assert_eq!(
            lex.category(&r, &Level::Combined).unwrap().value,
            "mass-oval-na"
        );
    }

    #[test]
    fn canonical_is_idempotent() {
        for s in ["  Ill Defined ", "ROUND_AND_REGULAR", "a-b", ""] {
            assert_eq!(canonical(&canonical(s)), canonical(s));
        }
        assert_eq!(canonical("  Ill Defined "), "ill_defined");
    }

    #[test]
    fn level_names_round_trip() {
        let lex = Lexicon::birads();
        for level in lex.levels() {
            assert_eq!(level.to_string().parse::<Level>().unwrap(), level);
        }
        assert_eq!(
            lex.levels().iter().map(ToString::to_string).collect::<Vec<_>>(),
            [
                "type",
                "mass/shape",
                "mass/margin",
                "calcification/morphology",
                "calcification/distribution",
                "combined"
            ]
        );
        assert!(lex.resolve_level("mass/color").is_err());
        assert!("nonsense".parse::<Level>().is_err());
    }

    #[test]
    fn identical_rois_collapse_into_one_category() {
        let lex = Lexicon::birads();
        let a = roi("mass", &[("shape", Some("oval")), ("margin", Some("obscured"))], 0);
        let ann = set(vec![a.clone(), a]);
        let u = derive_category_universe(&ann, &lex, &Level::Combined, None);
        assert_eq!(u.len(), 1);
        assert_eq!(u.counts["mass-oval-obscured"], vec![2, 0]);
    }

    #[test]
    fn type_specific_levels_skip_other_types() {
        let lex = Lexicon::birads();
        let ann = set(vec![
            roi("mass", &[("shape", Some("oval")), ("margin", Some("obscured"))], 0),
            roi(
                "calcification",
                &[("morphology", Some("punctate")), ("distribution", Some("linear"))],
                1,
            ),
        ]);
        let shape = derive_category_universe(&ann, &lex, &Level::axis("mass", "shape"), None);
        assert_eq!(shape.len(), 1);
        let types = derive_category_universe(&ann, &lex, &Level::Type, None);
        let combined = derive_category_universe(&ann, &lex, &Level::Combined, None);
        assert!(types.len() <= combined.len());
        assert!(derive_category_universe(&ann, &lex, &Level::Type, Some(Split::Test)).is_empty());
    }

    #[test]
    fn majority_requires_strict_winner() {
        let mut counts = BTreeMap::new();
        counts.insert("x".to_string(), vec![1, 3]);
        counts.insert("tie".to_string(), vec![2, 2]);
        counts.insert("pure".to_string(), vec![0, 4]);
        let u = CategoryUniverse {
            level: Level::Combined,
            counts,
        };
        assert_eq!(u.majority_class("x"), Some(1));
        assert_eq!(u.majority_class("tie"), None);
        assert_eq!(u.classes_present("pure"), 1);
        assert_eq!(u.majority_class("missing"), None);
    }

    #[test]
    fn derived_lexicon_uses_first_seen_order() {
        let ann = set(vec![
            roi("mass", &[("shape", Some("oval")), ("margin", Some("obscured"))], 0),
            roi("calcification", &[("morphology", Some("punctate"))], 1),
            roi("calcification", &[("distribution", Some("linear"))], 1),
        ]);
        let lex = Lexicon::derive(&ann);
        assert_eq!(lex.types[0].axes, ["shape", "margin"]);
        assert_eq!(lex.types[1].axes, ["morphology", "distribution"]);
    }
}

//! Evidence dumps: a model run's prototypes, classification weights and the
//! maximal-activation location of each prototype on each image.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::annotations::AnnotationSet;
use crate::error::{InputError, Issue};
use crate::io::{check_format, into_result, read_json};

pub const DUMP_FORMAT: &str = "pefcoh-dump/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrototypeRecord {
    pub id: String,
    /// Classification-layer row for this prototype, one weight per class.
    pub class_weights: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActivationEntry {
    pub prototype_id: String,
    /// Presence score: the maximal similarity over the feature map.
    pub score: f64,
    pub row: u32,
    pub col: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageActivationRecord {
    pub image_id: String,
    pub split: Split,
    pub width: u32,
    pub height: u32,
    pub class_label: usize,
    pub feature_h: u32,
    pub feature_w: u32,
    pub entries: Vec<ActivationEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvidenceDump {
    pub format: String,
    pub model_name: String,
    pub seed: u64,
    pub class_names: Vec<String>,
    pub prototypes: Vec<PrototypeRecord>,
    pub images: Vec<ImageActivationRecord>,
}

impl EvidenceDump {
    pub fn new(
        model_name: impl Into<String>,
        seed: u64,
        class_names: Vec<String>,
        prototypes: Vec<PrototypeRecord>,
        images: Vec<ImageActivationRecord>,
    ) -> Self {
        EvidenceDump {
            format: DUMP_FORMAT.to_string(),
            model_name: model_name.into(),
            seed,
            class_names,
            prototypes,
            images,
        }
    }

    pub fn parse(path: &Path) -> Result<Self, InputError> {
        let dump: EvidenceDump = read_json(path)?;
        into_result(path, dump.validate())?;
        Ok(dump)
    }

    pub fn images_in(&self, split: Split) -> impl Iterator<Item = &ImageActivationRecord> {
        self.images.iter().filter(move |im| im.split == split)
    }

    pub fn prototype_weights(&self) -> HashMap<&str, &[f64]> {
        self.prototypes
            .iter()
            .map(|p| (p.id.as_str(), p.class_weights.as_slice()))
            .collect()
    }

    /// Every structural invariant; an empty vector means the dump is valid.
    pub fn validate(&self) -> Vec<Issue> {
        let mut issues = Vec::new();
        check_format(&self.format, DUMP_FORMAT, &mut issues);
        let n_classes = self.class_names.len();
        if n_classes < 2 {
            issues.push(Issue::error(
                "class_names",
                format!("need at least 2 classes, found {n_classes}"),
            ));
        }

        let mut ids = HashSet::new();
        for (i, p) in self.prototypes.iter().enumerate() {
            if !ids.insert(p.id.as_str()) {
                issues.push(Issue::error(
                    format!("prototypes[{i}].id"),
                    format!("duplicate prototype id `{}`", p.id),
                ));
            }
            if p.class_weights.len() != n_classes {
                issues.push(Issue::error(
                    format!("prototypes[{i}].class_weights"),
                    format!(
                        "expected {n_classes} weights (one per class), found {}",
                        p.class_weights.len()
                    ),
                ));
            }
            if p.class_weights.iter().any(|w| !w.is_finite()) {
                issues.push(Issue::error(
                    format!("prototypes[{i}].class_weights"),
                    "non-finite weight",
                ));
            }
        }

        let mut image_ids = HashSet::new();
        for (i, im) in self.images.iter().enumerate() {
            let at = format!("images[{i}]");
            if !image_ids.insert(im.image_id.as_str()) {
                issues.push(Issue::error(
                    format!("{at}.image_id"),
                    format!("duplicate image id `{}`", im.image_id),
                ));
            }
            if im.width == 0 || im.height == 0 {
                issues.push(Issue::error(&at, "image dimensions must be positive"));
            }
            if im.feature_h == 0 || im.feature_w == 0 {
                issues.push(Issue::error(&at, "feature-map dimensions must be positive"));
            }
            if im.class_label >= n_classes {
                issues.push(Issue::error(
                    format!("{at}.class_label"),
                    format!("class index {} out of range", im.class_label),
                ));
            }
            let mut seen = HashSet::new();
            for (j, e) in im.entries.iter().enumerate() {
                let at = format!("{at}.entries[{j}]");
                if !ids.contains(e.prototype_id.as_str()) {
                    issues.push(Issue::error(
                        format!("{at}.prototype_id"),
                        format!("unknown prototype `{}`", e.prototype_id),
                    ));
                }
                if !seen.insert(e.prototype_id.as_str()) {
                    issues.push(Issue::error(
                        format!("{at}.prototype_id"),
                        format!("more than one entry for prototype `{}`", e.prototype_id),
                    ));
                }
                if !e.score.is_finite() || e.score < 0.0 {
                    issues.push(Issue::error(
                        format!("{at}.score"),
                        format!("presence score must be finite and >= 0, found {}", e.score),
                    ));
                }
                if e.row >= im.feature_h || e.col >= im.feature_w {
                    issues.push(Issue::error(
                        &at,
                        format!(
                            "activation location out of feature map: ({}, {}) on {}x{}",
                            e.row, e.col, im.feature_h, im.feature_w
                        ),
                    ));
                }
            }
        }
        issues
    }
}

/// Consistency checks between a dump and the annotation set it is evaluated
/// against. Images missing from the annotations only warn: they are ignored
/// for relevance and localization.
pub fn cross_validate(dump: &EvidenceDump, annotations: &AnnotationSet) -> Vec<Issue> {
    let mut issues = Vec::new();
    if dump.class_names != annotations.class_names {
        issues.push(Issue::error(
            "class_names",
            format!(
                "class lists differ: dump {:?} vs annotations {:?}",
                dump.class_names, annotations.class_names
            ),
        ));
    }
    let by_id: HashMap<&str, _> = annotations
        .images
        .iter()
        .map(|im| (im.image_id.as_str(), im))
        .collect();
    for (i, im) in dump.images.iter().enumerate() {
        let at = format!("images[{i}]");
        let Some(ann) = by_id.get(im.image_id.as_str()) else {
            issues.push(Issue::warning(
                at,
                format!(
                    "image `{}` has no annotations; ignored for relevance and localization",
                    im.image_id
                ),
            ));
            continue;
        };
        if ann.split != im.split {
            issues.push(Issue::error(
                &at,
                format!(
                    "split disagrees for `{}`: dump {} vs annotations {}",
                    im.image_id, im.split, ann.split
                ),
            ));
        }
        if ann.width != im.width || ann.height != im.height {
            issues.push(Issue::error(
                &at,
                format!(
                    "image size disagrees for `{}`: dump {}x{} vs annotations {}x{}",
                    im.image_id, im.width, im.height, ann.width, ann.height
                ),
            ));
        }
        if ann.class_label != im.class_label {
            issues.push(Issue::error(
                &at,
                format!(
                    "class label disagrees for `{}`: dump {} vs annotations {}",
                    im.image_id, im.class_label, ann.class_label
                ),
            ));
        }
    }
    issues
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> EvidenceDump {
        EvidenceDump::new(
            "m",
            0,
            vec!["benign".into(), "malignant".into()],
            vec![PrototypeRecord {
                id: "p0".into(),
                class_weights: vec![1.0, 0.0],
            }],
            vec![ImageActivationRecord {
                image_id: "img".into(),
                split: Split::Train,
                width: 64,
                height: 64,
                class_label: 0,
                feature_h: 2,
                feature_w: 2,
                entries: vec![ActivationEntry {
                    prototype_id: "p0".into(),
                    score: 0.5,
                    row: 1,
                    col: 1,
                }],
            }],
        )
    }

    #[test]
    fn minimal_dump_is_valid() {
        assert!(minimal().validate().is_empty());
    }

    #[test]
    fn unknown_prototype_reference() {
        let mut d = minimal();
        d.images[0].entries[0].prototype_id = "p9".into();
        let issues = d.validate();
        assert_eq!(issues.len(), 1);
        assert!(issues[0].message.contains("unknown prototype"));
        assert_eq!(issues[0].at, "images[0].entries[0].prototype_id");
    }

    #[test]
    fn row_equal_to_feature_height_is_out_of_map() {
        let mut d = minimal();
        d.images[0].entries[0].row = 2;
        let issues = d.validate();
        assert!(issues[0]
            .message
            .contains("activation location out of feature map"));
    }

    #[test]
    fn weight_length_must_match_classes() {
        let mut d = minimal();
        d.prototypes[0].class_weights.push(0.0);
        assert!(d.validate()[0].message.contains("one per class"));
    }

    #[test]
    fn duplicate_entries_and_bad_scores() {
        let mut d = minimal();
        let mut e = d.images[0].entries[0].clone();
        e.score = -1.0;
        d.images[0].entries.push(e);
        let msgs: Vec<_> = d.validate().into_iter().map(|i| i.message).collect();
        assert!(msgs.iter().any(|m| m.contains("more than one entry")));
        assert!(msgs.iter().any(|m| m.contains(">= 0")));
    }

    #[test]
    fn zero_sized_feature_map() {
        let mut d = minimal();
        d.images[0].feature_w = 0;
        assert!(d
            .validate()
            .iter()
            .any(|i| i.message.contains("feature-map dimensions")));
    }
}

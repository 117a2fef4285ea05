//! Per-image ROI annotations with hierarchical category labels.

use std::collections::HashSet;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::dump::Split;
use crate::error::{InputError, Issue};
use crate::io::{check_format, into_result, read_json};
use crate::lexicon::{canonical, Lexicon};

pub const ANNOTATION_FORMAT: &str = "pefcoh-ann/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoiAnnotation {
    /// `[x_min, y_min, x_max, y_max]` in pixels, half-open.
    pub bbox: [i64; 4],
    #[serde(rename = "type")]
    pub abnormality_type: String,
    /// Axis name to value; `null` or an absent axis means "not annotated".
    #[serde(default)]
    pub descriptors: IndexMap<String, Option<String>>,
    pub roi_class: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedImage {
    pub image_id: String,
    pub width: u32,
    pub height: u32,
    pub split: Split,
    pub class_label: usize,
    #[serde(default)]
    pub rois: Vec<RoiAnnotation>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnotationSet {
    pub format: String,
    pub class_names: Vec<String>,
    pub images: Vec<AnnotatedImage>,
}

impl AnnotationSet {
    pub fn new(class_names: Vec<String>, images: Vec<AnnotatedImage>) -> Self {
        AnnotationSet {
            format: ANNOTATION_FORMAT.to_string(),
            class_names,
            images,
        }
    }

    /// Parse and validate against `lexicon`.
    pub fn parse(path: &Path, lexicon: &Lexicon) -> Result<Self, InputError> {
        let set = Self::parse_unchecked(path)?;
        into_result(path, set.validate(lexicon))?;
        Ok(set)
    }

    /// Parse with structural checks only; callers deriving the lexicon from
    /// the file use this, then [`AnnotationSet::validate`].
    pub fn parse_unchecked(path: &Path) -> Result<Self, InputError> {
        let set: AnnotationSet = read_json(path)?;
        let mut issues = Vec::new();
        check_format(&set.format, ANNOTATION_FORMAT, &mut issues);
        into_result(path, issues)?;
        Ok(set)
    }

    pub fn get(&self, image_id: &str) -> Option<&AnnotatedImage> {
        self.images.iter().find(|im| im.image_id == image_id)
    }

    pub fn validate(&self, lexicon: &Lexicon) -> Vec<Issue> {
        let mut issues = Vec::new();
        check_format(&self.format, ANNOTATION_FORMAT, &mut issues);
        let n_classes = self.class_names.len();
        let mut ids = HashSet::new();
        for (i, im) in self.images.iter().enumerate() {
            let at = format!("images[{i}]");
            if !ids.insert(im.image_id.as_str()) {
                issues.push(Issue::error(
                    format!("{at}.image_id"),
                    format!("duplicate image id `{}`", im.image_id),
                ));
            }
            if im.class_label >= n_classes {
                issues.push(Issue::error(
                    format!("{at}.class_label"),
                    format!("class index {} out of range", im.class_label),
                ));
            }
            for (j, roi) in im.rois.iter().enumerate() {
                let at = format!("{at}.rois[{j}]");
                let [x0, y0, x1, y1] = roi.bbox;
                if x0 >= x1 || y0 >= y1 {
                    issues.push(Issue::error(
                        format!("{at}.bbox"),
                        format!("degenerate bbox {:?}", roi.bbox),
                    ));
                } else if x0 < 0 || y0 < 0 || x1 > i64::from(im.width) || y1 > i64::from(im.height) {
                    issues.push(Issue::error(
                        format!("{at}.bbox"),
                        format!(
                            "bbox {:?} outside image bounds {}x{}",
                            roi.bbox, im.width, im.height
                        ),
                    ));
                }
                if roi.roi_class >= n_classes {
                    issues.push(Issue::error(
                        format!("{at}.roi_class"),
                        format!("class index {} out of range", roi.roi_class),
                    ));
                }
                match lexicon.find_type(&roi.abnormality_type) {
                    None => issues.push(Issue::error(
                        format!("{at}.type"),
                        format!("unknown abnormality type `{}`", roi.abnormality_type),
                    )),
                    Some(t) => {
                        for axis in roi.descriptors.keys() {
                            if !t.axes.contains(&canonical(axis)) {
                                issues.push(Issue::error(
                                    format!("{at}.descriptors.{axis}"),
                                    format!("axis `{axis}` not declared for type `{}`", t.name),
                                ));
                            }
                        }
                    }
                }
            }
        }
        issues
    }
}

//! Top-k training evidence per global prototype and the per-prototype
//! verdicts (relevance, purity, assigned categories) derived from it.

use std::collections::{BTreeMap, HashMap};

use indexmap::IndexMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annotations::{AnnotatedImage, AnnotationSet, RoiAnnotation};
use crate::dump::{EvidenceDump, ImageActivationRecord, Split};
use crate::error::MetricError;
use crate::geometry::{contains_point, resolve_patch_box, roi_center, PatchBox};
use crate::lexicon::{Level, Lexicon};

use super::{is_global, LevelPurity, PrototypeVerdict};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchedRoi {
    pub roi_index: usize,
    /// Category value per level name, for every level that applies to the ROI.
    pub categories: IndexMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvidenceItem {
    pub image_id: String,
    pub score: f64,
    pub patch: PatchBox,
    pub matched: Option<MatchedRoi>,
}

/// The `k` most activated training patches of one prototype, by descending
/// presence score (ties by ascending image id).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopKEvidence {
    pub prototype_id: String,
    pub k: usize,
    pub items: Vec<EvidenceItem>,
    /// `k - items.len()`: how many train activations were missing.
    pub shortfall: usize,
}

/// Evidence for every global prototype, in dump order.
pub fn top_k_evidence(
    dump: &EvidenceDump,
    annotations: &AnnotationSet,
    lexicon: &Lexicon,
    k: usize,
    patch_size: u32,
    eps: f64,
) -> Result<Vec<TopKEvidence>, MetricError> {
    if dump.images_in(Split::Train).next().is_none() {
        return Err(MetricError::EmptyTrainSplit);
    }
    let ann_by_id: HashMap<&str, &AnnotatedImage> = annotations
        .images
        .iter()
        .map(|im| (im.image_id.as_str(), im))
        .collect();

    // prototype id -> [(score, image)]
    let mut candidates: HashMap<&str, Vec<(f64, &ImageActivationRecord)>> = HashMap::new();
    for image in dump.images_in(Split::Train) {
        for entry in &image.entries {
            candidates
                .entry(entry.prototype_id.as_str())
                .or_default()
                .push((entry.score, image));
        }
    }
    let levels = lexicon.levels();

    let evidence = dump
        .prototypes
        .par_iter()
        .filter(|p| is_global(&p.class_weights, eps))
        .map(|p| {
            let mut pool = candidates.get(p.id.as_str()).cloned().unwrap_or_default();
            pool.sort_by(|a, b| {
                b.0.total_cmp(&a.0)
                    .then_with(|| a.1.image_id.cmp(&b.1.image_id))
            });
            pool.truncate(k);
            let items = pool
                .into_iter()
                .map(|(score, image)| {
                    let entry = image
                        .entries
                        .iter()
                        .find(|e| e.prototype_id == p.id)
                        .expect("candidate built from this image's entries");
                    let patch = resolve_patch_box(
                        entry.row,
                        entry.col,
                        image.feature_h,
                        image.feature_w,
                        image.width,
                        image.height,
                        patch_size,
                    );
                    let matched = ann_by_id
                        .get(image.image_id.as_str())
                        .and_then(|ann| match_roi(&patch, &ann.rois))
                        .map(|idx| {
                            let roi = &ann_by_id[image.image_id.as_str()].rois[idx];
                            MatchedRoi {
                                roi_index: idx,
                                categories: levels
                                    .iter()
                                    .filter_map(|l| {
                                        lexicon.category(roi, l).map(|c| (l.to_string(), c.value))
                                    })
                                    .collect(),
                            }
                        });
                    EvidenceItem {
                        image_id: image.image_id.clone(),
                        score,
                        patch,
                        matched,
                    }
                })
                .collect::<Vec<_>>();
            TopKEvidence {
                prototype_id: p.id.clone(),
                k,
                shortfall: k - items.len(),
                items,
            }
        })
        .collect();
    Ok(evidence)
}

/// The ROI whose center lies in the patch; with several, the one whose
/// center is nearest the patch center, then the lowest index.
pub(crate) fn match_roi(patch: &PatchBox, rois: &[RoiAnnotation]) -> Option<usize> {
    let (pcx, pcy) = patch.center_x2();
    let mut best: Option<(i64, usize)> = None;
    for (idx, roi) in rois.iter().enumerate() {
        let (cx, cy) = roi_center(roi);
        if !contains_point(patch, cx, cy) {
            continue;
        }
        let (rcx, rcy) = PatchBox::from_bbox(roi.bbox).center_x2();
        let d2 = (rcx - pcx).pow(2) + (rcy - pcy).pow(2);
        if best.is_none_or(|(bd, _)| d2 < bd) {
            best = Some((d2, idx));
        }
    }
    best.map(|(_, idx)| idx)
}

fn purity(items: &[EvidenceItem], level: &str, k: usize) -> LevelPurity {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for item in items {
        if let Some(value) = item.matched.as_ref().and_then(|m| m.categories.get(level)) {
            *counts.entry(value.as_str()).or_default() += 1;
        }
    }
    // BTreeMap order + strict comparison: ties go to the smallest category.
    let mut best: Option<(&str, usize)> = None;
    for (&cat, &n) in &counts {
        if best.is_none_or(|(_, bn)| n > bn) {
            best = Some((cat, n));
        }
    }
    match best {
        Some((cat, n)) => LevelPurity {
            category: Some(cat.to_string()),
            count: n,
            purity: n as f64 / k as f64,
        },
        None => LevelPurity {
            category: None,
            count: 0,
            purity: 0.0,
        },
    }
}

/// One verdict per prototype in dump order. Purity is computed for each of
/// `levels`; the combined and class-specific levels are always assigned.
pub fn build_verdicts(
    dump: &EvidenceDump,
    evidence: &[TopKEvidence],
    levels: &[Level],
    class_level: &Level,
    k: usize,
    eps: f64,
) -> Vec<PrototypeVerdict> {
    let by_id: HashMap<&str, &TopKEvidence> = evidence
        .iter()
        .map(|e| (e.prototype_id.as_str(), e))
        .collect();
    let combined = Level::Combined.to_string();
    let class_level = class_level.to_string();
    dump.prototypes
        .iter()
        .map(|p| {
            let is_global = is_global(&p.class_weights, eps);
            let items = by_id
                .get(p.id.as_str())
                .map(|e| e.items.as_slice())
                .unwrap_or_default();
            let matched = items.iter().filter(|i| i.matched.is_some()).count();
            let is_relevant = is_global && matched > 0;
            let (purity_per_level, combined_category, class_category) = if is_relevant {
                let per_level = levels
                    .iter()
                    .map(|l| {
                        let name = l.to_string();
                        let pur = purity(items, &name, k);
                        (name, pur)
                    })
                    .collect();
                (
                    per_level,
                    purity(items, &combined, k).category,
                    purity(items, &class_level, k).category,
                )
            } else {
                (IndexMap::new(), None, None)
            };
            PrototypeVerdict {
                prototype_id: p.id.clone(),
                is_global,
                is_relevant,
                matched,
                purity_per_level,
                combined_category,
                class_category,
                align: None,
            }
        })
        .collect()
}

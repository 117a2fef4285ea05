use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annotations::{AnnotatedImage, AnnotationSet};
use crate::dump::{EvidenceDump, Split};
use crate::error::MetricError;
use crate::geometry::{resolve_patch_box, Overlap, PatchBox, RegionSet};

use super::{is_global, IouDsc, LocalizationScores, LOCALIZATION_TOP_N};

/// Per test image: IoU/DSC of the union of the selected prototypes' patches
/// against the union of the image's ROI boxes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizationRow {
    pub image_id: String,
    pub rois: usize,
    /// Global prototypes with a non-zero contribution on this image.
    pub activated: usize,
    pub top1: IouDsc,
    pub top10: IouDsc,
    pub all: IouDsc,
}

/// Prototypes on each participating test image are ranked by
/// `|score * weight(ground-truth class)|`, descending, ties by prototype
/// id. Only test images with at least one ROI participate; an image whose
/// selection is empty scores 0.
pub fn localization(
    dump: &EvidenceDump,
    annotations: &AnnotationSet,
    patch_size: u32,
    eps: f64,
) -> Result<(LocalizationScores, Vec<LocalizationRow>), MetricError> {
    let ann_by_id: HashMap<&str, &AnnotatedImage> = annotations
        .images
        .iter()
        .map(|im| (im.image_id.as_str(), im))
        .collect();
    let weights = dump.prototype_weights();

    let participating: Vec<_> = dump
        .images_in(Split::Test)
        .filter_map(|im| {
            let ann = ann_by_id.get(im.image_id.as_str())?;
            (!ann.rois.is_empty()).then_some((im, *ann))
        })
        .collect();
    if participating.is_empty() {
        return Err(MetricError::NoLocalizableInstances);
    }

    let rows: Vec<LocalizationRow> = participating
        .par_iter()
        .map(|(image, ann)| {
            let mut ranked: Vec<(f64, &str, PatchBox)> = image
                .entries
                .iter()
                .filter_map(|e| {
                    let w = weights[e.prototype_id.as_str()];
                    if !is_global(w, eps) {
                        return None;
                    }
                    let magnitude = (e.score * w[image.class_label]).abs();
                    (magnitude > eps).then(|| {
                        let patch = resolve_patch_box(
                            e.row,
                            e.col,
                            image.feature_h,
                            image.feature_w,
                            image.width,
                            image.height,
                            patch_size,
                        );
                        (magnitude, e.prototype_id.as_str(), patch)
                    })
                })
                .collect();
            ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));

            let truth: RegionSet = ann.rois.iter().map(|r| PatchBox::from_bbox(r.bbox)).collect();
            let score = |n: usize| {
                let selected: RegionSet = ranked.iter().take(n).map(|r| r.2).collect();
                if selected.is_empty() {
                    return IouDsc::default();
                }
                let o = Overlap::of(&selected, &truth);
                IouDsc {
                    iou: o.iou(),
                    dsc: o.dsc(),
                }
            };
            LocalizationRow {
                image_id: image.image_id.clone(),
                rois: ann.rois.len(),
                activated: ranked.len(),
                top1: score(1),
                top10: score(LOCALIZATION_TOP_N),
                all: score(ranked.len()),
            }
        })
        .collect();

    let n = rows.len() as f64;
    let mean = |f: fn(&LocalizationRow) -> IouDsc| {
        let (iou, dsc) = rows
            .iter()
            .map(f)
            .fold((0.0, 0.0), |acc, v| (acc.0 + v.iou, acc.1 + v.dsc));
        IouDsc {
            iou: iou / n,
            dsc: dsc / n,
        }
    };
    let scores = LocalizationScores {
        top1: mean(|r| r.top1),
        top10: mean(|r| r.top10),
        all: mean(|r| r.all),
        instances: rows.len(),
    };
    Ok((scores, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotations::RoiAnnotation;
    use crate::dump::{ActivationEntry, ImageActivationRecord, PrototypeRecord};

    /// Test image 100x100 on a 10x10 feature map (10 px cells), patch 10,
    /// so the cell (r, c) patch is exactly (10c, 10r, 10c+10, 10r+10).
    fn fixture(
        entries: &[(&str, f64, u32, u32)],
        weights: &[(&str, [f64; 2])],
        rois: &[[i64; 4]],
    ) -> (EvidenceDump, AnnotationSet) {
        let dump = EvidenceDump::new(
            "m",
            0,
            vec!["benign".into(), "malignant".into()],
            weights
                .iter()
                .map(|(id, w)| PrototypeRecord {
                    id: id.to_string(),
                    class_weights: w.to_vec(),
                })
                .collect(),
            vec![ImageActivationRecord {
                image_id: "t0".into(),
                split: Split::Test,
                width: 100,
                height: 100,
                class_label: 1,
                feature_h: 10,
                feature_w: 10,
                entries: entries
                    .iter()
                    .map(|&(id, score, row, col)| ActivationEntry {
                        prototype_id: id.into(),
                        score,
                        row,
                        col,
                    })
                    .collect(),
            }],
        );
        let ann = AnnotationSet::new(
            dump.class_names.clone(),
            vec![AnnotatedImage {
                image_id: "t0".into(),
                width: 100,
                height: 100,
                split: Split::Test,
                class_label: 1,
                rois: rois
                    .iter()
                    .map(|&bbox| RoiAnnotation {
                        bbox,
                        abnormality_type: "mass".into(),
                        descriptors: Default::default(),
                        roi_class: 1,
                    })
                    .collect(),
            }],
        );
        (dump, ann)
    }

    #[test]
    fn exact_hit() {
        let (d, a) = fixture(&[("p0", 1.0, 0, 0)], &[("p0", [0.0, 1.0])], &[[0, 0, 10, 10]]);
        let (s, rows) = localization(&d, &a, 10, 1e-8).unwrap();
        assert_eq!(s.top1, IouDsc { iou: 1.0, dsc: 1.0 });
        assert_eq!(rows[0].activated, 1);
    }

    #[test]
    fn half_overlap() {
        let (d, a) = fixture(&[("p0", 1.0, 0, 0)], &[("p0", [0.0, 1.0])], &[[5, 0, 15, 10]]);
        let (s, _) = localization(&d, &a, 10, 1e-8).unwrap();
        assert!((s.top1.iou - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(s.top1.dsc, 0.5);
    }

    #[test]
    fn ranking_uses_ground_truth_weight_magnitude() {
        // p1 has the larger score but a tiny weight to class 1; p0 wins.
        // p2's negative contribution has the largest magnitude of all.
        let (d, a) = fixture(
            &[("p0", 1.0, 0, 0), ("p1", 5.0, 5, 5), ("p2", 1.0, 9, 9)],
            &[("p0", [0.0, 1.0]), ("p1", [1.0, 0.1]), ("p2", [0.0, -2.0])],
            &[[0, 0, 10, 10]],
        );
        let (s, rows) = localization(&d, &a, 10, 1e-8).unwrap();
        assert_eq!(s.top1.iou, 0.0); // p2's patch at (90,90)
        assert_eq!(rows[0].activated, 3);
        // all three patches: intersection 100, union 300
        assert!((s.all.iou - 100.0 / 300.0).abs() < 1e-12);
        assert_eq!(s.top10, s.all);
    }

    #[test]
    fn nothing_activated_scores_zero() {
        let (d, a) = fixture(&[("p0", 0.0, 0, 0)], &[("p0", [0.0, 1.0])], &[[0, 0, 10, 10]]);
        let (s, rows) = localization(&d, &a, 10, 1e-8).unwrap();
        assert_eq!(s.all, IouDsc::default());
        assert_eq!(rows[0].activated, 0);
    }

    #[test]
    fn no_rois_anywhere() {
        let (d, a) = fixture(&[("p0", 1.0, 0, 0)], &[("p0", [0.0, 1.0])], &[]);
        assert_eq!(
            localization(&d, &a, 10, 1e-8).unwrap_err(),
            MetricError::NoLocalizableInstances
        );
    }
}

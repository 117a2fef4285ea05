//! Literal recomputation of every property, for cross-checking `evaluate`
//! on small instances. Shares no intermediate results with the metrics
//! module: patches come from an exhaustive nearest-center search and areas
//! from pixel masks.

use std::collections::{BTreeMap, BTreeSet};

use indexmap::IndexMap;

use crate::annotations::{AnnotatedImage, AnnotationSet, RoiAnnotation};
use crate::dump::{EvidenceDump, ImageActivationRecord, Split};
use crate::error::{MetricError, SynthError};
use crate::lexicon::{canonical, Level, Lexicon, MISSING_VALUE};
use crate::metrics::{IouDsc, LocalizationScores, LpClass, PropertyScores, RunConfig, TcScope};

pub const ORACLE_MAX_PROTOTYPES: usize = 20;
pub const ORACLE_MAX_IMAGES: usize = 50;
pub const ORACLE_MAX_SIDE: u32 = 512;

type Rect = [i64; 4];

/// Start of the `patch`-wide window on an axis of `extent` pixels whose
/// center is nearest the center of cell `cell` of `cells`; ties go to the
/// later start. Windows wider than the axis cover all of it.
fn window(cell: u32, cells: u32, extent: u32, patch: u32) -> (i64, i64) {
    let (extent, patch) = (i64::from(extent), i64::from(patch));
    if patch >= extent {
        return (0, extent);
    }
    // Distances compared in units of 1 / (2 * cells) pixel.
    let target = (2 * i64::from(cell) + 1) * extent;
    let mut best = 0;
    for start in 0..=extent - patch {
        let d = ((2 * start + patch) * i64::from(cells) - target).abs();
        let bd = ((2 * best + patch) * i64::from(cells) - target).abs();
        if d <= bd {
            best = start;
        }
    }
    (best, best + patch)
}

fn patch_rect(image: &ImageActivationRecord, row: u32, col: u32, patch: u32) -> Rect {
    let (x0, x1) = window(col, image.feature_w, image.width, patch);
    let (y0, y1) = window(row, image.feature_h, image.height, patch);
    [x0, y0, x1, y1]
}

fn weights_of<'a>(dump: &'a EvidenceDump, id: &str) -> &'a [f64] {
    &dump
        .prototypes
        .iter()
        .find(|p| p.id == id)
        .expect("entry names a declared prototype")
        .class_weights
}

fn annotation<'a>(ann: &'a AnnotationSet, id: &str) -> Option<&'a AnnotatedImage> {
    ann.images.iter().find(|im| im.image_id == id)
}

fn value_at(lexicon: &Lexicon, roi: &RoiAnnotation, level: &Level) -> Option<String> {
    let kind = canonical(&roi.abnormality_type);
    let descriptor = |axis: &str| -> String {
        for (key, value) in &roi.descriptors {
            if canonical(key) == axis {
                if let Some(v) = value {
                    let v = canonical(v);
                    if !v.is_empty() {
                        return v;
                    }
                }
            }
        }
        MISSING_VALUE.to_string()
    };
    match level {
        Level::Type => Some(kind),
        Level::Axis { type_name, axis } => (*type_name == kind).then(|| descriptor(axis)),
        Level::Combined => {
            let mut s = kind.clone();
            for t in &lexicon.types {
                if t.name == kind {
                    for axis in &t.axes {
                        s.push('-');
                        s.push_str(&descriptor(axis));
                    }
                }
            }
            Some(s)
        }
    }
}

/// Index of the ROI whose center lies in `rect` nearest the rect center.
fn matched_roi(rect: Rect, rois: &[RoiAnnotation]) -> Option<usize> {
    let mut best: Option<(i64, usize)> = None;
    for (i, roi) in rois.iter().enumerate() {
        let cx = roi.bbox[0] + roi.bbox[2];
        let cy = roi.bbox[1] + roi.bbox[3];
        let inside = 2 * rect[0] <= cx && cx < 2 * rect[2] && 2 * rect[1] <= cy && cy < 2 * rect[3];
        if !inside {
            continue;
        }
        let dx = cx - (rect[0] + rect[2]);
        let dy = cy - (rect[1] + rect[3]);
        let d = dx * dx + dy * dy;
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, i));
        }
    }
    best.map(|(_, i)| i)
}

/// Pixel counts `(|A|, |B|, |A and B|, |A or B|)` over rasterized masks.
fn raster(width: u32, height: u32, a: &[Rect], b: &[Rect]) -> (u64, u64, u64, u64) {
    let all = a.iter().chain(b);
    let x_lo = all.clone().map(|r| r[0]).min().unwrap_or(0).max(0);
    let y_lo = all.clone().map(|r| r[1]).min().unwrap_or(0).max(0);
    let x_hi = all.clone().map(|r| r[2]).max().unwrap_or(0).min(i64::from(width));
    let y_hi = all.map(|r| r[3]).max().unwrap_or(0).min(i64::from(height));
    let covers = |rs: &[Rect], x: i64, y: i64| rs.iter().any(|r| r[0] <= x && x < r[2] && r[1] <= y && y < r[3]);
    let mut counts = (0, 0, 0, 0);
    for y in y_lo..y_hi {
        for x in x_lo..x_hi {
            let (ia, ib) = (covers(a, x, y), covers(b, x, y));
            counts.0 += u64::from(ia);
            counts.1 += u64::from(ib);
            counts.2 += u64::from(ia && ib);
            counts.3 += u64::from(ia || ib);
        }
    }
    counts
}

/// Every property of `(dump, annotations)` recomputed from first
/// principles. Refuses instances above the oracle size limits.
pub fn brute_force_scores(
    dump: &EvidenceDump,
    annotations: &AnnotationSet,
    lexicon: &Lexicon,
    config: &RunConfig,
) -> Result<PropertyScores, SynthError> {
    if dump.prototypes.len() > ORACLE_MAX_PROTOTYPES {
        return Err(SynthError::TooLarge(format!(
            "{} prototypes (limit {ORACLE_MAX_PROTOTYPES})",
            dump.prototypes.len()
        )));
    }
    if dump.images.len() > ORACLE_MAX_IMAGES {
        return Err(SynthError::TooLarge(format!(
            "{} images (limit {ORACLE_MAX_IMAGES})",
            dump.images.len()
        )));
    }
    if let Some(im) = dump
        .images
        .iter()
        .find(|im| im.width > ORACLE_MAX_SIDE || im.height > ORACLE_MAX_SIDE)
    {
        return Err(SynthError::TooLarge(format!(
            "image {} is {}x{} (limit {ORACLE_MAX_SIDE}x{ORACLE_MAX_SIDE})",
            im.image_id, im.width, im.height
        )));
    }
    let config = config.resolve(lexicon)?;
    let eps = config.eps;
    let k = config.k;
    let global = |id: &str| weights_of(dump, id).iter().any(|w| w.abs() > eps);

    let total = dump.prototypes.len();
    let gp = dump.prototypes.iter().filter(|p| global(&p.id)).count();
    let sparsity_ratio = if total == 0 {
        0.0
    } else {
        (total - gp) as f64 / total as f64
    };

    let tests: Vec<&ImageActivationRecord> = dump.images.iter().filter(|im| im.split == Split::Test).collect();
    if tests.is_empty() {
        return Err(MetricError::EmptyTestSplit.into());
    }
    let (mut pos, mut neg) = (0usize, 0usize);
    for im in &tests {
        let class = match config.lp_class {
            LpClass::GroundTruth => im.class_label,
            LpClass::Predicted => {
                let mut logits = vec![0.0f64; dump.class_names.len()];
                for e in &im.entries {
                    for (c, w) in weights_of(dump, &e.prototype_id).iter().enumerate() {
                        logits[c] += e.score * w;
                    }
                }
                (0..logits.len()).fold(0, |best, c| if logits[c] > logits[best] { c } else { best })
            }
        };
        for e in &im.entries {
            let c = e.score * weights_of(dump, &e.prototype_id)[class];
            if c > eps {
                pos += 1;
            }
            if c < -eps {
                neg += 1;
            }
        }
    }

    if !dump.images.iter().any(|im| im.split == Split::Train) {
        return Err(MetricError::EmptyTrainSplit.into());
    }
    let levels: Vec<Level> = config
        .levels
        .iter()
        .map(|l| lexicon.resolve_level(l))
        .collect::<Result<_, _>>()?;
    let class_level = lexicon.resolve_level(&config.class_specific_level)?;

    // Per relevant prototype: (id, purity per level, combined, class category).
    struct Relevant {
        id: String,
        purities: Vec<f64>,
        combined: String,
        class_category: Option<String>,
    }
    let mut relevant = Vec::new();
    let top_category = |matched: &[&RoiAnnotation], level: &Level| -> Option<(String, usize)> {
        let mut tally: Vec<(String, usize)> = Vec::new();
        for roi in matched {
            if let Some(v) = value_at(lexicon, roi, level) {
                match tally.iter_mut().find(|(c, _)| *c == v) {
                    Some(t) => t.1 += 1,
                    None => tally.push((v, 1)),
                }
            }
        }
        tally.into_iter().fold(None, |best, (c, n)| match best {
            Some((bc, bn)) if bn > n || (bn == n && bc < c) => Some((bc, bn)),
            _ => Some((c, n)),
        })
    };
    for proto in dump.prototypes.iter().filter(|p| global(&p.id)) {
        let mut pool: Vec<(f64, &str, &ImageActivationRecord, u32, u32)> = Vec::new();
        for im in dump.images.iter().filter(|im| im.split == Split::Train) {
            for e in im.entries.iter().filter(|e| e.prototype_id == proto.id) {
                pool.push((e.score, &im.image_id, im, e.row, e.col));
            }
        }
        pool.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(b.1)));
        pool.truncate(k);
        let mut matched: Vec<&RoiAnnotation> = Vec::new();
        for &(_, id, im, row, col) in &pool {
            if let Some(ann) = annotation(annotations, id) {
                let rect = patch_rect(im, row, col, config.patch_size);
                if let Some(i) = matched_roi(rect, &ann.rois) {
                    matched.push(&ann.rois[i]);
                }
            }
        }
        if matched.is_empty() {
            continue;
        }
        relevant.push(Relevant {
            id: proto.id.clone(),
            purities: levels
                .iter()
                .map(|l| top_category(&matched, l).map_or(0.0, |(_, n)| n as f64 / k as f64))
                .collect(),
            combined: top_category(&matched, &Level::Combined).unwrap().0,
            class_category: top_category(&matched, &class_level).map(|(c, _)| c),
        });
    }
    if gp == 0 {
        return Err(MetricError::NoGlobalPrototypes.into());
    }
    let rp = relevant.len();
    let mut specialization_per_level = IndexMap::new();
    for (i, name) in config.levels.iter().enumerate() {
        let value = (rp > 0).then(|| relevant.iter().map(|r| r.purities[i]).sum::<f64>() / rp as f64);
        specialization_per_level.insert(name.clone(), value);
    }
    let uc = relevant.iter().map(|r| r.combined.as_str()).collect::<BTreeSet<_>>().len();

    let in_scope = |im: &AnnotatedImage| match config.tc_scope {
        TcScope::All => true,
        TcScope::Train => im.split == Split::Train,
    };
    let tc = config.tc_override.unwrap_or_else(|| {
        annotations
            .images
            .iter()
            .filter(|im| in_scope(im))
            .flat_map(|im| &im.rois)
            .filter_map(|roi| value_at(lexicon, roi, &Level::Combined))
            .collect::<BTreeSet<_>>()
            .len()
    });
    if tc == 0 {
        return Err(MetricError::ZeroTotalCategories.into());
    }

    let mut class_counts: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for roi in annotations.images.iter().flat_map(|im| &im.rois) {
        if let Some(v) = value_at(lexicon, roi, &class_level) {
            class_counts.entry(v).or_insert_with(|| vec![0; annotations.class_names.len()])[roi.roi_class] += 1;
        }
    }
    let mut aligns = Vec::new();
    for r in &relevant {
        let Some(counts) = r.class_category.as_ref().and_then(|c| class_counts.get(c)) else {
            continue;
        };
        if counts.iter().filter(|&&n| n > 0).count() < 2 {
            continue;
        }
        let top = *counts.iter().max().unwrap();
        let leaders: Vec<usize> = (0..counts.len()).filter(|&c| counts[c] == top).collect();
        if leaders.len() != 1 {
            continue;
        }
        let w = weights_of(dump, &r.id);
        let wm = w[leaders[0]];
        let strictly_highest = (0..w.len()).filter(|&c| c != leaders[0]).all(|c| w[c] < wm);
        aligns.push(f64::from(u8::from(strictly_highest)));
    }

    let mut per_image: Vec<[IouDsc; 3]> = Vec::new();
    for im in &tests {
        let Some(ann) = annotation(annotations, &im.image_id) else {
            continue;
        };
        if ann.rois.is_empty() {
            continue;
        }
        let mut ranked: Vec<(f64, &str, Rect)> = Vec::new();
        for e in &im.entries {
            if !global(&e.prototype_id) {
                continue;
            }
            let m = (e.score * weights_of(dump, &e.prototype_id)[im.class_label]).abs();
            if m > eps {
                ranked.push((m, &e.prototype_id, patch_rect(im, e.row, e.col, config.patch_size)));
            }
        }
        ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(b.1)));
        let truth: Vec<Rect> = ann.rois.iter().map(|r| r.bbox).collect();
        let score = |n: usize| {
            let chosen: Vec<Rect> = ranked.iter().take(n).map(|r| r.2).collect();
            if chosen.is_empty() {
                return IouDsc::default();
            }
            let (a, b, inter, union) = raster(im.width, im.height, &chosen, &truth);
            IouDsc {
                iou: if union == 0 { 0.0 } else { inter as f64 / union as f64 },
                dsc: if a + b == 0 { 0.0 } else { 2.0 * inter as f64 / (a + b) as f64 },
            }
        };
        per_image.push([score(1), score(10), score(ranked.len())]);
    }
    if per_image.is_empty() {
        return Err(MetricError::NoLocalizableInstances.into());
    }
    let mean = |i: usize| {
        let n = per_image.len() as f64;
        IouDsc {
            iou: per_image.iter().map(|r| r[i].iou).sum::<f64>() / n,
            dsc: per_image.iter().map(|r| r[i].dsc).sum::<f64>() / n,
        }
    };

    Ok(PropertyScores {
        total_prototypes: total,
        gp,
        lp_positive: pos as f64 / tests.len() as f64,
        lp_negative: neg as f64 / tests.len() as f64,
        sparsity_ratio,
        relevant_prototypes: rp,
        relevance: rp as f64 / gp as f64,
        specialization_per_level,
        unique_categories: uc,
        total_categories: tc,
        uniqueness: (rp > 0).then(|| uc as f64 / rp as f64),
        coverage: uc as f64 / tc as f64,
        class_specific: (!aligns.is_empty()).then(|| aligns.iter().sum::<f64>() / aligns.len() as f64),
        class_specific_support: aligns.len(),
        localization: LocalizationScores {
            top1: mean(0),
            top10: mean(1),
            all: mean(2),
            instances: per_image.len(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_examples() {
        assert_eq!(window(0, 16, 512, 130), (0, 130));
        assert_eq!(window(15, 16, 512, 130), (382, 512));
        assert_eq!(window(0, 2, 100, 130), (0, 100));
        // 1000 px over 10 cells: cell 3 center 350, start 285.
        assert_eq!(window(3, 10, 1000, 130), (285, 415));
    }

    #[test]
    fn raster_counts() {
        let a = [[0, 0, 10, 10]];
        let b = [[5, 0, 15, 10]];
        assert_eq!(raster(20, 20, &a, &b), (100, 100, 50, 150));
    }

    #[test]
    fn refuses_large_instances() {
        let dump = EvidenceDump::new(
            "m",
            0,
            vec!["a".into(), "b".into()],
            (0..21)
                .map(|i| crate::dump::PrototypeRecord {
                    id: format!("p{i}"),
                    class_weights: vec![1.0, 0.0],
                })
                .collect(),
            vec![],
        );
        let ann = AnnotationSet::new(dump.class_names.clone(), vec![]);
        assert!(matches!(
            brute_force_scores(&dump, &ann, &Lexicon::birads(), &RunConfig::default()),
            Err(SynthError::TooLarge(_))
        ));
    }
}

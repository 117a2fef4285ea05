use crate::dump::EvidenceDump;
use crate::error::MetricError;

use super::LpClass;

/// A prototype is global when any class weight is non-zero (`|w| > eps`).
pub fn is_global(class_weights: &[f64], eps: f64) -> bool {
    class_weights.iter().any(|w| w.abs() > eps)
}

/// `(GP, sparsity)` where sparsity is the share of prototypes whose
/// weights are all zero.
pub fn global_prototypes(dump: &EvidenceDump, eps: f64) -> (usize, f64) {
    let total = dump.prototypes.len();
    let gp = dump
        .prototypes
        .iter()
        .filter(|p| is_global(&p.class_weights, eps))
        .count();
    let sparsity = if total == 0 {
        0.0
    } else {
        1.0 - gp as f64 / total as f64
    };
    (gp, sparsity)
}

/// Mean number of prototypes per test image whose contribution
/// `score * weight` is positive (`> eps`) and negative (`< -eps`).
pub fn local_prototypes(
    dump: &EvidenceDump,
    eps: f64,
    lp_class: LpClass,
) -> Result<(f64, f64), MetricError> {
    let weights = dump.prototype_weights();
    let mut n_images = 0usize;
    let (mut pos, mut neg) = (0usize, 0usize);
    for image in dump.images_in(crate::dump::Split::Test) {
        n_images += 1;
        let class = match lp_class {
            LpClass::GroundTruth => image.class_label,
            LpClass::Predicted => predicted_class(image, &weights, dump.class_names.len()),
        };
        for entry in &image.entries {
            let w = weights[entry.prototype_id.as_str()][class];
            let contribution = entry.score * w;
            if contribution > eps {
                pos += 1;
            } else if contribution < -eps {
                neg += 1;
            }
        }
    }
    if n_images == 0 {
        return Err(MetricError::EmptyTestSplit);
    }
    Ok((pos as f64 / n_images as f64, neg as f64 / n_images as f64))
}

/// Arg-max over classes of the summed contributions; ties go to the lower
/// class index.
fn predicted_class(
    image: &crate::dump::ImageActivationRecord,
    weights: &std::collections::HashMap<&str, &[f64]>,
    n_classes: usize,
) -> usize {
    let mut logits = vec![0.0; n_classes];
    for entry in &image.entries {
        for (logit, w) in logits.iter_mut().zip(weights[entry.prototype_id.as_str()]) {
            *logit += entry.score * w;
        }
    }
    let mut best = 0;
    for (c, &v) in logits.iter().enumerate() {
        if v > logits[best] {
            best = c;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dump::{ActivationEntry, ImageActivationRecord, PrototypeRecord, Split};

    fn dump(weights: &[[f64; 2]], entries: &[(usize, f64)], class_label: usize) -> EvidenceDump {
        EvidenceDump::new(
            "m",
            0,
            vec!["benign".into(), "malignant".into()],
            weights
                .iter()
                .enumerate()
                .map(|(i, w)| PrototypeRecord {
                    id: format!("p{i}"),
                    class_weights: w.to_vec(),
                })
                .collect(),
            vec![ImageActivationRecord {
                image_id: "t".into(),
                split: Split::Test,
                width: 10,
                height: 10,
                class_label,
                feature_h: 1,
                feature_w: 1,
                entries: entries
                    .iter()
                    .map(|&(p, score)| ActivationEntry {
                        prototype_id: format!("p{p}"),
                        score,
                        row: 0,
                        col: 0,
                    })
                    .collect(),
            }],
        )
    }

    #[test]
    fn all_prototypes_weighted() {
        let d = dump(&vec![[1.0, 0.0]; 400], &[], 0);
        assert_eq!(global_prototypes(&d, 1e-8), (400, 0.0));
    }

    #[test]
    fn one_of_eight_weighted() {
        let mut w = vec![[0.0, 0.0]; 8];
        w[3] = [0.0, -0.5];
        let d = dump(&w, &[], 0);
        assert_eq!(global_prototypes(&d, 1e-8), (1, 0.875));
    }

    #[test]
    fn all_zero_and_sub_eps_weights() {
        let d = dump(&[[0.0, 0.0], [1e-10, -1e-9]], &[], 0);
        assert_eq!(global_prototypes(&d, 1e-8), (0, 1.0));
        assert_eq!(global_prototypes(&d, 0.0), (1, 0.5));
    }

    #[test]
    fn local_counts() {
        let d = dump(&[[1.0, 0.0]], &[(0, 0.5)], 0);
        assert_eq!(local_prototypes(&d, 1e-8, LpClass::GroundTruth).unwrap(), (1.0, 0.0));

        let d = dump(&[[1.0, 0.0], [-0.5, 1.0]], &[(0, 0.5), (1, 0.2)], 0);
        assert_eq!(local_prototypes(&d, 1e-8, LpClass::GroundTruth).unwrap(), (1.0, 1.0));

        let d = dump(&[[1.0, 0.0]], &[(0, 0.0)], 0);
        assert_eq!(local_prototypes(&d, 1e-8, LpClass::GroundTruth).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn predicted_class_convention() {
        // Ground truth is class 1, but the logits favour class 0.
        let d = dump(&[[1.0, 0.1], [-0.5, 0.2]], &[(0, 1.0), (1, 0.2)], 1);
        assert_eq!(local_prototypes(&d, 1e-8, LpClass::GroundTruth).unwrap(), (2.0, 0.0));
        assert_eq!(local_prototypes(&d, 1e-8, LpClass::Predicted).unwrap(), (1.0, 1.0));
    }

    #[test]
    fn no_test_images() {
        let mut d = dump(&[[1.0, 0.0]], &[], 0);
        d.images[0].split = Split::Train;
        assert_eq!(
            local_prototypes(&d, 1e-8, LpClass::GroundTruth),
            Err(MetricError::EmptyTestSplit)
        );
    }
}

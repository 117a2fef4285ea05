//! Relevance, specialization, uniqueness, coverage and class-specificity,
//! all computed from prototype verdicts.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::MetricError;
use crate::lexicon::CategoryUniverse;

use super::PrototypeVerdict;

fn relevant(verdicts: &[PrototypeVerdict]) -> impl Iterator<Item = &PrototypeVerdict> {
    verdicts.iter().filter(|v| v.is_relevant)
}

/// `|RP| / GP`.
pub fn relevance(verdicts: &[PrototypeVerdict]) -> Result<f64, MetricError> {
    let gp = verdicts.iter().filter(|v| v.is_global).count();
    if gp == 0 {
        return Err(MetricError::NoGlobalPrototypes);
    }
    Ok(relevant(verdicts).count() as f64 / gp as f64)
}

/// Mean purity over relevant prototypes at `level`; `None` without any
/// relevant prototype. A prototype with no category at the level (e.g. a
/// calcification prototype at a mass-shape level) contributes 0.
pub fn specialization(verdicts: &[PrototypeVerdict], level: &str) -> Option<f64> {
    let purities: Vec<f64> = relevant(verdicts)
        .map(|v| v.purity_per_level.get(level).map_or(0.0, |p| p.purity))
        .collect();
    if purities.is_empty() {
        None
    } else {
        Some(purities.iter().sum::<f64>() / purities.len() as f64)
    }
}

/// UC: distinct combined categories assigned to relevant prototypes.
pub fn unique_categories(verdicts: &[PrototypeVerdict]) -> usize {
    relevant(verdicts)
        .filter_map(|v| v.combined_category.as_deref())
        .collect::<BTreeSet<_>>()
        .len()
}

/// `UC / |RP|`; `None` without any relevant prototype.
pub fn uniqueness(verdicts: &[PrototypeVerdict]) -> Option<f64> {
    let rp = relevant(verdicts).count();
    (rp > 0).then(|| unique_categories(verdicts) as f64 / rp as f64)
}

/// `UC / TC`.
pub fn coverage(verdicts: &[PrototypeVerdict], total_categories: usize) -> Result<f64, MetricError> {
    if total_categories == 0 {
        return Err(MetricError::ZeroTotalCategories);
    }
    Ok(unique_categories(verdicts) as f64 / total_categories as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassSpecificOutcome {
    /// Mean alignment over the eligible prototypes; `None` when none are.
    pub score: Option<f64>,
    /// Alignment per verdict (parallel to the input), `None` if ineligible.
    pub aligns: Vec<Option<u8>>,
    /// Eligible prototypes: relevant, with an assigned category that has
    /// instances of more than one class and a strict majority class.
    pub support: usize,
    /// Prototypes dropped because their category's class counts tie.
    pub tied: Vec<String>,
}

/// Alignment between each relevant prototype's weights and the class
/// distribution of its assigned category. A prototype aligns when its
/// weight to the category's majority class is strictly the largest.
pub fn class_specific(
    verdicts: &[PrototypeVerdict],
    weights: &HashMap<&str, &[f64]>,
    universe: &CategoryUniverse,
) -> ClassSpecificOutcome {
    let mut tied = Vec::new();
    let aligns: Vec<Option<u8>> = verdicts
        .iter()
        .map(|v| {
            if !v.is_relevant {
                return None;
            }
            let category = v.class_category.as_deref()?;
            if universe.classes_present(category) < 2 {
                return None;
            }
            let Some(majority) = universe.majority_class(category) else {
                log::info!(
                    "prototype {}: category `{category}` has tied class counts; excluded",
                    v.prototype_id
                );
                tied.push(v.prototype_id.clone());
                return None;
            };
            let w = weights[v.prototype_id.as_str()];
            let top = w[majority];
            let aligned = w
                .iter()
                .enumerate()
                .all(|(c, &x)| c == majority || x < top);
            Some(u8::from(aligned))
        })
        .collect();
    let eligible: Vec<u8> = aligns.iter().flatten().copied().collect();
    let score = (!eligible.is_empty()).then(|| {
        eligible.iter().map(|&a| f64::from(a)).sum::<f64>() / eligible.len() as f64
    });
    ClassSpecificOutcome {
        score,
        support: eligible.len(),
        aligns,
        tied,
    }
}

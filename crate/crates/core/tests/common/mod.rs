#![allow(dead_code)]

use pefcoh_core::metrics::PropertyScores;

pub const TOLERANCE: f64 = 1e-9;

/// Differences between two score sets: counts must match exactly, real
/// values within [`TOLERANCE`], absent values must coincide.
pub fn score_diff(a: &PropertyScores, b: &PropertyScores) -> Vec<String> {
    let mut out = Vec::new();
    let counts = [
        ("total_prototypes", a.total_prototypes, b.total_prototypes),
        ("gp", a.gp, b.gp),
        ("relevant_prototypes", a.relevant_prototypes, b.relevant_prototypes),
        ("unique_categories", a.unique_categories, b.unique_categories),
        ("total_categories", a.total_categories, b.total_categories),
        ("class_specific_support", a.class_specific_support, b.class_specific_support),
        ("localization.instances", a.localization.instances, b.localization.instances),
    ];
    for (name, x, y) in counts {
        if x != y {
            out.push(format!("{name}: {x} != {y}"));
        }
    }
    let (fa, fb) = (a.flatten(), b.flatten());
    if fa.keys().ne(fb.keys()) {
        out.push(format!("keys differ: {:?} vs {:?}", fa.keys(), fb.keys()));
        return out;
    }
    for ((name, x), y) in fa.iter().zip(fb.values()) {
        match (x, y) {
            (Some(x), Some(y)) if (x - y).abs() <= TOLERANCE => {}
            (None, None) => {}
            _ => out.push(format!("{name}: {x:?} != {y:?}")),
        }
    }
    out
}

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::SynthError;

pub const SYNTH_SPEC_FORMAT: &str = "pefcoh-synth/1";

/// Parameters of a synthetic instance. Every target is a fraction in
/// `[0, 1]`; counts derived from targets are rounded to the nearest
/// integer, and the ledger records the values actually planted.
///
/// Purity is planted per relevant prototype as `round(purity_target * k)`
/// patches on its assigned category plus `round(sibling_target * k)`
/// patches on another category of the same abnormality type. Per-level
/// purities follow from which descriptor values the two share.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub format: String,
    pub rng_seed: u64,
    pub model_name: String,
    pub n_prototypes: usize,
    /// Prototypes with all-zero class weights.
    pub n_zero_weight: usize,
    pub n_train_images: usize,
    pub n_test_images: usize,
    pub image_width: u32,
    pub image_height: u32,
    pub feature_h: u32,
    pub feature_w: u32,
    pub k: usize,
    pub patch_size: u32,
    pub mass_categories: usize,
    pub calcification_categories: usize,
    pub relevance_target: f64,
    pub purity_target: f64,
    pub sibling_target: f64,
    pub uniqueness_target: f64,
    pub class_specific_target: f64,
    /// Presence-score jitter in `[0, 1]`; bounded below the planted gaps.
    pub noise: f64,
    /// Each test image carries between 1 and this many ROIs.
    pub test_rois_max: usize,
    /// Activated prototypes per test image (capped by GP).
    pub test_activations: usize,
    /// Chance a test activation lands on an ROI.
    pub test_hit_rate: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            format: SYNTH_SPEC_FORMAT.to_string(),
            rng_seed: 7,
            model_name: "synthetic".to_string(),
            n_prototypes: 20,
            n_zero_weight: 2,
            n_train_images: 30,
            n_test_images: 15,
            image_width: 512,
            image_height: 512,
            feature_h: 16,
            feature_w: 16,
            k: 10,
            patch_size: 130,
            mass_categories: 6,
            calcification_categories: 6,
            relevance_target: 0.5,
            purity_target: 0.6,
            sibling_target: 0.2,
            uniqueness_target: 0.6,
            class_specific_target: 0.75,
            noise: 0.5,
            test_rois_max: 5,
            test_activations: 14,
            test_hit_rate: 0.5,
        }
    }
}

/// Counts implied by a spec's targets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Plan {
    pub global: usize,
    pub relevant: usize,
    pub unique: usize,
    pub dominant: usize,
    pub sibling: usize,
}

fn count(target: f64, of: usize) -> usize {
    (target * of as f64).round() as usize
}

impl SynthSpec {
    /// A randomized small spec derived from `seed`, feasible and within the
    /// brute-force oracle's size limits.
    pub fn varied(seed: u64) -> SynthSpec {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5bec);
        loop {
            let n_prototypes = rng.gen_range(4..=20);
            let k = rng.gen_range(3..=10);
            let purity_target = rng.gen_range(0.4..=1.0);
            let spec = SynthSpec {
                rng_seed: seed,
                n_prototypes,
                n_zero_weight: rng.gen_range(0..=3.min(n_prototypes - 1)),
                n_train_images: rng.gen_range(k.max(12)..=30),
                n_test_images: rng.gen_range(3..=15),
                image_width: *[320, 448, 512].choose(&mut rng).unwrap(),
                image_height: *[320, 448, 512].choose(&mut rng).unwrap(),
                feature_h: rng.gen_range(7..=16),
                feature_w: rng.gen_range(7..=16),
                k,
                patch_size: *[64, 100, 130].choose(&mut rng).unwrap(),
                mass_categories: rng.gen_range(1..=8),
                calcification_categories: rng.gen_range(1..=8),
                relevance_target: rng.gen_range(0.0..=1.0),
                purity_target,
                sibling_target: rng.gen_range(0.0..=(1.0 - purity_target).min(purity_target / 2.0)),
                uniqueness_target: rng.gen_range(0.0..=1.0),
                class_specific_target: rng.gen_range(0.0..=1.0),
                noise: rng.gen_range(0.0..=1.0),
                test_rois_max: rng.gen_range(1..=5),
                test_activations: rng.gen_range(1..=20),
                test_hit_rate: rng.gen_range(0.0..=1.0),
                ..SynthSpec::default()
            };
            if spec.plan().is_ok() && super::generate(&spec).is_ok() {
                return spec;
            }
        }
    }

    pub(crate) fn plan(&self) -> Result<Plan, SynthError> {
        if self.format != SYNTH_SPEC_FORMAT {
            return Err(SynthError::infeasible(
                &["format"],
                format!("expected \"{SYNTH_SPEC_FORMAT}\""),
            ));
        }
        let fractions = [
            ("relevance_target", self.relevance_target),
            ("purity_target", self.purity_target),
            ("sibling_target", self.sibling_target),
            ("uniqueness_target", self.uniqueness_target),
            ("class_specific_target", self.class_specific_target),
            ("noise", self.noise),
            ("test_hit_rate", self.test_hit_rate),
        ];
        for (name, v) in fractions {
            if !(0.0..=1.0).contains(&v) {
                return Err(SynthError::infeasible(&[name], format!("{v} is outside [0, 1]")));
            }
        }
        let positive = [
            ("image_width", self.image_width as usize),
            ("image_height", self.image_height as usize),
            ("feature_h", self.feature_h as usize),
            ("feature_w", self.feature_w as usize),
            ("k", self.k),
            ("patch_size", self.patch_size as usize),
            ("n_test_images", self.n_test_images),
            ("test_rois_max", self.test_rois_max),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(SynthError::infeasible(&[name], "must be positive"));
            }
        }
        if self.n_zero_weight >= self.n_prototypes {
            return Err(SynthError::infeasible(
                &["n_prototypes", "n_zero_weight"],
                "at least one prototype must carry a non-zero weight",
            ));
        }
        if self.n_train_images < self.k {
            return Err(SynthError::infeasible(
                &["n_train_images", "k"],
                format!(
                    "{} train images cannot supply k={} distinct top patches",
                    self.n_train_images, self.k
                ),
            ));
        }
        if self.mass_categories > MASS_SHAPES.len() * MASS_MARGINS.len() {
            return Err(SynthError::infeasible(
                &["mass_categories"],
                format!("at most {} distinct mass categories", MASS_SHAPES.len() * MASS_MARGINS.len()),
            ));
        }
        if self.calcification_categories > CALC_MORPHOLOGIES.len() * CALC_DISTRIBUTIONS.len() {
            return Err(SynthError::infeasible(
                &["calcification_categories"],
                format!(
                    "at most {} distinct calcification categories",
                    CALC_MORPHOLOGIES.len() * CALC_DISTRIBUTIONS.len()
                ),
            ));
        }
        let total_categories = self.mass_categories + self.calcification_categories;
        if total_categories == 0 {
            return Err(SynthError::infeasible(
                &["mass_categories", "calcification_categories"],
                "need at least one category",
            ));
        }

        let global = self.n_prototypes - self.n_zero_weight;
        let relevant = count(self.relevance_target, global);
        let (unique, dominant, sibling) = if relevant == 0 {
            (0, 0, 0)
        } else {
            let unique = count(self.uniqueness_target, relevant).max(1);
            if unique > total_categories {
                return Err(SynthError::infeasible(
                    &["uniqueness_target", "mass_categories", "calcification_categories"],
                    format!(
                        "{relevant} relevant prototypes at uniqueness {} need {unique} unique categories, \
                         but only {total_categories} are planted",
                        self.uniqueness_target
                    ),
                ));
            }
            let dominant = count(self.purity_target, self.k);
            if dominant == 0 {
                return Err(SynthError::infeasible(
                    &["purity_target", "k"],
                    "relevant prototypes need at least one matched patch",
                ));
            }
            let sibling = count(self.sibling_target, self.k);
            if dominant + sibling > self.k || (sibling > 0 && sibling >= dominant) {
                return Err(SynthError::infeasible(
                    &["purity_target", "sibling_target"],
                    format!(
                        "{dominant} dominant + {sibling} sibling patches must fit in k={} \
                         with the dominant share strictly larger",
                        self.k
                    ),
                ));
            }
            (unique, dominant, sibling)
        };
        Ok(Plan {
            global,
            relevant,
            unique,
            dominant,
            sibling,
        })
    }
}

pub(crate) const MASS_SHAPES: [&str; 5] = ["oval", "round", "irregular", "lobulated", "architectural_distortion"];
pub(crate) const MASS_MARGINS: [&str; 5] = ["circumscribed", "obscured", "microlobulated", "ill_defined", "spiculated"];
pub(crate) const CALC_MORPHOLOGIES: [&str; 10] = [
    "amorphous",
    "coarse",
    "dystrophic",
    "fine_linear_branching",
    "pleomorphic",
    "punctate",
    "round_and_regular",
    "lucent_centered",
    "vascular",
    "eggshell",
];
pub(crate) const CALC_DISTRIBUTIONS: [&str; 5] = ["clustered", "linear", "regional", "segmental", "diffusely_scattered"];

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::annotations::{AnnotatedImage, AnnotationSet, RoiAnnotation};
use crate::dump::{ActivationEntry, EvidenceDump, ImageActivationRecord, PrototypeRecord, Split};
use crate::error::SynthError;
use crate::geometry::{resolve_patch_box, PatchBox};
use crate::lexicon::{Level, Lexicon};
use crate::metrics::{IouDsc, LocalizationScores, PropertyScores, RunConfig, LOCALIZATION_TOP_N};

use super::spec::{Plan, SynthSpec, CALC_DISTRIBUTIONS, CALC_MORPHOLOGIES, MASS_MARGINS, MASS_SHAPES};

pub const LEDGER_FORMAT: &str = "pefcoh-ledger/1";

/// Gap kept between any two site patches, per side.
const SITE_MARGIN: i64 = 2;
const CLASS_NAMES: [&str; 2] = ["benign", "malignant"];

/// Planted per-prototype outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpectedVerdict {
    pub prototype_id: String,
    pub is_global: bool,
    pub is_relevant: bool,
    pub matched: usize,
    pub combined_category: Option<String>,
    pub align: Option<u8>,
}

/// Scores the generator planted, computed in closed form from the plan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthLedger {
    pub format: String,
    pub spec: SynthSpec,
    /// Config under which `scores` hold.
    pub config: RunConfig,
    pub scores: PropertyScores,
    pub prototypes: Vec<ExpectedVerdict>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthInstance {
    pub dump: EvidenceDump,
    pub annotations: AnnotationSet,
    pub lexicon: Lexicon,
    pub ledger: GroundTruthLedger,
}

#[derive(Clone, Copy, Debug)]
struct Category {
    mass: bool,
    values: [&'static str; 2],
}

impl Category {
    fn type_name(&self) -> &'static str {
        if self.mass {
            "mass"
        } else {
            "calcification"
        }
    }

    fn axes(&self) -> [&'static str; 2] {
        if self.mass {
            ["shape", "margin"]
        } else {
            ["morphology", "distribution"]
        }
    }

    fn combined(&self) -> String {
        format!("{}-{}-{}", self.type_name(), self.values[0], self.values[1])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum ClassMix {
    Pure,
    Tie,
    Majority(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Slot {
    Free,
    /// Reserved for activations that must not match any ROI.
    Empty,
    Roi(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Want {
    Category(usize),
    Empty,
}

struct Site {
    row: u32,
    col: u32,
    patch: PatchBox,
}

struct PlannedRoi {
    category: usize,
    bbox: PatchBox,
    class: usize,
}

struct PlannedImage {
    id: String,
    split: Split,
    slots: Vec<Slot>,
    /// `(prototype, score, site)`, at most one per prototype.
    entries: Vec<(usize, f64, usize)>,
    class_label: usize,
}

struct Builder<'a> {
    spec: &'a SynthSpec,
    rng: ChaCha8Rng,
    sites: Vec<Site>,
    pool: Vec<Category>,
    images: Vec<PlannedImage>,
    rois: Vec<PlannedRoi>,
}

/// Cells whose patches, grown by [`SITE_MARGIN`], are pairwise disjoint.
/// An ROI centered in one site's patch lies inside no other site's patch.
fn select_sites(spec: &SynthSpec) -> Vec<Site> {
    let grow = |b: &PatchBox| {
        (
            b.x_min - SITE_MARGIN,
            b.y_min - SITE_MARGIN,
            b.x_max + SITE_MARGIN,
            b.y_max + SITE_MARGIN,
        )
    };
    let mut sites: Vec<Site> = Vec::new();
    for row in 0..spec.feature_h {
        for col in 0..spec.feature_w {
            let patch = resolve_patch_box(
                row,
                col,
                spec.feature_h,
                spec.feature_w,
                spec.image_width,
                spec.image_height,
                spec.patch_size,
            );
            let g = grow(&patch);
            let clear = sites.iter().all(|s| {
                let o = grow(&s.patch);
                g.2 <= o.0 || o.2 <= g.0 || g.3 <= o.1 || o.3 <= g.1
            });
            if clear {
                sites.push(Site { row, col, patch });
            }
        }
    }
    sites
}

fn category_pool(rng: &mut ChaCha8Rng, spec: &SynthSpec) -> Vec<Category> {
    let mut draw = |mass: bool, a: &[&'static str], b: &[&'static str], n: usize| {
        let mut all: Vec<Category> = a
            .iter()
            .flat_map(|&x| b.iter().map(move |&y| Category { mass, values: [x, y] }))
            .collect();
        all.shuffle(rng);
        all.truncate(n);
        all
    };
    let mut pool = draw(true, &MASS_SHAPES, &MASS_MARGINS, spec.mass_categories);
    pool.extend(draw(
        false,
        &CALC_MORPHOLOGIES,
        &CALC_DISTRIBUTIONS,
        spec.calcification_categories,
    ));
    pool
}

impl Builder<'_> {
    fn sites_where(&self, image: usize, f: impl Fn(Slot) -> bool) -> Vec<usize> {
        self.images[image]
            .slots
            .iter()
            .enumerate()
            .filter(|(_, s)| f(**s))
            .map(|(i, _)| i)
            .collect()
    }

    fn plant_roi(&mut self, image: usize, site: usize, category: usize) {
        let patch = self.sites[site].patch;
        let shrink = |rng: &mut ChaCha8Rng, extent: i64| {
            let most = (extent - 1) / 2;
            rng.gen_range((extent / 40).min(most)..=(extent / 4).min(most))
        };
        let dx = shrink(&mut self.rng, patch.width());
        let dy = shrink(&mut self.rng, patch.height());
        // Symmetric shrink: the ROI center is the patch center.
        let bbox = PatchBox::new(
            patch.x_min + dx,
            patch.y_min + dy,
            patch.x_max - dx,
            patch.y_max - dy,
        );
        self.images[image].slots[site] = Slot::Roi(self.rois.len());
        self.rois.push(PlannedRoi {
            category,
            bbox,
            class: 0,
        });
    }

    fn reuse_sites(&self, image: usize, want: Want) -> Vec<usize> {
        match want {
            Want::Category(c) => {
                self.sites_where(image, |s| matches!(s, Slot::Roi(r) if self.rois[r].category == c))
            }
            Want::Empty => self.sites_where(image, |s| s == Slot::Empty),
        }
    }

    fn reusable(&self, image: usize, want: Want) -> bool {
        !self.reuse_sites(image, want).is_empty()
    }

    /// A site on `image` satisfying `want`, reusing a matching site first.
    fn place(&mut self, image: usize, want: Want) -> Option<usize> {
        let reuse = self.reuse_sites(image, want);
        if let Some(&site) = reuse.choose(&mut self.rng) {
            return Some(site);
        }
        let site = *self.sites_where(image, |s| s == Slot::Free).choose(&mut self.rng)?;
        match want {
            Want::Category(c) => self.plant_roi(image, site, c),
            Want::Empty => self.images[image].slots[site] = Slot::Empty,
        }
        Some(site)
    }
}

/// Builds a dump, annotations and lexicon whose scores under the ledger's
/// config are known in closed form. Deterministic in `spec`.
pub fn generate(spec: &SynthSpec) -> Result<SynthInstance, SynthError> {
    let plan = spec.plan()?;
    let sites = select_sites(spec);
    if sites.len() < 2 {
        return Err(SynthError::infeasible(
            &["patch_size", "image_width", "image_height", "feature_h", "feature_w"],
            format!(
                "only {} non-overlapping patch site(s) fit an image; need at least 2",
                sites.len()
            ),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let pool = category_pool(&mut rng, spec);
    let images = (0..spec.n_train_images)
        .map(|i| (format!("train-{i:03}"), Split::Train))
        .chain((0..spec.n_test_images).map(|i| (format!("test-{i:03}"), Split::Test)))
        .map(|(id, split)| PlannedImage {
            id,
            split,
            slots: vec![Slot::Free; sites.len()],
            entries: Vec::new(),
            class_label: 0,
        })
        .collect();
    let mut b = Builder {
        spec,
        rng,
        sites,
        pool,
        images,
        rois: Vec::new(),
    };
    let train: Vec<usize> = (0..spec.n_train_images).collect();
    let test: Vec<usize> = (spec.n_train_images..b.images.len()).collect();

    // Prototype roles.
    let n = spec.n_prototypes;
    let mut shuffled: Vec<usize> = (0..n).collect();
    shuffled.shuffle(&mut b.rng);
    let mut is_global = vec![true; n];
    for &p in &shuffled[..spec.n_zero_weight] {
        is_global[p] = false;
    }
    let mut globals: Vec<usize> = (0..n).filter(|&p| is_global[p]).collect();
    globals.shuffle(&mut b.rng);
    let mut relevant: Vec<usize> = globals[..plan.relevant].to_vec();
    relevant.sort_unstable();
    globals.sort_unstable();

    let mut cats: Vec<usize> = (0..b.pool.len()).collect();
    cats.shuffle(&mut b.rng);
    let distinct = &cats[..plan.unique];
    // (dominant, sibling) per prototype.
    let mut assigned: Vec<Option<(usize, Option<usize>)>> = vec![None; n];
    for (i, &p) in relevant.iter().enumerate() {
        let dom = if i < plan.unique {
            distinct[i]
        } else {
            distinct[b.rng.gen_range(0..plan.unique)]
        };
        let siblings: Vec<usize> = (0..b.pool.len())
            .filter(|&c| c != dom && b.pool[c].mass == b.pool[dom].mass)
            .collect();
        let side = if plan.sibling > 0 {
            siblings.choose(&mut b.rng).copied()
        } else {
            None
        };
        assigned[p] = Some((dom, side));
    }

    // Top-k train activations: planted scores sit above 2, all others below 1.
    let mut top_images: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &p in &globals {
        let mut wants = vec![Want::Empty; spec.k];
        if let Some((dom, side)) = assigned[p] {
            wants[..plan.dominant].fill(Want::Category(dom));
            if let Some(side) = side {
                wants[plan.dominant..plan.dominant + plan.sibling].fill(Want::Category(side));
            }
        }
        wants.shuffle(&mut b.rng);
        let mut remaining = train.clone();
        remaining.shuffle(&mut b.rng);
        for (rank, want) in wants.into_iter().enumerate() {
            // Reusing a matching site keeps free sites for later categories.
            let pos = remaining
                .iter()
                .position(|&im| b.reusable(im, want))
                .or_else(|| remaining.iter().position(|&im| b.images[im].slots.contains(&Slot::Free)));
            let Some(pos) = pos else {
                return Err(SynthError::infeasible(
                    &["n_train_images", "patch_size", "feature_h", "feature_w"],
                    "ran out of free patch sites while planting top-k evidence",
                ));
            };
            let image = remaining.remove(pos);
            let site = b.place(image, want).expect("image has a usable site");
            let score = 2.0 + (spec.k - rank) as f64 + 0.5 * spec.noise * b.rng.gen::<f64>();
            b.images[image].entries.push((p, score, site));
            top_images[p].push(image);
        }
    }

    // Test ROIs; the first test image always has one so localization is defined.
    for (i, &image) in test.iter().enumerate() {
        if i > 0 && b.rng.gen_bool(0.15) {
            continue;
        }
        let cap = spec.test_rois_max.min(b.sites.len() - 1).max(1);
        let count = b.rng.gen_range(1..=cap);
        for _ in 0..count {
            let category = b.rng.gen_range(0..b.pool.len());
            let free = b.sites_where(image, |s| s == Slot::Free);
            if let Some(&site) = free.choose(&mut b.rng) {
                b.plant_roi(image, site, category);
            }
        }
    }

    // Every pool category occurs at least once, so TC is the pool size.
    for c in 0..b.pool.len() {
        if b.rois.iter().any(|r| r.category == c) {
            continue;
        }
        let mut order: Vec<usize> = (0..b.images.len()).collect();
        order.shuffle(&mut b.rng);
        let spot = order.into_iter().find_map(|image| {
            b.sites_where(image, |s| s == Slot::Free)
                .first()
                .map(|&site| (image, site))
        });
        let Some((image, site)) = spot else {
            return Err(SynthError::infeasible(
                &["mass_categories", "calcification_categories", "n_train_images", "n_test_images"],
                "no free patch site left for every category",
            ));
        };
        b.plant_roi(image, site, c);
    }

    // ROI classes per category.
    let mut mix = vec![ClassMix::Pure; b.pool.len()];
    for (c, m) in mix.iter_mut().enumerate() {
        let mut members: Vec<usize> = (0..b.rois.len()).filter(|&r| b.rois[r].category == c).collect();
        members.shuffle(&mut b.rng);
        let count = members.len();
        let roll: f64 = b.rng.gen();
        let (kind, minority) = if count >= 3 && roll < 0.75 {
            let majority = b.rng.gen_range(0..2);
            (ClassMix::Majority(majority), b.rng.gen_range(1..=(count - 1) / 2))
        } else if count >= 2 && count.is_multiple_of(2) && roll < 0.85 {
            (ClassMix::Tie, count / 2)
        } else {
            (ClassMix::Pure, 0)
        };
        let base = match kind {
            ClassMix::Majority(m) => m,
            _ => b.rng.gen_range(0..2),
        };
        for (i, &r) in members.iter().enumerate() {
            b.rois[r].class = if i < minority { 1 - base } else { base };
        }
        *m = kind;
    }
    for image in 0..b.images.len() {
        let label = b.images[image]
            .slots
            .iter()
            .filter_map(|s| match s {
                Slot::Roi(r) => Some(b.rois[*r].class),
                _ => None,
            })
            .max();
        b.images[image].class_label = label.unwrap_or_else(|| b.rng.gen_range(0..2));
    }

    // Weights. Eligible prototypes align for a `class_specific_target` share.
    let mut eligible: Vec<usize> = relevant
        .iter()
        .copied()
        .filter(|&p| matches!(mix[assigned[p].unwrap().0], ClassMix::Majority(_)))
        .collect();
    eligible.shuffle(&mut b.rng);
    let n_aligned = (spec.class_specific_target * eligible.len() as f64).round() as usize;
    let mut align: Vec<Option<u8>> = vec![None; n];
    for (i, &p) in eligible.iter().enumerate() {
        align[p] = Some(u8::from(i < n_aligned));
    }
    let mut weights = vec![[0.0f64; 2]; n];
    for p in 0..n {
        let rng = &mut b.rng;
        let sign = |rng: &mut ChaCha8Rng| if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        weights[p] = if !is_global[p] {
            if rng.gen_bool(0.5) {
                [0.0, 0.0]
            } else {
                [1e-12, 0.0]
            }
        } else if let Some(a) = align[p] {
            let ClassMix::Majority(m) = mix[assigned[p].unwrap().0] else {
                unreachable!()
            };
            let (top, other) = if a == 1 { (m, 1 - m) } else { (1 - m, m) };
            let mut w = [0.0; 2];
            w[top] = rng.gen_range(0.6..=1.0);
            w[other] = sign(rng) * rng.gen_range(0.1..0.5);
            w
        } else {
            [
                sign(rng) * rng.gen_range(0.1..=1.0),
                sign(rng) * rng.gen_range(0.1..=1.0),
            ]
        };
    }

    // Background train activations, all scored below 1.
    for p in 0..n {
        for &image in &train {
            if top_images[p].contains(&image) || !b.rng.gen_bool(0.4) {
                continue;
            }
            let site = b.rng.gen_range(0..b.sites.len());
            let score = if !is_global[p] {
                b.rng.gen_range(0.0..5.0)
            } else if b.rng.gen_bool(0.1) {
                0.0
            } else {
                b.rng.gen_range(0.0..1.0)
            };
            b.images[image].entries.push((p, score, site));
        }
    }

    // Test activations: distinct contribution magnitudes, one unit apart.
    let m = spec.test_activations.min(plan.global);
    for &image in &test {
        let mut order = globals.clone();
        order.shuffle(&mut b.rng);
        let hits = b.sites_where(image, |s| matches!(s, Slot::Roi(_)));
        let misses = b.sites_where(image, |s| !matches!(s, Slot::Roi(_)));
        let class = b.images[image].class_label;
        for (j, &p) in order.iter().enumerate() {
            let hit = !hits.is_empty() && (misses.is_empty() || b.rng.gen_bool(spec.test_hit_rate));
            let site = *if hit { &hits } else { &misses }.choose(&mut b.rng).unwrap();
            let score = if j < m {
                let magnitude = (m - j) as f64 + 0.5 * spec.noise * b.rng.gen::<f64>();
                magnitude / weights[p][class].abs()
            } else if b.rng.gen_bool(0.3) {
                0.0
            } else {
                continue;
            };
            b.images[image].entries.push((p, score, site));
        }
        for p in (0..n).filter(|&p| !is_global[p]) {
            if b.rng.gen_bool(0.5) {
                let site = b.rng.gen_range(0..b.sites.len());
                let score = b.rng.gen_range(0.0..5.0);
                b.images[image].entries.push((p, score, site));
            }
        }
    }

    let ledger = ledger(&b, &plan, &is_global, &assigned, &align, &weights, m)?;
    let (dump, annotations) = materialize(&b, &weights);
    Ok(SynthInstance {
        dump,
        annotations,
        lexicon: Lexicon::birads(),
        ledger,
    })
}

fn prototype_id(p: usize) -> String {
    format!("p{p:03}")
}

fn materialize(b: &Builder, weights: &[[f64; 2]]) -> (EvidenceDump, AnnotationSet) {
    let spec = b.spec;
    let class_names: Vec<String> = CLASS_NAMES.iter().map(|s| s.to_string()).collect();
    let prototypes = weights
        .iter()
        .enumerate()
        .map(|(p, w)| PrototypeRecord {
            id: prototype_id(p),
            class_weights: w.to_vec(),
        })
        .collect();
    let mut dump_images = Vec::new();
    let mut ann_images = Vec::new();
    for im in &b.images {
        let mut entries = im.entries.clone();
        entries.sort_by_key(|e| e.0);
        dump_images.push(ImageActivationRecord {
            image_id: im.id.clone(),
            split: im.split,
            width: spec.image_width,
            height: spec.image_height,
            class_label: im.class_label,
            feature_h: spec.feature_h,
            feature_w: spec.feature_w,
            entries: entries
                .into_iter()
                .map(|(p, score, site)| ActivationEntry {
                    prototype_id: prototype_id(p),
                    score,
                    row: b.sites[site].row,
                    col: b.sites[site].col,
                })
                .collect(),
        });
        let rois = im
            .slots
            .iter()
            .filter_map(|s| match s {
                Slot::Roi(r) => Some(&b.rois[*r]),
                _ => None,
            })
            .map(|r| {
                let c = &b.pool[r.category];
                let axes = c.axes();
                RoiAnnotation {
                    bbox: [r.bbox.x_min, r.bbox.y_min, r.bbox.x_max, r.bbox.y_max],
                    abnormality_type: c.type_name().to_string(),
                    descriptors: (0..2)
                        .map(|i| (axes[i].to_string(), Some(c.values[i].to_string())))
                        .collect(),
                    roi_class: r.class,
                }
            })
            .collect();
        ann_images.push(AnnotatedImage {
            image_id: im.id.clone(),
            width: spec.image_width,
            height: spec.image_height,
            split: im.split,
            class_label: im.class_label,
            rois,
        });
    }
    let dump = EvidenceDump::new(
        &spec.model_name,
        spec.rng_seed,
        class_names.clone(),
        prototypes,
        dump_images,
    );
    (dump, AnnotationSet::new(class_names, ann_images))
}

/// IoU and DSC of selected site patches against the image's ROIs. Sites are
/// pairwise disjoint and each ROI lies inside its own site's patch, so the
/// unions and intersection are plain sums.
fn site_overlap(b: &Builder, image: &PlannedImage, selected: &[usize]) -> IouDsc {
    if selected.is_empty() {
        return IouDsc::default();
    }
    let mut inter = 0i64;
    let mut selected_area = 0i64;
    let mut roi_area = 0i64;
    let mut roi_outside = 0i64;
    for (site, slot) in image.slots.iter().enumerate() {
        let chosen = selected.contains(&site);
        if chosen {
            selected_area += b.sites[site].patch.area();
        }
        if let Slot::Roi(r) = slot {
            let a = b.rois[*r].bbox.area();
            roi_area += a;
            if chosen {
                inter += a;
            } else {
                roi_outside += a;
            }
        }
    }
    IouDsc {
        iou: inter as f64 / (selected_area + roi_outside) as f64,
        dsc: 2.0 * inter as f64 / (selected_area + roi_area) as f64,
    }
}

fn ledger(
    b: &Builder,
    plan: &Plan,
    is_global: &[bool],
    assigned: &[Option<(usize, Option<usize>)>],
    align: &[Option<u8>],
    weights: &[[f64; 2]],
    activated: usize,
) -> Result<GroundTruthLedger, SynthError> {
    let spec = b.spec;
    let lexicon = Lexicon::birads();
    let config = RunConfig {
        k: spec.k,
        patch_size: spec.patch_size,
        ..RunConfig::default()
    }
    .resolve(&lexicon)?;
    let n = spec.n_prototypes;
    let k = spec.k as f64;

    let tests: Vec<&PlannedImage> = b.images.iter().filter(|im| im.split == Split::Test).collect();
    let (mut pos, mut neg) = (0usize, 0usize);
    for im in &tests {
        for &(p, score, _) in &im.entries {
            if is_global[p] && score > 0.0 {
                if weights[p][im.class_label] > 0.0 {
                    pos += 1;
                } else {
                    neg += 1;
                }
            }
        }
    }

    let matched = |p: usize| match assigned[p] {
        Some((_, side)) => plan.dominant + if side.is_some() { plan.sibling } else { 0 },
        None => 0,
    };
    let relevant: Vec<usize> = (0..n).filter(|&p| assigned[p].is_some()).collect();
    let mut specialization_per_level = IndexMap::new();
    for name in &config.levels {
        let level = lexicon.resolve_level(name)?;
        let purity = |p: usize| {
            let (dom, side) = assigned[p].unwrap();
            let dom = &b.pool[dom];
            let shared = match &level {
                Level::Type => true,
                Level::Axis { type_name, axis } => {
                    if type_name != dom.type_name() {
                        return 0.0;
                    }
                    let i = dom.axes().iter().position(|a| a == axis).unwrap();
                    side.is_some_and(|s| b.pool[s].values[i] == dom.values[i])
                }
                Level::Combined => false,
            };
            let count = if shared { matched(p) } else { plan.dominant };
            count as f64 / k
        };
        let value = (!relevant.is_empty())
            .then(|| relevant.iter().map(|&p| purity(p)).sum::<f64>() / relevant.len() as f64);
        specialization_per_level.insert(name.clone(), value);
    }

    let eligible: Vec<u8> = align.iter().flatten().copied().collect();
    let class_specific = (!eligible.is_empty())
        .then(|| eligible.iter().map(|&a| f64::from(a)).sum::<f64>() / eligible.len() as f64);

    let mut rows = Vec::new();
    for im in tests.iter().filter(|im| im.slots.iter().any(|s| matches!(s, Slot::Roi(_)))) {
        let mut ranked: Vec<(f64, usize, usize)> = im
            .entries
            .iter()
            .filter(|e| is_global[e.0] && e.1 > 0.0)
            .map(|&(p, score, site)| ((score * weights[p][im.class_label]).abs(), p, site))
            .collect();
        ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        debug_assert_eq!(ranked.len(), activated);
        let take = |n: usize| -> Vec<usize> { ranked.iter().take(n).map(|r| r.2).collect() };
        rows.push([
            site_overlap(b, im, &take(1)),
            site_overlap(b, im, &take(LOCALIZATION_TOP_N)),
            site_overlap(b, im, &take(ranked.len())),
        ]);
    }
    let mean = |i: usize| {
        let count = rows.len() as f64;
        IouDsc {
            iou: rows.iter().map(|r| r[i].iou).sum::<f64>() / count,
            dsc: rows.iter().map(|r| r[i].dsc).sum::<f64>() / count,
        }
    };

    let scores = PropertyScores {
        total_prototypes: n,
        gp: plan.global,
        lp_positive: pos as f64 / tests.len() as f64,
        lp_negative: neg as f64 / tests.len() as f64,
        sparsity_ratio: spec.n_zero_weight as f64 / n as f64,
        relevant_prototypes: plan.relevant,
        relevance: plan.relevant as f64 / plan.global as f64,
        specialization_per_level,
        unique_categories: plan.unique,
        total_categories: b.pool.len(),
        uniqueness: (plan.relevant > 0).then(|| plan.unique as f64 / plan.relevant as f64),
        coverage: plan.unique as f64 / b.pool.len() as f64,
        class_specific,
        class_specific_support: eligible.len(),
        localization: LocalizationScores {
            top1: mean(0),
            top10: mean(1),
            all: mean(2),
            instances: rows.len(),
        },
    };
    let prototypes = (0..n)
        .map(|p| ExpectedVerdict {
            prototype_id: prototype_id(p),
            is_global: is_global[p],
            is_relevant: assigned[p].is_some(),
            matched: matched(p),
            combined_category: assigned[p].map(|(dom, _)| b.pool[dom].combined()),
            align: align[p],
        })
        .collect();
    Ok(GroundTruthLedger {
        format: LEDGER_FORMAT.to_string(),
        spec: spec.clone(),
        config,
        scores,
        prototypes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_sites_are_disjoint() {
        let sites = select_sites(&SynthSpec::default());
        assert_eq!(sites.len(), 9);
        for (i, a) in sites.iter().enumerate() {
            for b in &sites[i + 1..] {
                let apart = a.patch.x_max + 2 * SITE_MARGIN <= b.patch.x_min
                    || b.patch.x_max + 2 * SITE_MARGIN <= a.patch.x_min
                    || a.patch.y_max + 2 * SITE_MARGIN <= b.patch.y_min
                    || b.patch.y_max + 2 * SITE_MARGIN <= a.patch.y_min;
                assert!(apart);
            }
        }
    }

    #[test]
    fn deterministic_in_seed() {
        let spec = SynthSpec::default();
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
        let other = SynthSpec {
            rng_seed: spec.rng_seed + 1,
            ..spec.clone()
        };
        assert_ne!(generate(&spec).unwrap().dump, generate(&other).unwrap().dump);
    }

    #[test]
    fn planted_counts() {
        let inst = generate(&SynthSpec::default()).unwrap();
        let s = &inst.ledger.scores;
        assert_eq!((s.gp, s.relevant_prototypes, s.unique_categories), (18, 9, 5));
        assert_eq!(s.total_categories, 12);
        assert_eq!(s.relevance, 0.5);
        assert!(inst.dump.validate().iter().all(|i| !i.is_error()));
        assert!(inst.annotations.validate(&inst.lexicon).iter().all(|i| !i.is_error()));
    }

    #[test]
    fn too_few_sites() {
        let spec = SynthSpec {
            patch_size: 400,
            ..SynthSpec::default()
        };
        assert!(matches!(generate(&spec), Err(SynthError::Infeasible { .. })));
    }
}

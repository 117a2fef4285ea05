use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::annotations::AnnotationSet;
use crate::dump::{EvidenceDump, Split};
use crate::error::MetricError;
use crate::lexicon::{derive_category_universe, Level, Lexicon};

use super::{
    build_verdicts, class_specific, coverage, global_prototypes, local_prototypes, localization,
    relevance, specialization, top_k_evidence, unique_categories, uniqueness, LocalizationRow,
    PropertyScores, PrototypeVerdict, RunConfig, TcScope, TopKEvidence,
};

/// Everything one evaluation run produces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    /// The effective config, with defaults expanded.
    pub config: RunConfig,
    pub scores: PropertyScores,
    pub verdicts: Vec<PrototypeVerdict>,
    pub evidence: Vec<TopKEvidence>,
    pub localization_rows: Vec<LocalizationRow>,
    pub warnings: Vec<String>,
}

/// All seven properties for one dump. Pure and deterministic: equal inputs
/// give equal (and identically ordered) outputs.
pub fn evaluate(
    dump: &EvidenceDump,
    annotations: &AnnotationSet,
    lexicon: &Lexicon,
    config: &RunConfig,
) -> Result<Evaluation, MetricError> {
    let config = config.resolve(lexicon)?;
    let levels: Vec<Level> = config
        .levels
        .iter()
        .map(|l| lexicon.resolve_level(l))
        .collect::<Result<_, _>>()?;
    let class_level = lexicon.resolve_level(&config.class_specific_level)?;
    let mut warnings = Vec::new();

    let (gp, sparsity_ratio) = global_prototypes(dump, config.eps);
    let (lp_positive, lp_negative) = local_prototypes(dump, config.eps, config.lp_class)?;

    let evidence = top_k_evidence(
        dump,
        annotations,
        lexicon,
        config.k,
        config.patch_size,
        config.eps,
    )?;
    for e in evidence.iter().filter(|e| e.shortfall > 0) {
        warnings.push(format!(
            "prototype {}: only {} of k={} train activations",
            e.prototype_id,
            e.items.len(),
            e.k
        ));
    }
    let mut verdicts = build_verdicts(dump, &evidence, &levels, &class_level, config.k, config.eps);

    let relevance = relevance(&verdicts)?;
    let specialization_per_level: IndexMap<String, Option<f64>> = config
        .levels
        .iter()
        .map(|l| (l.clone(), specialization(&verdicts, l)))
        .collect();
    let uc = unique_categories(&verdicts);
    let total_categories = match config.tc_override {
        Some(tc) => tc,
        None => {
            let split = match config.tc_scope {
                TcScope::All => None,
                TcScope::Train => Some(Split::Train),
            };
            derive_category_universe(annotations, lexicon, &Level::Combined, split).len()
        }
    };
    let coverage = coverage(&verdicts, total_categories)?;

    let class_universe = derive_category_universe(annotations, lexicon, &class_level, None);
    let outcome = class_specific(&verdicts, &dump.prototype_weights(), &class_universe);
    for (v, align) in verdicts.iter_mut().zip(&outcome.aligns) {
        v.align = *align;
    }
    for id in &outcome.tied {
        warnings.push(format!(
            "prototype {id}: assigned category has tied class counts; excluded from class-specific"
        ));
    }

    let (localization, localization_rows) =
        localization(dump, annotations, config.patch_size, config.eps)?;

    let scores = PropertyScores {
        total_prototypes: dump.prototypes.len(),
        gp,
        lp_positive,
        lp_negative,
        sparsity_ratio,
        relevant_prototypes: verdicts.iter().filter(|v| v.is_relevant).count(),
        relevance,
        specialization_per_level,
        unique_categories: uc,
        total_categories,
        uniqueness: uniqueness(&verdicts),
        coverage,
        class_specific: outcome.score,
        class_specific_support: outcome.support,
        localization,
    };
    Ok(Evaluation {
        config,
        scores,
        verdicts,
        evidence,
        localization_rows,
        warnings,
    })
}

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::MetricError;

use super::{PropertyScores, RunConfig};

/// Mean and sample standard deviation of one property across runs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    /// `None` when the property is absent in every run.
    pub mean: Option<f64>,
    /// `(n - 1)`-denominator; `None` with fewer than two present values.
    pub std: Option<f64>,
    /// Runs in which the property was present.
    pub n: usize,
}

impl Stat {
    pub fn of(values: &[f64]) -> Stat {
        let n = values.len();
        if n == 0 {
            return Stat {
                mean: None,
                std: None,
                n,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = (n >= 2).then(|| {
            let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
            (ss / (n - 1) as f64).sqrt()
        });
        Stat {
            mean: Some(mean),
            std,
            n,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub config: RunConfig,
    pub runs: usize,
    pub properties: IndexMap<String, Stat>,
}

/// Per-property mean ± sample std over runs that share one config.
/// Absent values are skipped; each stat records how many runs had it.
pub fn aggregate(runs: &[(&RunConfig, &PropertyScores)]) -> Result<Aggregate, MetricError> {
    let Some((first, _)) = runs.first() else {
        return Err(MetricError::NoReports);
    };
    let mut mismatched: Vec<String> = Vec::new();
    for (config, _) in &runs[1..] {
        for field in first.diff(config) {
            if !mismatched.contains(&field) {
                mismatched.push(field);
            }
        }
    }
    if !mismatched.is_empty() {
        return Err(MetricError::MixedConfigs(mismatched));
    }

    let mut columns: IndexMap<String, Vec<f64>> = IndexMap::new();
    for (_, scores) in runs {
        for (key, value) in scores.flatten() {
            let column = columns.entry(key).or_default();
            if let Some(v) = value {
                column.push(v);
            }
        }
    }
    Ok(Aggregate {
        config: (*first).clone(),
        runs: runs.len(),
        properties: columns
            .into_iter()
            .map(|(k, values)| (k, Stat::of(&values)))
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::LocalizationScores;

    fn scores(relevance: f64, uniqueness: Option<f64>) -> PropertyScores {
        PropertyScores {
            total_prototypes: 10,
            gp: 10,
            lp_positive: 1.0,
            lp_negative: 0.0,
            sparsity_ratio: 0.0,
            relevant_prototypes: 1,
            relevance,
            specialization_per_level: IndexMap::new(),
            unique_categories: 1,
            total_categories: 4,
            uniqueness,
            coverage: 0.25,
            class_specific: None,
            class_specific_support: 0,
            localization: LocalizationScores::default(),
        }
    }

    #[test]
    fn mean_and_sample_std() {
        let cfg = RunConfig::default();
        let s = [scores(0.2, Some(1.0)), scores(0.3, None), scores(0.4, Some(0.5))];
        let runs: Vec<_> = s.iter().map(|s| (&cfg, s)).collect();
        let agg = aggregate(&runs).unwrap();
        let rel = agg.properties["relevance"];
        assert!((rel.mean.unwrap() - 0.3).abs() < 1e-12);
        assert!((rel.std.unwrap() - 0.1).abs() < 1e-12);
        assert_eq!(rel.n, 3);
        let uniq = agg.properties["uniqueness"];
        assert_eq!((uniq.mean, uniq.n), (Some(0.75), 2));
        let cs = agg.properties["class_specific"];
        assert_eq!((cs.mean, cs.std, cs.n), (None, None, 0));
    }

    #[test]
    fn identical_runs_have_zero_std() {
        let cfg = RunConfig::default();
        let s = scores(0.3, Some(0.5));
        let agg = aggregate(&[(&cfg, &s), (&cfg, &s), (&cfg, &s)]).unwrap();
        assert!(agg.properties.values().all(|st| st.std.is_none_or(|v| v == 0.0)));
    }

    #[test]
    fn single_run_has_no_std() {
        let cfg = RunConfig::default();
        let s = scores(0.3, Some(0.5));
        let agg = aggregate(&[(&cfg, &s)]).unwrap();
        assert_eq!(agg.properties["relevance"].std, None);
        assert_eq!(agg.runs, 1);
    }

    #[test]
    fn mixed_configs_rejected() {
        let a = RunConfig::default();
        let b = RunConfig {
            k: 5,
            ..RunConfig::default()
        };
        let s = scores(0.3, None);
        assert_eq!(
            aggregate(&[(&a, &s), (&b, &s)]).unwrap_err(),
            MetricError::MixedConfigs(vec!["k".into()])
        );
        assert_eq!(aggregate(&[]).unwrap_err(), MetricError::NoReports);
    }
}

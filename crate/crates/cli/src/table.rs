//! Model comparison table with the property rows of the framework.

use indexmap::IndexMap;
use pefcoh_core::metrics::{aggregate, Stat};
use pefcoh_core::{MetricError, RunConfig};
use serde::Serialize;

use crate::report::Loaded;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Lower,
    Higher,
}

impl Direction {
    fn arrow(self) -> &'static str {
        match self {
            Direction::Lower => "↓",
            Direction::Higher => "↑",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Display {
    Count,
    Fraction,
    Percent,
}

impl Display {
    fn render(self, v: f64) -> String {
        match self {
            Display::Count => format!("{v:.0}"),
            Display::Fraction => format!("{v:.2}"),
            Display::Percent => format!("{:.0}%", v * 100.0),
        }
    }

    /// The value as displayed, for ranking.
    fn rounded(self, v: f64) -> f64 {
        match self {
            Display::Count => v.round(),
            Display::Fraction | Display::Percent => (v * 100.0).round(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Row {
    pub label: String,
    pub depth: u8,
    /// Property key; `None` for section headers.
    pub key: Option<String>,
    pub direction: Option<Direction>,
    /// Whether the label carries the direction arrow.
    pub marked: bool,
    pub display: Display,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Column {
    pub model: String,
    pub runs: usize,
    pub stats: IndexMap<String, Stat>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonTable {
    pub config: RunConfig,
    pub rows: Vec<Row>,
    pub columns: Vec<Column>,
}

pub fn level_label(level: &str) -> String {
    match level {
        "type" => "Abnorm. Type".into(),
        "mass/shape" => "Mass Shape".into(),
        "mass/margin" => "Mass Margin".into(),
        "calcification/morphology" => "Calc. Morph.".into(),
        "calcification/distribution" => "Calc. Distribution".into(),
        "combined" => "Combined".into(),
        other => other
            .split(['/', '_'])
            .map(|w| {
                let mut c = w.chars();
                c.next()
                    .map(|f| f.to_uppercase().chain(c).collect::<String>())
                    .unwrap_or_default()
            })
            .collect::<Vec<_>>()
            .join(" "),
    }
}

/// Row layout: compactness, relevance, specialization per level,
/// uniqueness, coverage, class-specific, localization.
pub fn rows(levels: &[String]) -> Vec<Row> {
    use Direction::{Higher, Lower};
    let row = |label: &str, depth, key: Option<&str>, direction, marked, display| Row {
        label: label.to_string(),
        depth,
        key: key.map(str::to_string),
        direction,
        marked,
        display,
    };
    let mut out = vec![
        row("Compactness", 0, None, None, false, Display::Count),
        row("Global", 1, Some("compactness.global"), Some(Lower), true, Display::Count),
        row("Local", 1, None, Some(Lower), true, Display::Count),
        row("Positive", 2, Some("compactness.local.positive"), Some(Lower), false, Display::Count),
        row("Negative", 2, Some("compactness.local.negative"), Some(Lower), false, Display::Count),
        row("Sparsity", 1, Some("compactness.sparsity"), Some(Higher), true, Display::Percent),
        row("Relevance", 0, Some("relevance"), Some(Higher), true, Display::Fraction),
        row("Specialization", 0, None, Some(Higher), true, Display::Fraction),
    ];
    for level in levels {
        out.push(Row {
            label: level_label(level),
            depth: 1,
            key: Some(format!("specialization.{level}")),
            direction: Some(Higher),
            marked: false,
            display: Display::Fraction,
        });
    }
    out.extend([
        row("Uniqueness", 0, Some("uniqueness"), Some(Higher), true, Display::Fraction),
        row("Coverage", 0, Some("coverage"), Some(Higher), true, Display::Fraction),
        row("Class-specific", 0, Some("class_specific"), Some(Higher), true, Display::Fraction),
        row("Localization", 0, None, Some(Higher), true, Display::Fraction),
    ]);
    for (metric, m) in [("IoU", "iou"), ("DSC", "dsc")] {
        for (sup, n) in [("¹", "top1"), ("¹⁰", "top10"), ("ᴬˡˡ", "all")] {
            out.push(Row {
                label: format!("{metric}{sup}"),
                depth: 1,
                key: Some(format!("localization.{m}.{n}")),
                direction: Some(Higher),
                marked: false,
                display: Display::Fraction,
            });
        }
    }
    out
}

/// Reports are grouped into one column per model name, in order of first
/// appearance; each aggregate file is a column of its own.
pub fn build(inputs: Vec<Loaded>) -> Result<ComparisonTable, MetricError> {
    enum Pending {
        Reports(String, Vec<(RunConfig, pefcoh_core::PropertyScores)>),
        Ready(Column, RunConfig),
    }
    let mut pending: Vec<Pending> = Vec::new();
    for input in inputs {
        match input {
            Loaded::Report(r) => {
                let run = (r.evaluation.config, r.evaluation.scores);
                let group = pending
                    .iter_mut()
                    .find_map(|p| match p {
                        Pending::Reports(name, runs) if *name == r.model_name => Some(runs),
                        _ => None,
                    });
                match group {
                    Some(runs) => runs.push(run),
                    None => pending.push(Pending::Reports(r.model_name, vec![run])),
                }
            }
            Loaded::Aggregate(a) => pending.push(Pending::Ready(
                Column {
                    model: a.model_names.join("+"),
                    runs: a.aggregate.runs,
                    stats: a.aggregate.properties,
                },
                a.aggregate.config,
            )),
        }
    }
    let mut columns = Vec::new();
    let mut configs = Vec::new();
    for p in pending {
        match p {
            Pending::Reports(model, runs) => {
                let refs: Vec<_> = runs.iter().map(|(c, s)| (c, s)).collect();
                let agg = aggregate(&refs)?;
                configs.push(agg.config);
                columns.push(Column {
                    model,
                    runs: agg.runs,
                    stats: agg.properties,
                });
            }
            Pending::Ready(column, config) => {
                configs.push(config);
                columns.push(column);
            }
        }
    }
    let Some(config) = configs.first().cloned() else {
        return Err(MetricError::NoReports);
    };
    let mut mismatched: Vec<String> = Vec::new();
    for other in &configs[1..] {
        for field in config.diff(other) {
            if !mismatched.contains(&field) {
                mismatched.push(field);
            }
        }
    }
    if !mismatched.is_empty() {
        return Err(MetricError::MixedConfigs(mismatched));
    }
    Ok(ComparisonTable {
        rows: rows(&config.levels),
        config,
        columns,
    })
}

impl ComparisonTable {
    fn stat(&self, column: &Column, row: &Row) -> Option<Stat> {
        row.key
            .as_ref()
            .and_then(|k| column.stats.get(k))
            .filter(|s| s.mean.is_some())
            .copied()
    }

    /// Columns holding the best displayed mean of a row.
    fn best(&self, row: &Row) -> Vec<bool> {
        let none = vec![false; self.columns.len()];
        let Some(direction) = row.direction.filter(|_| self.columns.len() > 1 && row.key.is_some()) else {
            return none;
        };
        let shown: Vec<Option<f64>> = self
            .columns
            .iter()
            .map(|c| self.stat(c, row).and_then(|s| s.mean).map(|m| row.display.rounded(m)))
            .collect();
        let target = shown.iter().flatten().copied().reduce(match direction {
            Direction::Lower => f64::min,
            Direction::Higher => f64::max,
        });
        match target {
            Some(t) => shown.iter().map(|v| *v == Some(t)).collect(),
            None => none,
        }
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::from("| Property |");
        for c in &self.columns {
            out.push_str(&format!(" {} |", c.model));
        }
        out.push_str("\n| :-- |");
        out.push_str(&" :-: |".repeat(self.columns.len()));
        out.push('\n');
        for row in &self.rows {
            let mut label = "&emsp;".repeat(usize::from(row.depth));
            if row.depth == 0 {
                label.push_str(&format!("*{}*", row.label));
            } else {
                label.push_str(&row.label);
            }
            if let (true, Some(d)) = (row.marked, row.direction) {
                label.push(' ');
                label.push_str(d.arrow());
            }
            out.push_str(&format!("| {label} |"));
            let best = self.best(row);
            for (c, is_best) in self.columns.iter().zip(best) {
                let cell = match (&row.key, self.stat(c, row)) {
                    (None, _) => String::new(),
                    (Some(_), None) => "—".to_string(),
                    (Some(_), Some(s)) => {
                        let mean = row.display.render(s.mean.unwrap_or_default());
                        let mean = if is_best { format!("**{mean}**") } else { mean };
                        match s.std {
                            Some(sd) => format!("{mean} ± {}", row.display.render(sd)),
                            None => mean,
                        }
                    }
                };
                out.push_str(&format!(" {cell} |"));
            }
            out.push('\n');
        }
        let runs: Vec<String> = self
            .columns
            .iter()
            .map(|c| format!("{}: {}", c.model, c.runs))
            .collect();
        out.push_str(&format!(
            "\nMean ± sample std over runs ({}). k = {}, patch size = {}.\n",
            runs.join(", "),
            self.config.k,
            self.config.patch_size
        ));
        out
    }

    /// One line per property at full precision; absent values are empty.
    pub fn to_csv(&self) -> Result<String, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["property".to_string(), "key".into(), "direction".into()];
        for c in &self.columns {
            header.extend([
                format!("{} mean", c.model),
                format!("{} std", c.model),
                format!("{} n", c.model),
            ]);
        }
        w.write_record(&header)?;
        for row in self.rows.iter().filter(|r| r.key.is_some()) {
            let mut record = vec![
                row.label.clone(),
                row.key.clone().unwrap_or_default(),
                match row.direction {
                    Some(Direction::Lower) => "lower".into(),
                    Some(Direction::Higher) => "higher".into(),
                    None => String::new(),
                },
            ];
            for c in &self.columns {
                let s = row.key.as_ref().and_then(|k| c.stats.get(k));
                let num = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
                record.push(num(s.and_then(|s| s.mean)));
                record.push(num(s.and_then(|s| s.std)));
                record.push(s.map(|s| s.n.to_string()).unwrap_or_default());
            }
            w.write_record(&record)?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stat(mean: Option<f64>, std: Option<f64>) -> Stat {
        Stat {
            mean,
            std,
            n: usize::from(mean.is_some()),
        }
    }

    fn table(values: &[(&str, Option<f64>)]) -> ComparisonTable {
        let config = RunConfig {
            levels: vec!["type".into()],
            ..RunConfig::default()
        };
        ComparisonTable {
            rows: rows(&config.levels),
            config,
            columns: values
                .iter()
                .map(|(model, v)| Column {
                    model: model.to_string(),
                    runs: 1,
                    stats: [("relevance".to_string(), stat(*v, None))].into_iter().collect(),
                })
                .collect(),
        }
    }

    #[test]
    fn labels_for_birads_levels() {
        assert_eq!(level_label("calcification/morphology"), "Calc. Morph.");
        assert_eq!(level_label("lesion/border_shape"), "Lesion Border Shape");
    }

    #[test]
    fn best_ties_all_bold() {
        let md = table(&[("a", Some(0.131)), ("b", Some(0.129)), ("c", Some(0.1))]).to_markdown();
        let line = md.lines().find(|l| l.contains("Relevance")).unwrap();
        assert_eq!(line, "| *Relevance* ↑ | **0.13** | **0.13** | 0.10 |");
    }

    #[test]
    fn single_model_has_no_highlight() {
        let md = table(&[("a", Some(0.5))]).to_markdown();
        assert!(md.contains("| *Relevance* ↑ | 0.50 |"));
    }

    #[test]
    fn absent_value_renders_dash() {
        let md = table(&[("a", None), ("b", Some(0.2))]).to_markdown();
        assert!(md.contains("| *Relevance* ↑ | — | **0.20** |"));
        // properties the column lacks entirely are absent too
        assert!(md.contains("| &emsp;IoU¹ | — | — |"));
    }

    #[test]
    fn csv_keeps_full_precision() {
        let csv = table(&[("a", Some(1.0 / 3.0))]).to_csv().unwrap();
        assert!(csv.contains("Relevance,relevance,higher,0.3333333333333333,,1"));
    }

    #[test]
    fn percent_and_counts() {
        assert_eq!(Display::Percent.render(0.88), "88%");
        assert_eq!(Display::Count.render(314.4), "314");
    }
}

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use pefcoh_core::io::{read_json, to_json_string};
use pefcoh_core::metrics::aggregate;
use pefcoh_core::synth::{generate, SynthSpec};
use pefcoh_core::{cross_validate, evaluate as run_evaluation, AnnotationSet, EvidenceDump, InputError, Issue, Lexicon};
use rayon::prelude::*;

use crate::args::{CompareArgs, EvaluateArgs, Format, InputArgs, SynthArgs};
use crate::report::{load, tool_version, AggregateFile, Inputs, Loaded, Report, AGGREGATE_FORMAT, REPORT_FORMAT};
use crate::{table, CliError};

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).with_context(|| format!("failed to write {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).with_context(|| format!("failed to create {}", dir.display()))?;
    Ok(())
}

fn timestamp(fixed: Option<&str>) -> Result<String, CliError> {
    match fixed {
        Some(t) => chrono::DateTime::parse_from_rfc3339(t)
            .map(|_| t.to_string())
            .map_err(|e| CliError::Invalid(format!("--fixed-timestamp `{t}`: {e}"))),
        None => Ok(chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)),
    }
}

/// Lexicon from `path`, or derived from the annotations, plus the validated
/// annotation set.
fn load_inputs(annotations: &Path, lexicon: Option<&Path>) -> Result<(Lexicon, AnnotationSet), InputError> {
    match lexicon {
        Some(path) => {
            let lexicon = Lexicon::parse(path)?;
            let ann = AnnotationSet::parse(annotations, &lexicon)?;
            Ok((lexicon, ann))
        }
        None => {
            let ann = AnnotationSet::parse_unchecked(annotations)?;
            let lexicon = Lexicon::derive(&ann);
            let issues = ann.validate(&lexicon);
            if issues.iter().any(Issue::is_error) {
                return Err(InputError::Invalid {
                    path: annotations.to_path_buf(),
                    issues,
                });
            }
            Ok((lexicon, ann))
        }
    }
}

/// Every issue of a failed load, one line each.
fn issue_lines(e: &InputError) -> Vec<(bool, String)> {
    match e {
        InputError::Invalid { path, issues } => issues
            .iter()
            .map(|i| (i.is_error(), format!("{}: {i}", path.display())))
            .collect(),
        other => vec![(true, format!("error: {other}"))],
    }
}

pub fn validate(args: &InputArgs) -> Result<(), CliError> {
    let mut lines: Vec<(bool, String)> = Vec::new();
    let mut io_failure = false;
    let mut record = |e: &InputError, lines: &mut Vec<(bool, String)>| {
        io_failure |= !e.is_validation();
        lines.extend(issue_lines(e));
    };
    let inputs = match load_inputs(&args.annotations, args.lexicon.as_deref()) {
        Ok(v) => Some(v),
        Err(e) => {
            record(&e, &mut lines);
            None
        }
    };
    for path in &args.dump {
        match EvidenceDump::parse(path) {
            Ok(dump) => {
                if let Some((_, ann)) = &inputs {
                    for issue in cross_validate(&dump, ann) {
                        lines.push((issue.is_error(), format!("{}: {issue}", path.display())));
                    }
                }
            }
            Err(e) => record(&e, &mut lines),
        }
    }
    let errors = lines.iter().filter(|(is_error, _)| *is_error).count();
    for (_, line) in &lines {
        println!("{line}");
    }
    if io_failure {
        return Err(anyhow::anyhow!("{errors} error(s); some inputs could not be read").into());
    }
    if errors > 0 {
        return Err(CliError::Invalid(format!("{errors} validation error(s)")));
    }
    println!("OK");
    Ok(())
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dump".into())
}

pub fn evaluate(args: &EvaluateArgs) -> Result<(), CliError> {
    let generated_at = timestamp(args.output.fixed_timestamp.as_deref())?;
    let (lexicon, annotations) = load_inputs(&args.input.annotations, args.input.lexicon.as_deref())?;
    let config = args.config().resolve(&lexicon).map_err(|e| CliError::Invalid(e.to_string()))?;

    let mut dumps = Vec::new();
    for path in &args.input.dump {
        let dump = EvidenceDump::parse(path)?;
        let issues = cross_validate(&dump, &annotations);
        if issues.iter().any(Issue::is_error) {
            return Err(InputError::Invalid {
                path: path.clone(),
                issues,
            }
            .into());
        }
        let warnings: Vec<String> = issues.iter().map(ToString::to_string).collect();
        for w in &warnings {
            log::warn!("{}: {w}", path.display());
        }
        dumps.push((path, dump, warnings));
    }

    let evaluations: Vec<_> = dumps
        .par_iter()
        .map(|(path, dump, _)| {
            run_evaluation(dump, &annotations, &lexicon, &config)
                .with_context(|| format!("evaluating {}", path.display()))
        })
        .collect();

    create_dir(&args.out)?;
    let mut reports = Vec::new();
    let mut names = Vec::new();
    for (i, ((path, dump, input_warnings), evaluation)) in dumps.iter().zip(evaluations).enumerate() {
        let mut evaluation = evaluation?;
        let mut warnings = input_warnings.clone();
        warnings.append(&mut evaluation.warnings);
        evaluation.warnings = warnings;
        let report = Report {
            format: REPORT_FORMAT.to_string(),
            generated_at: generated_at.clone(),
            tool_version: tool_version(),
            model_name: dump.model_name.clone(),
            seed: dump.seed,
            inputs: Inputs {
                dump: display(path),
                annotations: display(&args.input.annotations),
                lexicon: args.input.lexicon.as_deref().map(display),
            },
            evaluation,
        };
        let name = format!("report-{i:02}-{}.json", stem(path));
        write(&args.out.join(&name), &to_json_string(&report))?;
        names.push(name);
        reports.push(report);
    }

    let runs: Vec<_> = reports
        .iter()
        .map(|r| (&r.evaluation.config, &r.evaluation.scores))
        .collect();
    let mut model_names: Vec<String> = Vec::new();
    for r in &reports {
        if !model_names.contains(&r.model_name) {
            model_names.push(r.model_name.clone());
        }
    }
    let aggregate = AggregateFile {
        format: AGGREGATE_FORMAT.to_string(),
        generated_at,
        tool_version: tool_version(),
        model_names,
        reports: names.clone(),
        aggregate: aggregate(&runs).context("aggregating reports")?,
    };
    write(&args.out.join("aggregate.json"), &to_json_string(&aggregate))?;

    if args.output.formats.contains(&Format::Csv) {
        write(&args.out.join("scores.csv"), &scores_csv(&names, &reports)?)?;
        write(&args.out.join("localization.csv"), &localization_csv(&names, &reports)?)?;
    }
    if args.output.formats.contains(&Format::Markdown) {
        let loaded = reports.into_iter().map(|r| Loaded::Report(Box::new(r))).collect();
        let table = table::build(loaded).context("building comparison table")?;
        write(&args.out.join("comparison.md"), &table.to_markdown())?;
    }
    Ok(())
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String, CliError> {
    let bytes = w.into_inner().map_err(|e| anyhow::anyhow!("csv: {}", e.error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Long format: one line per (report, property).
fn scores_csv(names: &[String], reports: &[Report]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| anyhow::anyhow!("csv: {e}");
    w.write_record(["report", "model_name", "seed", "property", "value"]).map_err(csv_err)?;
    for (name, r) in names.iter().zip(reports) {
        for (key, value) in r.evaluation.scores.flatten() {
            w.write_record([
                name.as_str(),
                &r.model_name,
                &r.seed.to_string(),
                &key,
                &value.map(|v| v.to_string()).unwrap_or_default(),
            ])
            .map_err(csv_err)?;
        }
    }
    finish_csv(w)
}

/// Per-image localization rows, ready for plotting.
fn localization_csv(names: &[String], reports: &[Report]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| anyhow::anyhow!("csv: {e}");
    w.write_record([
        "report", "model_name", "image_id", "rois", "activated", "iou_top1", "iou_top10", "iou_all",
        "dsc_top1", "dsc_top10", "dsc_all",
    ])
    .map_err(csv_err)?;
    for (name, r) in names.iter().zip(reports) {
        for row in &r.evaluation.localization_rows {
            let mut rec = vec![
                name.clone(),
                r.model_name.clone(),
                row.image_id.clone(),
                row.rois.to_string(),
                row.activated.to_string(),
            ];
            rec.extend([row.top1, row.top10, row.all].iter().map(|v| v.iou.to_string()));
            rec.extend([row.top1, row.top10, row.all].iter().map(|v| v.dsc.to_string()));
            w.write_record(&rec).map_err(csv_err)?;
        }
    }
    finish_csv(w)
}

pub fn compare(args: &CompareArgs) -> Result<(), CliError> {
    let loaded = args.reports.iter().map(|p| load(p)).collect::<Result<Vec<_>, _>>()?;
    let table = table::build(loaded)?;
    let Some(out) = &args.out else {
        print!("{}", table.to_markdown());
        return Ok(());
    };
    create_dir(out)?;
    let formats = if args.formats.is_empty() {
        vec![Format::Markdown, Format::Csv]
    } else {
        args.formats.clone()
    };
    if formats.contains(&Format::Markdown) {
        write(&out.join("comparison.md"), &table.to_markdown())?;
    }
    if formats.contains(&Format::Csv) {
        let csv = table.to_csv().map_err(|e| anyhow::anyhow!("csv: {e}"))?;
        write(&out.join("comparison.csv"), &csv)?;
    }
    if formats.contains(&Format::Json) {
        write(&out.join("comparison.json"), &to_json_string(&table))?;
    }
    Ok(())
}

pub fn synth(args: &SynthArgs) -> Result<(), CliError> {
    let mut spec: SynthSpec = match &args.spec {
        Some(path) => read_json(path)?,
        None => SynthSpec::default(),
    };
    if let Some(seed) = args.seed {
        spec.rng_seed = seed;
    }
    if let Some(name) = &args.model_name {
        spec.model_name = name.clone();
    }
    let inst = generate(&spec)?;
    create_dir(&args.out)?;
    let files: [(&str, String); 4] = [
        ("dump.json", to_json_string(&inst.dump)),
        ("annotations.json", to_json_string(&inst.annotations)),
        ("lexicon.json", to_json_string(&inst.lexicon)),
        ("ledger.json", to_json_string(&inst.ledger)),
    ];
    for (name, contents) in files {
        write(&PathBuf::from(&args.out).join(name), &contents)?;
    }
    Ok(())
}

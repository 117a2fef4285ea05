#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn pefcoh(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pefcoh"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "off")
        .output()
        .expect("binary runs")
}

/// Runs a command and panics with its stderr on failure.
pub fn ok(dir: &Path, args: &[&str]) -> String {
    let out = pefcoh(dir, args);
    assert!(
        out.status.success(),
        "pefcoh {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Spec overrides for the three synthetic models of the comparison.
pub const MODELS: [(&str, &str); 3] = [
    ("model-a", r#"{"model_name": "model-a"}"#),
    (
        "model-b",
        r#"{"model_name": "model-b", "relevance_target": 0.3, "purity_target": 0.8, "sibling_target": 0.1, "uniqueness_target": 0.9, "class_specific_target": 0.4}"#,
    ),
    (
        "model-c",
        r#"{"model_name": "model-c", "n_zero_weight": 12, "relevance_target": 0.75, "purity_target": 0.5, "uniqueness_target": 0.4, "test_activations": 6, "test_hit_rate": 0.8}"#,
    ),
];
pub const SEEDS: [u64; 3] = [11, 12, 13];

/// synth + evaluate for every (model, seed), then compare. All paths are
/// relative to `dir`.
pub fn pipeline(dir: &Path) {
    for (model, spec) in MODELS {
        std::fs::write(dir.join(format!("{model}.json")), spec).unwrap();
        for seed in SEEDS {
            let data = format!("data/{model}/{seed}");
            ok(dir, &["synth", "--spec", &format!("{model}.json"), "--seed", &seed.to_string(), "--out", &data]);
            ok(
                dir,
                &[
                    "evaluate",
                    "--dump",
                    &format!("{data}/dump.json"),
                    "--annotations",
                    &format!("{data}/annotations.json"),
                    "--lexicon",
                    &format!("{data}/lexicon.json"),
                    "--out",
                    &format!("reports/{model}/{seed}"),
                    "--format",
                    "csv",
                    "--fixed-timestamp",
                ],
            );
        }
    }
    let mut args = vec!["compare".to_string()];
    for (model, _) in MODELS {
        for seed in SEEDS {
            args.push(format!("reports/{model}/{seed}/report-00-dump.json"));
        }
    }
    args.extend(["--out".into(), "comparison".into(), "--format".into(), "markdown".into(), "--format".into(), "csv".into()]);
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    ok(dir, &args);
}

/// Every file under `root`, keyed by relative path.
pub fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

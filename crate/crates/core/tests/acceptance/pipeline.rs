//! Pipeline determinism through the command-line entry point.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use edge_unlearn::harness::run_cli;
use serde_json::Value;

use crate::Outcome;

/// Drops every object key that names a wall-clock measurement.
fn strip_wall_time(v: &mut Value) {
    match v {
        Value::Object(map) => {
            map.retain(|k, _| !k.contains("wall_time"));
            map.values_mut().for_each(strip_wall_time);
        }
        Value::Array(items) => items.iter_mut().for_each(strip_wall_time),
        _ => {}
    }
}

fn comparable(path: &Path) -> String {
    let text = fs::read_to_string(path).unwrap();
    if path.extension().is_some_and(|e| e == "json") {
        let mut v: Value = serde_json::from_str(&text).unwrap();
        strip_wall_time(&mut v);
        serde_json::to_string(&v).unwrap()
    } else {
        text
    }
}

fn listing(dir: &Path) -> BTreeSet<String> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect()
}

pub fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("config.json");
    fs::write(
        &config,
        r#"{
  "sbm_blocks": 3,
  "sbm_nodes_per_block": 40,
  "sbm_p_in": 0.15,
  "sbm_p_out": 0.01,
  "feature_dim": 16,
  "backbone": "gat",
  "hidden_dim": 16,
  "out_dim": 16,
  "epochs": 40,
  "gnndelete_epochs": 10,
  "forget_ratios": [0.01, 0.05],
  "runs": 2,
  "base_seed": 17
}"#,
    )
    .unwrap();
    let mut codes = Vec::new();
    for name in ["a", "b"] {
        let out = tmp.path().join(name);
        let args = [
            "eub",
            "run",
            "--config",
            config.to_str().unwrap(),
            "--output-dir",
            out.to_str().unwrap(),
        ];
        codes.push(run_cli(args, &mut Vec::new(), &mut Vec::new()));
    }
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    if codes != [0, 0] {
        return Outcome::new(false, format!("exit codes {codes:?}"));
    }
    let files = listing(&a);
    if files != listing(&b) {
        return Outcome::new(false, "output file sets differ");
    }
    let differing: Vec<&String> = files
        .iter()
        .filter(|f| comparable(&a.join(f)) != comparable(&b.join(f)))
        .collect();
    Outcome::new(
        differing.is_empty(),
        format!("{} files compared, differing: {differing:?}", files.len()),
    )
}

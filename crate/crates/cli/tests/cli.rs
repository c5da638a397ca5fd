//! End-to-end runs of the `rhp` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const GOOD: &str = r#"[model]
family = "gamma"
params = { shape = 2.0, rate = 1.0 }

[kernel]
family = "exponential"
params = { alpha = 0.5, beta = 1.0 }

[sim]
horizon = 30.0
reps = 50
seed = 3
"#;

fn rhp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rhp")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn config_hash(cfg: &Path) -> String {
    let out = rhp(&["renewal-table", "--config", s(cfg), "--horizon", "1"]);
    let text = String::from_utf8(out.stdout).unwrap();
    text.lines()
        .find_map(|l| l.strip_prefix("# config_hash="))
        .unwrap()
        .to_string()
}

type Row = (f64, String, u64, Option<u64>, u64, u64);

fn jsonl_rows(text: &str) -> (Value, Vec<Row>) {
    let mut lines = text.lines();
    let header: Value = serde_json::from_str(lines.next().unwrap()).unwrap();
    let rows = lines
        .map(|l| {
            let v: Value = serde_json::from_str(l).unwrap();
            (
                v["t"].as_f64().unwrap(),
                v["kind"].as_str().unwrap().to_string(),
                v["gen"].as_u64().unwrap(),
                v["parent"].as_u64(),
                v["cluster"].as_u64().unwrap(),
                v["rep"].as_u64().unwrap(),
            )
        })
        .collect();
    (header, rows)
}

fn csv_rows(text: &str) -> (Vec<(String, String)>, Vec<Row>) {
    let comments = text
        .lines()
        .filter_map(|l| l.strip_prefix("# "))
        .map(|l| {
            let (k, v) = l.split_once('=').unwrap();
            (k.to_string(), v.to_string())
        })
        .collect();
    let mut body = text.lines().filter(|l| !l.starts_with('#'));
    assert_eq!(body.next().unwrap(), "t,kind,gen,parent,cluster,rep");
    let rows = body
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (
                f[0].parse().unwrap(),
                f[1].to_string(),
                f[2].parse().unwrap(),
                f[3].parse().ok(),
                f[4].parse().unwrap(),
                f[5].parse().unwrap(),
            )
        })
        .collect();
    (comments, rows)
}

#[test]
fn two_replicates_in_both_formats() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "good.toml", &GOOD.replace("reps = 50", "reps = 2"));
    let jsonl = dir.path().join("ev.jsonl");
    let csv = dir.path().join("ev.csv");
    for out in [&jsonl, &csv] {
        let o = rhp(&["simulate", "--config", s(&cfg), "--out", s(out)]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (header, rows) = jsonl_rows(&std::fs::read_to_string(&jsonl).unwrap());
    let (comments, csv_rows) = csv_rows(&std::fs::read_to_string(&csv).unwrap());
    assert_eq!(rows, csv_rows);
    assert!(!rows.is_empty());
    let reps: std::collections::BTreeSet<u64> = rows.iter().map(|r| r.5).collect();
    assert_eq!(reps.into_iter().collect::<Vec<_>>(), vec![0, 1]);
    assert!(rows.windows(2).all(|w| (w[0].5, w[0].0) < (w[1].5, w[1].0)), "not sorted by (rep, t)");
    assert!(rows.iter().all(|r| r.0 >= 0.0 && r.0 <= 30.0));
    assert_eq!(header["reps"], 2);
    let hash = config_hash(&cfg);
    assert_eq!(header["config_hash"], hash.as_str());
    assert!(comments.contains(&("config_hash".into(), hash)));
    assert!(comments.contains(&("seed".into(), "3".into())));
}

#[test]
fn outputs_are_reproducible_and_seed_sensitive() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "good.toml", GOOD);
    let run = |seed: &str| rhp(&["simulate", "--config", s(&cfg), "--seed", seed, "--method", "thinning"]).stdout;
    assert_eq!(run("9"), run("9"));
    assert_ne!(run("9"), run("10"));
}

#[test]
fn every_output_carries_the_config_hash() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "good.toml", &format!("{GOOD}\n[numeric]\npgfl_reps = 200\nclusters = 500\n"));
    let hash = config_hash(&cfg);
    let c = s(&cfg);
    for args in [
        vec!["simulate", "--config", c],
        vec!["cluster-stats", "--config", c],
        vec!["renewal-table", "--config", c, "--horizon", "2"],
        vec!["pgfl", "--config", c, "--z", "step:0.8:0:2", "--mode", "solver"],
        vec!["pgfl", "--config", c, "--z", "step:0.8:0:2", "--mode", "mc"],
        vec!["validate", "--config", c, "--suite", "existence"],
    ] {
        let o = rhp(&args);
        assert_eq!(o.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(String::from_utf8(o.stdout).unwrap().contains(&hash), "{args:?}");
    }
}

#[test]
fn overrides_are_part_of_the_hash() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "good.toml", GOOD);
    let reps2 = write(dir.path(), "reps2.toml", &GOOD.replace("reps = 50", "reps = 2"));
    let header = |args: &[&str]| -> Value {
        let out = rhp(args).stdout;
        serde_json::from_str(String::from_utf8(out).unwrap().lines().next().unwrap()).unwrap()
    };
    let overridden = header(&["simulate", "--config", s(&cfg), "--reps", "2"]);
    assert_eq!(overridden["config_hash"], header(&["simulate", "--config", s(&reps2)])["config_hash"]);
    assert_ne!(overridden["config_hash"], config_hash(&cfg).as_str());
}

#[test]
fn cross_suite_passes_on_a_valid_model() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "good.toml", GOOD);
    let out = dir.path().join("report.json");
    let o = rhp(&["validate", "--config", s(&cfg), "--suite", "cross", "--reps", "400", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["pass"], true);
    assert_eq!(report["sample_sizes"][0], 400);
}

#[test]
fn failed_diagnostic_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let heavy = GOOD.replace(
        r#"family = "gamma"
params = { shape = 2.0, rate = 1.0 }"#,
        r#"family = "tabulated"
params = { grid = [0.0, 1.0, 2.0], values = [0.2, 0.3, 0.4], tail_index = 0.8 }"#,
    );
    let cfg = write(dir.path(), "heavy.toml", &heavy);
    let o = rhp(&["validate", "--config", s(&cfg), "--suite", "existence"]);
    assert_eq!(o.status.code(), Some(1));
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["pass"], false);
}

#[test]
fn configuration_and_usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.toml", &GOOD.replace("alpha = 0.5", "alpha = 1.2"));
    let o = rhp(&["simulate", "--config", s(&bad)]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("kernel.params.alpha") && err.contains("subcriticality"), "{err}");

    let unknown = write(dir.path(), "unknown.toml", &GOOD.replace("seed = 3", "seed = 3\nsede = 4"));
    assert_eq!(rhp(&["simulate", "--config", s(&unknown)]).status.code(), Some(2));
    assert_eq!(rhp(&["simulate", "--config", s(&dir.path().join("missing.toml"))]).status.code(), Some(2));
    assert_eq!(rhp(&["simulate", "--bogus"]).status.code(), Some(2));

    let good = write(dir.path(), "good.toml", GOOD);
    let o = rhp(&["pgfl", "--config", s(&good), "--z", "step:0.8:2:1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unwritable_output_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "good.toml", GOOD);
    let target = dir.path().join("no/such/dir/ev.jsonl");
    let o = rhp(&["simulate", "--config", s(&cfg), "--out", s(&target)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8(o.stderr).unwrap().contains(s(&target)));
}

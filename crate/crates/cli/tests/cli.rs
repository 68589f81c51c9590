use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const SMALL: &str = "[dataset.synthetic]\nseed = 2\nnum_inlier_edges = 30\nnum_anomaly_edges = 10\n\n[model]\nhidden_dim = 8\nembedding_dim = 8\n\n[train]\nmax_epochs = 60\nseed = 4\n";

fn had(args: &[&str], env: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_had"));
    cmd.args(args);
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("spawn had")
}

fn ok(out: Output) -> String {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn err(out: Output) -> String {
    assert!(!out.status.success(), "expected failure");
    String::from_utf8(out.stderr).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn setup(extra: &str) -> (tempfile::TempDir, PathBuf) {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("small.toml");
    fs::write(&config, format!("{SMALL}{extra}")).unwrap();
    (tmp, config)
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn train_then_score() {
    let (tmp, config) = setup("");
    let train_dir = tmp.path().join("t");
    ok(had(
        &["train", "--config", s(&config), "--out", s(&train_dir)],
        &[],
    ));
    for f in [
        "model.bin",
        "params.bin",
        "losses.csv",
        "summary.json",
        "run_config.toml",
        "timing.json",
    ] {
        assert!(train_dir.join(f).is_file(), "{f} missing");
    }
    let summary = json(&train_dir.join("summary.json"));
    assert_eq!(summary["num_training_edges"], 30);
    assert_eq!(summary["seed"], 4);

    let edges = tmp.path().join("cand.txt");
    fs::write(&edges, "0 1 2\n# comment\n3 4 5 6\n10 30\n").unwrap();
    let csv = ok(had(
        &[
            "score",
            "--model",
            s(&train_dir.join("model.bin")),
            "--edges",
            s(&edges),
        ],
        &[],
    ));
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "edge_id,score,normalized");
    assert_eq!(rows.len(), 4);
    let norm: Vec<f64> = rows[1..]
        .iter()
        .map(|r| r.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert!(norm.iter().all(|v| (0.0..=1.0).contains(v)));
}

#[test]
fn score_errors_name_the_line() {
    let (tmp, config) = setup("");
    let train_dir = tmp.path().join("t");
    ok(had(
        &["train", "--config", s(&config), "--out", s(&train_dir)],
        &[],
    ));
    let model = train_dir.join("model.bin");

    let edges = tmp.path().join("bad.txt");
    fs::write(&edges, "0 1\n2 999\n").unwrap();
    let msg = err(had(
        &["score", "--model", s(&model), "--edges", s(&edges)],
        &[],
    ));
    assert!(msg.contains("bad.txt:2:"), "{msg}");
    assert!(msg.contains("999"), "{msg}");

    fs::write(&edges, "0 1\n1 x\n").unwrap();
    let msg = err(had(
        &["score", "--model", s(&model), "--edges", s(&edges)],
        &[],
    ));
    assert!(msg.contains("bad.txt:2:"), "{msg}");

    let msg = err(had(
        &[
            "score",
            "--model",
            s(&tmp.path().join("none.bin")),
            "--edges",
            s(&edges),
        ],
        &[],
    ));
    assert!(msg.contains("none.bin"), "{msg}");
}

#[test]
fn missing_manifest_is_named() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("c.toml");
    fs::write(&config, "[dataset]\nmanifest = \"nowhere/manifest.json\"\n").unwrap();
    let msg = err(had(
        &[
            "eval",
            "--config",
            s(&config),
            "--out",
            s(&tmp.path().join("o")),
        ],
        &[],
    ));
    assert!(msg.contains("nowhere/manifest.json"), "{msg}");
}

#[test]
fn missing_feature_file_is_named() {
    let (tmp, config) = setup("");
    let data = tmp.path().join("data");
    ok(had(
        &["synth", "--config", s(&config), "--out", s(&data)],
        &[],
    ));
    let manifest: Value = json(&data.join("manifest.json"));
    let features = manifest["features"].as_str().unwrap().to_string();
    fs::remove_file(data.join(&features)).unwrap();
    let cfg2 = tmp.path().join("m.toml");
    fs::write(&cfg2, "[dataset]\nmanifest = \"data/manifest.json\"\n").unwrap();
    let msg = err(had(
        &[
            "train",
            "--config",
            s(&cfg2),
            "--out",
            s(&tmp.path().join("o")),
        ],
        &[],
    ));
    assert!(msg.contains(&features), "{msg}");
}

#[test]
fn variants_change_the_run() {
    let (tmp, config) = setup("");
    let mean_dir = tmp.path().join("mean");
    ok(had(
        &[
            "eval",
            "--config",
            s(&config),
            "--variant",
            "had-mean",
            "--out",
            s(&mean_dir),
        ],
        &[],
    ));
    let report = json(&mean_dir.join("report.json"));
    assert_eq!(report["model"]["pooling"], "mean");
    assert_eq!(report["folds"].as_array().unwrap().len(), 5);

    let fixed_dir = tmp.path().join("fixed");
    ok(had(
        &[
            "eval",
            "--config",
            s(&config),
            "--variant",
            "had-fixed",
            "--out",
            s(&fixed_dir),
        ],
        &[],
    ));
    let report = json(&fixed_dir.join("report.json"));
    assert_eq!(report["model"]["centroid"], "fixed");
    for f in report["folds"].as_array().unwrap() {
        assert_eq!(f["epochs"], 1000);
    }
}

#[test]
fn parallel_folds_match_sequential() {
    let (tmp, config) = setup("");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(had(
        &[
            "eval",
            "--config",
            s(&config),
            "--jobs",
            "1",
            "--out",
            s(&a),
        ],
        &[],
    ));
    ok(had(
        &[
            "eval",
            "--config",
            s(&config),
            "--jobs",
            "4",
            "--out",
            s(&b),
        ],
        &[],
    ));
    for f in [
        "report.json",
        "scatter_fold_0.csv",
        "scatter_fold_4.csv",
        "losses_fold_2.csv",
    ] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn seed_flag_overrides_and_is_recorded() {
    let (tmp, config) = setup("");
    let dir = tmp.path().join("e");
    ok(had(
        &[
            "eval",
            "--config",
            s(&config),
            "--seed",
            "77",
            "--out",
            s(&dir),
        ],
        &[],
    ));
    assert_eq!(json(&dir.join("report.json"))["seed"], 77);
    assert!(fs::read_to_string(dir.join("run_config.toml"))
        .unwrap()
        .contains("seed = 77"));
}

#[test]
fn output_root_from_environment() {
    let (tmp, config) = setup("");
    let root = tmp.path().join("root");
    ok(had(
        &["eval", "--config", s(&config)],
        &[("HAD_OUTPUT_ROOT", &root)],
    ));
    assert!(root
        .join("small")
        .join("eval")
        .join("report.json")
        .is_file());
}

#[test]
fn rejects_bad_configs() {
    let (tmp, config) = setup("\n[split]\nnum_folds = 1\n");
    let msg = err(had(
        &[
            "eval",
            "--config",
            s(&config),
            "--out",
            s(&tmp.path().join("o")),
        ],
        &[],
    ));
    assert!(msg.contains("num_folds"), "{msg}");
    let msg = err(had(&["eval", "--config", s(&config), "--jobs", "0"], &[]));
    assert!(msg.contains("--jobs"), "{msg}");
}

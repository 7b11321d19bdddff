use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn sessrank(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sessrank"))
        .arg("--out")
        .arg(dir)
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) {
    let out = sessrank(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn small_config(dir: &Path) -> String {
    let path = dir.join("small.cfg");
    fs::write(
        &path,
        "# tiny run\nn_sessions = 200\nepochs = 2\nbackend = bm25\nseed = 3\n",
    )
    .unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn bad_usage_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(sessrank(tmp.path(), &["frobnicate"]).status.code(), Some(2));
    assert_eq!(sessrank(tmp.path(), &["ablate", "--drop", "ZZ"]).status.code(), Some(2));
    assert_eq!(sessrank(tmp.path(), &["--band", "middle", "gen"]).status.code(), Some(2));
    let cfg = tmp.path().join("bad.cfg");
    fs::write(&cfg, "n_sessions = lots\n").unwrap();
    let out = sessrank(tmp.path(), &["--config", cfg.to_str().unwrap(), "gen"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_sessions"));
    let missing = sessrank(tmp.path(), &["--config", "/nonexistent/x.cfg", "gen"]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn missing_input_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    let out = sessrank(tmp.path(), &["prepare"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sessions.jsonl"));
}

#[test]
fn full_pipeline_writes_artifacts_and_reruns_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("work");
    let cfg = small_config(tmp.path());
    let stages = ["gen", "prepare", "index", "mine", "augment", "train", "eval"];
    for s in stages {
        ok(&dir, &["--config", &cfg, s]);
    }
    for f in [
        "sessions.jsonl",
        "train.jsonl",
        "test.jsonl",
        "vocab.tsv",
        "index.trec",
        "ambiguous.tsv",
        "train_pairs.jsonl",
        "augment_stats.tsv",
        "model.ckpt",
        "metrics.tsv",
        "breakdown_length.tsv",
        "breakdown_position.tsv",
        "run.trec",
        "qrels.txt",
        "manifest.eval.txt",
    ] {
        assert!(dir.join(f).is_file(), "{f} missing");
    }
    let manifest = fs::read_to_string(dir.join("manifest.train.txt")).unwrap();
    assert!(manifest.contains("\nbackend=bm25\n") && manifest.contains("\nepochs=2\n"));
    let metrics = fs::read_to_string(dir.join("metrics.tsv")).unwrap();
    assert!(metrics.starts_with("metric\tvalue\n"));
    let ckpt = fs::read(dir.join("model.ckpt")).unwrap();
    assert_eq!(&ckpt[..4], b"SRNK");

    // rerunning a stage on the same inputs rewrites the same bytes
    let before: Vec<Vec<u8>> = ["train_pairs.jsonl", "model.ckpt", "metrics.tsv"]
        .iter()
        .map(|f| fs::read(dir.join(f)).unwrap())
        .collect();
    for s in ["augment", "train", "eval"] {
        ok(&dir, &["--config", &cfg, s]);
    }
    let after: Vec<Vec<u8>> = ["train_pairs.jsonl", "model.ckpt", "metrics.tsv"]
        .iter()
        .map(|f| fs::read(dir.join(f)).unwrap())
        .collect();
    assert_eq!(before, after);

    // the exported run evaluates to the same metrics
    let ext = tmp.path().join("external.cfg");
    fs::write(
        &ext,
        format!(
            "{}\nrun = {}\n",
            fs::read_to_string(&cfg).unwrap(),
            dir.join("run.trec").display()
        ),
    )
    .unwrap();
    let ext_dir = tmp.path().join("ext");
    fs::create_dir_all(&ext_dir).unwrap();
    fs::copy(dir.join("test.jsonl"), ext_dir.join("test.jsonl")).unwrap();
    ok(&ext_dir, &["--config", ext.to_str().unwrap(), "eval"]);
    assert_eq!(
        fs::read_to_string(ext_dir.join("metrics.tsv")).unwrap(),
        metrics
    );

    ok(&dir, &["--config", &cfg, "ablate", "--drop", "AQ"]);
    let stats = fs::read_to_string(dir.join("ablate_AQ/augment_stats.tsv")).unwrap();
    assert!(!stats.contains("constructed_ambiguous"));
    assert!(stats.contains("constructed_random"));
    assert!(dir.join("ablate_AQ/metrics.tsv").is_file());
}

#[test]
fn flags_override_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    ok(tmp.path(), &["--config", &cfg, "--seed", "11", "gen"]);
    let manifest = fs::read_to_string(tmp.path().join("manifest.gen.txt")).unwrap();
    assert!(manifest.contains("\nseed=11\n"));
    ok(tmp.path(), &["--config", &cfg, "--seed", "11", "--band", "high", "--backend", "dense", "prepare"]);
    let manifest = fs::read_to_string(tmp.path().join("manifest.prepare.txt")).unwrap();
    assert!(manifest.contains("\nband=high\n") && manifest.contains("\nbackend=dense\n"));
}

use std::path::Path;
use std::process::{Command, Output};

use algae_core::classifier::Model;
use algae_core::features::{assemble, load_features_csv};

fn algaeid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_algaeid"))
        .args(args)
        .output()
        .expect("spawn algaeid")
}

fn ok(args: &[&str]) -> Output {
    let out = algaeid(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// synth -> correct -> segment -> features -> mccv, returning report.json.
fn chain(root: &Path) -> Vec<u8> {
    let raw = root.join("raw");
    let cor = root.join("cor");
    let seg = root.join("seg");
    let csv = root.join("features.csv");
    let rep = root.join("report");
    ok(&["synth", "--out", s(&raw), "--scenes", "3", "--seed", "7"]);
    ok(&["correct", "--input", s(&raw), "--out", s(&cor), "--seed", "7"]);
    ok(&["segment", "--input", s(&cor), "--out", s(&seg), "--seed", "7"]);
    ok(&[
        "features", "--input", s(&cor), "--segmentation", s(&seg), "--truth", s(&raw), "--out", s(&csv),
        "--seed", "7",
    ]);
    let out = ok(&["mccv", "--features", s(&csv), "--runs", "3", "--out", s(&rep), "--seed", "7"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("Model 1"));
    assert_eq!(std::fs::read_to_string(rep.join("report.txt")).unwrap(), text);
    std::fs::read(rep.join("report.json")).unwrap()
}

#[test]
fn pipeline_chain_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = chain(a.path());
    assert_eq!(ra, chain(b.path()));

    let report: serde_json::Value = serde_json::from_slice(&ra).unwrap();
    let hash = report["config_hash"].as_str().unwrap();
    assert_eq!(hash.len(), 16);
    assert_eq!(report["runs"], 3);

    let scene = a.path().join("raw/scene_000");
    for f in ["manifest.json", "ground_truth.json", "truth_labels.pgm"] {
        assert!(scene.join(f).is_file(), "{f}");
    }
    let manifest = std::fs::read_to_string(scene.join("manifest.json")).unwrap();
    assert!(manifest.contains("config_hash"));
    let pgm = std::fs::read(scene.join("band_00_405nm.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n# config_hash"));
    assert!(a.path().join("features.csv.meta.json").is_file());
    assert!(a.path().join("seg/scene_002/organisms.json").is_file());
}

#[test]
fn classify_reproduces_training_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let raw = p.join("raw");
    ok(&["synth", "--out", s(&raw), "--scenes", "2"]);
    ok(&["correct", "--input", s(&raw), "--out", s(&p.join("cor"))]);
    ok(&["segment", "--input", s(&p.join("cor")), "--out", s(&p.join("seg"))]);
    let csv = p.join("f.csv");
    ok(&[
        "features", "--input", s(&p.join("cor")), "--segmentation", s(&p.join("seg")), "--truth", s(&raw),
        "--out", s(&csv),
    ]);
    let model = p.join("model.json");
    ok(&["train", "--features", s(&csv), "--variant", "spectral", "--out", s(&model)]);
    ok(&["classify", "--model", s(&model), "--features", s(&csv), "--out", s(&p.join("a.csv"))]);
    ok(&["classify", "--model", s(&model), "--features", s(&csv), "--out", s(&p.join("b.csv"))]);
    let a = std::fs::read_to_string(p.join("a.csv")).unwrap();
    assert_eq!(a, std::fs::read_to_string(p.join("b.csv")).unwrap());

    let m = Model::load(&model).unwrap();
    let (_, rows) = load_features_csv(&csv).unwrap();
    let predicted: Vec<usize> = a
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert_eq!(predicted.len(), rows.len());
    for (fv, got) in rows.iter().zip(predicted) {
        assert_eq!(m.predict(&assemble(fv, m.variant)).unwrap(), got);
    }

    ok(&["classify", "--model", s(&model), "--stack", s(&raw.join("scene_000")), "--out", s(&p.join("c.csv"))]);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.csv");
    let out = dir.path().join("m.json");
    let io = algaeid(&["train", "--features", s(&missing), "--variant", "morph", "--out", s(&out)]);
    assert_eq!(io.status.code(), Some(2));
    let bad = algaeid(&["train", "--features", s(&missing), "--variant", "nope", "--out", s(&out)]);
    assert_eq!(bad.status.code(), Some(1));

    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"mccv": {"train_fraction": 1.5}}"#).unwrap();
    let invalid = algaeid(&["--config", s(&cfg), "synth", "--out", s(dir.path())]);
    assert_eq!(invalid.status.code(), Some(1));
    assert!(!dir.path().join("scene_000").exists());
}

#[test]
fn synth_spec_file_and_named_errors() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(&spec, r#"{"scenes": 2, "seed": 3, "scene": {"width": 96, "height": 96, "organism_count": 5}}"#).unwrap();
    let out = dir.path().join("raw");
    ok(&["synth", "--spec", s(&spec), "--out", s(&out)]);
    assert!(out.join("scene_001/manifest.json").is_file());
    assert!(!out.join("scene_002").exists());
    let gt: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("scene_000/ground_truth.json")).unwrap()).unwrap();
    assert_eq!(gt["organisms"].as_array().unwrap().len(), 5);

    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"segmentation": {"num_bins": 1}}"#).unwrap();
    let bad = algaeid(&["--config", s(&cfg), "segment", "--input", s(&out), "--out", s(&out)]);
    assert_eq!(bad.status.code(), Some(1));
    let msg = String::from_utf8_lossy(&bad.stderr);
    assert!(msg.contains("bad.json") && msg.contains("num_bins"), "{msg}");
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("typo.json");
    std::fs::write(&cfg, r#"{"mccv": {"rnus": 20}}"#).unwrap();
    let out = algaeid(&["--config", s(&cfg), "synth", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("rnus"));
}

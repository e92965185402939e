//! Drives the `tip` binary end to end.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tip_cli::checkpoint::Checkpoint;
use tip_core::{GraphShape, ModelConfig, TipModel, Variant};

fn tip(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tip"))
        .args(args)
        .output()
        .expect("spawn tip")
}

fn ok(args: &[&str]) -> String {
    let out = tip(args);
    assert!(
        out.status.success(),
        "tip {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn fails(args: &[&str]) -> String {
    let out = tip(args);
    assert!(!out.status.success(), "tip {args:?} unexpectedly succeeded");
    String::from_utf8(out.stderr).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Synthesizes the default graph under `root/raw` and prepares it under `root/prep`.
fn prepared(root: &Path) {
    let raw = root.join("raw");
    ok(&["synth", "--out", s(&raw)]);
    ok(&[
        "prepare",
        "--pp",
        s(&raw.join("pp.csv")),
        "--pd",
        s(&raw.join("pd.csv")),
        "--dd",
        s(&raw.join("dd.csv")),
        "--min-count",
        "1",
        "--out",
        s(&root.join("prep")),
    ]);
}

#[test]
fn full_pipeline_with_config_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    prepared(root);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(root.join("prep/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["relations"], 5);
    assert_eq!(summary["relations_dropped"], 0);

    let config = root.join("run.toml");
    fs::write(&config, "variant = \"ddm-nn\"\nepochs = 50\nlr = 0.02\n").unwrap();
    let run = root.join("run");
    let stdout = ok(&[
        "train",
        "--config",
        s(&config),
        "--data",
        s(&root.join("prep")),
        "--epochs",
        "3",
        "--out",
        s(&run),
    ]);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("epoch")).count(), 3);
    let losses = fs::read_to_string(run.join("losses.csv")).unwrap();
    assert_eq!(losses.lines().next(), Some("epoch,loss"));
    assert_eq!(losses.lines().count(), 4);

    let ckpt = Checkpoint::load(&run.join("checkpoint.tip")).unwrap();
    assert_eq!(ckpt.config.variant, Variant::DdmNn);
    assert_eq!((ckpt.config.epochs, ckpt.config.lr), (3, 0.02));
    assert_eq!(ckpt.epochs, 3);

    let eval = root.join("eval");
    ok(&[
        "eval",
        "--data",
        s(&root.join("prep")),
        "--checkpoint",
        s(&run.join("checkpoint.tip")),
        "--out",
        s(&eval),
    ]);
    let report = fs::read_to_string(eval.join("report.jsonl")).unwrap();
    assert_eq!(report.lines().count(), 5);
    for line in report.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["auroc"].as_f64().unwrap() <= 1.0);
    }
    let extremes: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(eval.join("extremes.json")).unwrap()).unwrap();
    let listed =
        extremes["best"].as_array().unwrap().len() + extremes["worst"].as_array().unwrap().len();
    assert!(listed <= 40);
    assert_eq!(listed, 5);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(eval.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["summary"]["relations"], 5);
}

#[test]
fn zero_epochs_checkpoint_is_the_initialization() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    prepared(root);
    let run = root.join("run");
    ok(&[
        "train",
        "--data",
        s(&root.join("prep")),
        "--variant",
        "tip-sum",
        "--epochs",
        "0",
        "--seed-init",
        "9",
        "--out",
        s(&run),
    ]);
    let ckpt = Checkpoint::load(&run.join("checkpoint.tip")).unwrap();
    assert!(ckpt.final_loss.is_nan());
    let shape = GraphShape {
        num_proteins: 200,
        num_drugs: 50,
        num_relations: 5,
    };
    let fresh = TipModel::new(ModelConfig::for_variant(Variant::TipSum), shape, 9).unwrap();
    assert_eq!(ckpt.model.params(), fresh.params());
    // Default sizes for this variant.
    let p = ckpt.model.params();
    assert_eq!(p.by_name("ggm.drug").unwrap().value().shape(), &[50, 64]);
    assert_eq!(
        p.by_name("ddm.0.bases").unwrap().value().shape(),
        &[64, 16, 32]
    );
    assert_eq!(
        p.by_name("ddm.1.bases").unwrap().value().shape(),
        &[32, 16, 16]
    );
}

#[test]
fn synth_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&[
        "synth",
        "--seed-synth",
        "4",
        "--drugs",
        "30",
        "--out",
        s(&a),
    ]);
    ok(&[
        "synth",
        "--seed-synth",
        "4",
        "--drugs",
        "30",
        "--out",
        s(&b),
    ]);
    for f in ["pp.csv", "pd.csv", "dd.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
    }
}

#[test]
fn errors_exit_nonzero_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let err = fails(&["prepare", "--synth", "--out", s(&root.join("p"))]);
    assert!(err.contains("no relations remain"), "{err}");

    let err = fails(&["prepare", "--out", s(&root.join("p"))]);
    assert!(err.contains("no input data"), "{err}");

    let err = fails(&[
        "train",
        "--data",
        s(&root.join("missing")),
        "--out",
        s(&root.join("r")),
    ]);
    assert!(err.contains("mapping.csv"), "{err}");

    assert!(fails(&["train", "--data", "x", "--variant", "gcn"]).contains("unknown variant"));
    assert!(fails(&["train", "--data", "x", "--lr=-1", "--out", "r"]).contains("learning rate"));

    fs::write(root.join("bad.csv"), "A,B\nC\n").unwrap();
    let err = fails(&[
        "prepare",
        "--pp",
        s(&root.join("bad.csv")),
        "--pd",
        s(&root.join("bad.csv")),
        "--dd",
        s(&root.join("bad.csv")),
        "--out",
        s(&root.join("p")),
    ]);
    assert!(err.contains("bad.csv:2"), "{err}");
}

#[test]
fn eval_refuses_a_different_graph() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    prepared(root);
    let run = root.join("run");
    ok(&[
        "train",
        "--data",
        s(&root.join("prep")),
        "--epochs",
        "1",
        "--out",
        s(&run),
    ]);
    ok(&[
        "prepare",
        "--synth",
        "--min-count",
        "1",
        "--seed-split",
        "8",
        "--out",
        s(&root.join("other")),
    ]);
    let err = fails(&[
        "eval",
        "--data",
        s(&root.join("other")),
        "--checkpoint",
        s(&run.join("checkpoint.tip")),
        "--out",
        s(&root.join("e")),
    ]);
    assert!(err.contains("refusing"), "{err}");
}

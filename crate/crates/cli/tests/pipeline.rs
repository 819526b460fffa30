mod common;

use std::fs;
use std::path::Path;

use common::{qtkit, stderr, toy_inputs};

fn run_all(cfg: &Path, out: &Path, extra: &[&str]) {
    let mut args = vec!["run", "--config", cfg.to_str().unwrap(), "--out-dir", out.to_str().unwrap(), "--log-level", "warn"];
    args.extend_from_slice(extra);
    let o = qtkit(&args);
    assert!(o.status.success(), "qtkit run failed: {}", stderr(&o));
}

#[test]
fn toy_pipeline_writes_every_artifact_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = toy_inputs(tmp.path());
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    run_all(&cfg, &a, &[]);
    run_all(&cfg, &b, &[]);

    for rel in [
        "dataset.jsonl",
        "labels.txt",
        "held.txt",
        "plan.json",
        "checkpoints/SG-8-12/r2_f2.json",
        "checkpoints/SFC2/r1_f1.json",
        "reports/ingest_report.json",
        "reports/cluster_report.csv",
        "reports/split_summary.csv",
        "reports/training_SG-8-12.csv",
        "reports/scores_qtnet.csv",
        "reports/scores_molecular.csv",
        "reports/parity_molecular.csv",
        "reports/learning_curve.csv",
        "reports/inferred.csv",
        "reports/stats.txt",
        "reports/stats/scores_molecular_paired.csv",
        "reports/dipole_summary.json",
        "reports/report.md",
    ] {
        let pa = fs::read(a.join(rel)).unwrap_or_else(|_| panic!("missing {rel}"));
        let pb = fs::read(b.join(rel)).unwrap();
        assert!(pa == pb, "{rel} differs between identical runs");
    }

    let ingest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.join("reports/ingest_report.json")).unwrap()).unwrap();
    assert_eq!(ingest["assembly"]["retained"], 50);
    assert_eq!(ingest["assembly"]["with_targets"], 50);

    // Ground-truth atomic dipoles sum to the tabulated molecular dipole.
    let dip: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.join("reports/dipole_summary.json")).unwrap()).unwrap();
    assert!(dip["r2"].as_f64().unwrap() > 0.99, "{dip}");

    let stats = fs::read_to_string(a.join("reports/stats.txt")).unwrap();
    assert!(stats.contains("SG-8-12") && stats.contains("SFC2"), "{stats}");
    let report = fs::read_to_string(a.join("reports/report.md")).unwrap();
    assert!(report.contains("## Artifacts"));
}

#[test]
fn rerun_skips_and_changed_config_needs_force() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = toy_inputs(tmp.path());
    let out = tmp.path().join("out");
    let base = ["--config", cfg.to_str().unwrap(), "--out-dir", out.to_str().unwrap()];
    for stage in ["ingest", "cluster", "split"] {
        let mut args = vec![stage];
        args.extend_from_slice(&base);
        let o = qtkit(&args);
        assert!(o.status.success(), "{stage}: {}", stderr(&o));
    }
    let plan = out.join("plan.json");
    let before = fs::metadata(&plan).unwrap().modified().unwrap();
    let mut args = vec!["split"];
    args.extend_from_slice(&base);
    let o = qtkit(&args);
    assert!(o.status.success());
    assert!(stderr(&o).contains("up to date"), "{}", stderr(&o));
    assert_eq!(fs::metadata(&plan).unwrap().modified().unwrap(), before);

    // Another seed changes the config hash: existing outputs conflict.
    args.extend_from_slice(&["--seed", "8"]);
    let o = qtkit(&args);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("config mismatch") || stderr(&o).contains("mismatch"), "{}", stderr(&o));

    // Downstream stages refuse inputs made under another config.
    let mut args = vec!["train", "--seed", "8"];
    args.extend_from_slice(&base);
    let o = qtkit(&args);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn missing_inputs_exit_5() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("empty");
    let o = qtkit(&["split", "--out-dir", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(5), "{}", stderr(&o));
    let last = stderr(&o).lines().last().unwrap_or_default().to_string();
    let rec: serde_json::Value = serde_json::from_str(&last).unwrap();
    assert_eq!(rec["level"], "error");
    assert_eq!(rec["exit_code"], 5);
}

#[test]
fn bad_config_exits_2_and_corrupt_artifact_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let o = qtkit(&["ingest", "--set", "cluster.no_such_key=1"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let o = qtkit(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));

    let scores = tmp.path().join("bad.csv");
    fs::write(&scores, "model,repeat,fold,stratum,metric,value\nA,1,1,s,r2,notanumber\n").unwrap();
    let out = tmp.path().join("out");
    let o = qtkit(&["stats", "--scores", scores.to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

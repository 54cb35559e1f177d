use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn steinpp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_steinpp"))
        .current_dir(repo_root())
        .args(args)
        .output()
        .expect("binary runs")
}

#[test]
fn verify_bernoulli_config_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = steinpp(&["verify", "--config", "configs/bernoulli.json", "--output-dir", out]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    let rows = report["rows"].as_array().unwrap();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r["status"] == "pass" || r["status"] == "skipped"));
    assert!(dir.path().join("tables/bernoulli.csv").exists());
}

#[test]
fn metrics_subcommand() {
    let o = steinpp(&["metrics", "--a", "configs/a.json", "--b", "configs/b.json", "--metric", "d1prime"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), "0.3");
}

#[test]
fn bound_renewal_prints_iid_bound() {
    let o = steinpp(&["bound", "--config", "configs/renewal.json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let iid = v["bounds"]
        .as_array()
        .unwrap()
        .iter()
        .find(|b| b["formula_id"] == "renewal-iid-d2")
        .expect("iid bound present");
    assert!((iid["value"].as_f64().unwrap() - 0.186_450_115).abs() < 1e-8);
}

#[test]
fn renewal_subcommand_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("v.csv");
    let o = steinpp(&["renewal", "--config", "configs/renewal.json", "--out", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(csv).unwrap();
    assert!(text.starts_with("t,G,F,V,V2,V_upper,factorial_upper"));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(steinpp(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(steinpp(&["verify", "--config", "configs/missing.json"]).status.code(), Some(1));
    assert_eq!(steinpp(&["--help"]).status.code(), Some(0));
}

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn snapsim(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_snapsim"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn noiseless_gate_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let out = snapsim(&["simulate-gate"], &configs().join("noiseless.toml"), dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = json(&dir.path().join("simulate_gate.json"));
    assert_eq!(doc["command"], "simulate-gate");
    assert!(doc["snapsim_version"].is_string());
    let f = doc["result"]["logical_fidelity"].as_f64().unwrap();
    assert!(f > 1.0 - 1e-6, "{f}");
}

#[test]
fn malformed_unit_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[device]\nchi_e = \"-0.9 MHZ\"\n").unwrap();
    let out = snapsim(&["budget"], &cfg, dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("chi_e") && err.contains("bad.toml"), "{err}");
    assert!(!dir.path().join("budget.json").exists());
}

#[test]
fn missing_section_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = snapsim(&["simulate-gate"], &configs().join("check.toml"), dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("[protocol]"));
}

#[test]
fn check_reports_bundled_graphs() {
    let dir = tempfile::tempdir().unwrap();
    let out = snapsim(&["check"], &configs().join("check.toml"), dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = json(&dir.path().join("check.json"));
    let graphs = doc["result"]["path_independence"].as_array().unwrap();
    let passed = |name: &str| graphs.iter().find(|g| g["graph"] == name).unwrap()["passed"].as_bool().unwrap();
    assert!(passed("gate_graph.json"));
    assert!(passed("complete_graph.json"));
    assert!(!passed("complete_graph_with_eg.json"));
    let class = |set: &str, label: &str| {
        let entries = doc["result"]["error_transparency"][set].as_array().unwrap();
        entries.iter().find(|e| e["label"] == label).unwrap()["class"].as_str().unwrap().to_string()
    };
    assert_eq!(class("bare", "ancilla_relax_ef"), "cavity_dependent");
    assert_eq!(class("matched", "ancilla_relax_ef"), "zero");
}

#[test]
fn wigner_of_plus_x_peaks_at_two_over_pi() {
    let dir = tempfile::tempdir().unwrap();
    let out = snapsim(&["wigner", "--format", "json"], &configs().join("noiseless.toml"), dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = json(&dir.path().join("wigner.json"));
    let w0 = doc["result"]["w_origin"].as_f64().unwrap();
    let max = doc["result"]["max"].as_f64().unwrap();
    assert!(w0 > 0.0);
    assert!((max - 2.0 / std::f64::consts::PI).abs() < 1e-6, "{max}");
}

#[test]
fn same_seed_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("rb.toml");
    std::fs::write(
        &cfg,
        "seed = 17\n[rb]\nlengths = [1, 5, 20]\nn_sequences = 20\nshots = 50\ninterleave = { kind = \"depolarizing\", p = 0.05 }\n",
    )
    .unwrap();
    let run = |sub: &str, seed: &str| {
        let out_dir = dir.path().join(sub);
        let out = snapsim(&["rb", "--seed", seed], &cfg, &out_dir);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read(out_dir.join("rb.csv")).unwrap()
    };
    let a = run("a", "17");
    assert_eq!(a, run("b", "17"));
    assert_ne!(a, run("c", "18"));
    assert!(String::from_utf8_lossy(&a).starts_with("# snapsim "));
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};

const SMALL: &str = r#"{
  "k": 0.3, "eps": 0.02, "phi0": 1.5707963,
  "grid": {"L": 10, "n": 51},
  "cutoff": {"r_in": 2, "r_out": 4},
  "scan": {"count": 4},
  "sweep": {"k": [0.2, 0.3]},
  "evolve": {"dt": 0.5, "t_end": 10}
}"#;

fn glpattern(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_glpattern"))
        .args(args)
        .output()
        .expect("spawn glpattern")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn run_ok(sub: &str, cfg: &Path, out: &Path) {
    let o = glpattern(&[sub, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(
        o.status.success(),
        "{sub} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn symbols_reports_stable_band() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", SMALL);
    let out = dir.path().join("out");
    run_ok("symbols", &cfg, &out);
    let v = json(&out.join("symbols.json"));
    assert_eq!(v["eckhaus_stable"], Value::Bool(true));
    assert!(out.join("symbols.csv").exists());
}

#[test]
fn eckhaus_violation_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"k": 0.6}"#);
    let o = glpattern(&["symbols", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Eckhaus"));
}

#[test]
fn malformed_inputs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write_config(dir.path(), "u.json", r#"{"k": 0.3, "kk": 1}"#);
    let o = glpattern(&["symbols", "--config", unknown.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = glpattern(&["symbols", "--config", "/nonexistent/config.json"]);
    assert_eq!(o.status.code(), Some(2));
    let o = glpattern(&["no-such-subcommand", "--config", unknown.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn newton_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL.replace(
        "\"scan\"",
        "\"newton\": {\"max_iter\": 1, \"tol\": 1e-14}, \"scan\"",
    );
    let cfg = write_config(dir.path(), "c.json", &text);
    let out = dir.path().join("out");
    let o = glpattern(&["stationary", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    let m = json(&out.join("manifest.json"));
    assert_eq!(m["partial"], Value::Bool(true));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", SMALL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for sub in ["sweep", "select-phase"] {
        run_ok(sub, &cfg, &a);
        run_ok(sub, &cfg, &b);
    }
    for name in ["sweep.csv", "scan.csv"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn manifest_checksums_match_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", SMALL);
    let out = dir.path().join("out");
    run_ok("stationary", &cfg, &out);
    let m = json(&out.join("manifest.json"));
    assert_eq!(m["status"], "ok");
    assert_eq!(m["config"]["k"], 0.3);
    let arts = m["artifacts"].as_array().unwrap();
    assert!(arts.iter().any(|a| a["path"] == "field_A.bin"));
    for a in arts {
        let bytes = fs::read(out.join(a["path"].as_str().unwrap())).unwrap();
        assert_eq!(a["bytes"].as_u64().unwrap(), bytes.len() as u64);
        assert_eq!(a["sha256"].as_str().unwrap(), hex::encode(Sha256::digest(&bytes)));
    }
}

#[test]
fn fit_recovers_solver_wavenumber_shift() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", SMALL);
    let out = dir.path().join("out");
    run_ok("stationary", &cfg, &out);
    let st = json(&out.join("stationary.json"));
    run_ok("fit", &cfg, &out);
    let fit = json(&out.join("fit.json"));
    let c = st["c"].as_f64().unwrap();
    let c_fit = fit["c_fit"].as_f64().unwrap();
    assert!((c_fit - c).abs() < 0.05 * c.abs(), "c {c} c_fit {c_fit}");
}

#[test]
fn evolve_and_continuation_write_tables() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL.replace("\"eps\": 0.02", "\"eps\": [0.0, 0.005, 0.01, 0.02]");
    let cfg = write_config(dir.path(), "c.json", &text);
    let out = dir.path().join("out");
    run_ok("continuation", &cfg, &out);
    let csv = fs::read_to_string(out.join("continuation.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    run_ok("evolve", &cfg, &out);
    assert!(out.join("snapshots.csv").exists());
    assert!(json(&out.join("evolve.json"))["status"].is_string());
}

#[test]
fn seed_flag_lands_in_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", SMALL);
    let out = dir.path().join("out");
    let o = glpattern(&[
        "symbols", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "42",
    ]);
    assert!(o.status.success());
    assert_eq!(json(&out.join("manifest.json"))["seed"], 42);
}

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn subrough(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_subrough")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("report is JSON")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

const HIT: &str = r#"{
  "system": "elliptic2",
  "experiment": {"hurst": 0.5, "window": [0.5, 1.0], "center": [0.0, 0.0], "radius": 0.5,
                 "y0": [0.0, 0.0], "n_paths": 400, "steps": 64, "seed": 5}
}"#;

#[test]
fn euclidean_distance() {
    let r = json(&subrough(&["dist", "--system", "elliptic2", "--from", "0,0", "--to", "3,4"]));
    assert_eq!(r["kind"], "dist");
    assert_eq!(r["config_hash"].as_str().unwrap().len(), 64);
    let d = r["result"]["value"].as_f64().unwrap();
    assert!((d - 5.0).abs() < 1e-4, "{d}");
}

#[test]
fn negative_index_capacity_is_one() {
    let r = json(&subrough(&["cap", "--system", "elliptic2", "--set", "ball:0,0:0.5", "--alpha", "-0.5", "--points", "50"]));
    assert_eq!(r["result"]["capacity"].as_f64(), Some(1.0));
}

#[test]
fn hit_report_and_csv_written_to_out() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "hit.json", HIT);
    let out = dir.path().join("hit-report.json");
    let o = subrough(&["hit", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let p = &r["result"]["estimate"]["estimate"];
    let (est, lo, hi) = (p["estimate"].as_f64().unwrap(), p["lower"].as_f64().unwrap(), p["upper"].as_f64().unwrap());
    assert!(0.0 < est && est < 1.0 && lo <= est && est <= hi);

    let radii = HIT.replacen("\"system\"", "\"radii\": [0.4, 0.3, 0.2, 0.1],\n  \"system\"", 1);
    let cfg = write(dir.path(), "fit.json", &radii);
    let out = dir.path().join("fit.json.out");
    let o = subrough(&["hit", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.with_extension("csv")).unwrap();
    assert!(csv.starts_with("radius,estimate,lower,upper"));
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn bad_configs_exit_one_and_write_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let cases = [
        ("truncated.json", "{\"system\": \"elliptic2\", "),
        ("unknown.json", &*HIT.replacen("\"seed\": 5", "\"seed\": 5, \"bogus\": 1", 1)),
        ("window.json", &*HIT.replacen("[0.5, 1.0]", "[1.0, 0.5]", 1)),
        ("system.json", &*HIT.replacen("elliptic2", "no-such-system", 1)),
    ];
    for (name, text) in cases {
        let cfg = write(dir.path(), name, text);
        let o = subrough(&["hit", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(1), "{name}");
        assert!(!out.exists(), "{name} wrote a report");
        assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"), "{name}");
    }
    let o = subrough(&["dist", "--system", "elliptic2", "--from", "0,0", "--to", "1,2,3"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(o.stdout.is_empty());
}

#[test]
fn reports_do_not_depend_on_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "hit.json", HIT);
    let one = subrough(&["--workers", "1", "hit", "--config", &cfg]);
    let two = subrough(&["--workers", "2", "hit", "--config", &cfg]);
    assert!(one.status.success());
    assert_eq!(one.stdout, two.stdout);

    let one = subrough(&["--workers", "1", "verify", "--quick", "--only", "1,2"]);
    let two = subrough(&["--workers", "2", "verify", "--quick", "--only", "1,2"]);
    assert_eq!(one.status.code(), Some(0), "{}", String::from_utf8_lossy(&one.stderr));
    assert_eq!(one.stdout, two.stdout);
    let r: Value = serde_json::from_slice(&one.stdout).unwrap();
    assert_eq!(r["result"]["outcomes"].as_array().unwrap().len(), 2);
}

#[test]
fn seed_changes_monte_carlo_output() {
    let a = json(&subrough(&["--seed", "1", "vol", "--system", "elliptic2", "--center", "0,0", "--radii", "0.5", "--samples", "2000"]));
    let b = json(&subrough(&["--seed", "2", "vol", "--system", "elliptic2", "--center", "0,0", "--radii", "0.5", "--samples", "2000"]));
    let va = a["result"]["volumes"][0]["value"].as_f64().unwrap();
    let vb = b["result"]["volumes"][0]["value"].as_f64().unwrap();
    assert_ne!(va, vb);
    let area = std::f64::consts::PI * 0.25;
    for v in [va, vb] {
        assert!((v - area).abs() < 0.05, "{v}");
    }
    assert_ne!(a["config_hash"], b["config_hash"]);
}

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_strongsec"))
}

fn bundled(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json_out(args: &[&str]) -> Value {
    let o = run(args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn verify_passes_on_bundled_config() {
    let cfg = bundled("orthogonal.json");
    let v = json_out(&["verify", "--config", cfg.to_str().unwrap()]);
    let results = v["results"].as_array().unwrap();
    assert_eq!(results.len(), 7);
    assert!(results.iter().all(|r| r["passed"] == true));
    assert_eq!(v["header"]["seed"], 1);
}

#[test]
fn malformed_row_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(bundled("orthogonal.json")).unwrap();
    let bad = text.replacen("{ \"input\": \"10\", \"outputs\": { \"1,0\": 1.0 } }", "{ \"input\": \"10\", \"outputs\": { \"1,0\": 0.9 } }", 1);
    assert_ne!(bad, text);
    let path = dir.path().join("bad.json");
    std::fs::write(&path, bad).unwrap();
    let o = run(&["region", "eval", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("channel.law[2]") && err.contains("`10`") && err.contains("0.9"), "{err}");
}

#[test]
fn unparsable_config_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.json");
    std::fs::write(&path, "{\n  \"channel\": {\n    \"inputs\": [\"0\"],\n  }\n}\n").unwrap();
    let o = run(&["verify", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 4"));
}

#[test]
fn oversized_exact_enumeration_is_a_cap_error() {
    let cfg = bundled("orthogonal.json");
    let o = run(&["secrecy", "--config", cfg.to_str().unwrap(), "--n", "50"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("monte-carlo"));
}

#[test]
fn empty_suite_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg: Value = serde_json::from_slice(&std::fs::read(bundled("orthogonal.json")).unwrap()).unwrap();
    cfg["verify"]["divergence_pairs"] = 0.into();
    let path = dir.path().join("empty.json");
    std::fs::write(&path, serde_json::to_vec(&cfg).unwrap()).unwrap();
    let o = run(&["verify", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&o.stderr).contains("divergence-bound"));
}

#[test]
fn emitted_search_configs_reload_to_the_same_rates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = bundled("orthogonal.json");
    let configs = dir.path().join("frontier");
    let v = json_out(&[
        "region", "search", "--config", cfg.to_str().unwrap(), "--format", "json",
        "--emit-configs", configs.to_str().unwrap(),
    ]);
    let rows = v["results"].as_array().unwrap();
    assert!(!rows.is_empty());
    for r in rows {
        let path = configs.join(r["config"].as_str().unwrap());
        let e = json_out(&["region", "eval", "--config", path.to_str().unwrap()]);
        let back = &e["results"][0];
        for k in ["r1_max", "r2_max"] {
            let (a, b) = (r[k].as_f64().unwrap(), back[k].as_f64().unwrap());
            assert!((a - b).abs() <= 1e-9, "{k}: {a} vs {b}");
        }
        assert_eq!(back["feasible"], !r["trivial"].as_bool().unwrap());
        for k in ["r1", "r2", "r1p", "r2p", "rco"] {
            assert_eq!(back[k], r[k]);
        }
    }
}

#[test]
fn flags_override_config_and_jobs_do_not_change_output() {
    let cfg = bundled("orthogonal.json");
    let c = cfg.to_str().unwrap();
    let a = run(&["simulate", "--config", c, "--trials", "150", "--n", "20,30", "--seed", "4", "--jobs", "1"]);
    let b = run(&["simulate", "--config", c, "--trials", "150", "--n", "20,30", "--seed", "4", "--jobs", "3"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.contains("# seed: 4"));
    let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(data.len(), 3);
    assert!(data[1].contains(",20,150,"));
}

#[test]
fn epsilon_flag_is_validated() {
    let cfg = bundled("orthogonal.json");
    let o = run(&["simulate", "--config", cfg.to_str().unwrap(), "--epsilon", "0.3,0.2,0.4"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn output_file_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sub/sweep.csv");
    let cfg = bundled("wiretap.json");
    let o = run(&["secrecy", "--sweep", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(out).unwrap();
    assert!(text.starts_with("# tool: strongsec"));
    assert!(text.contains("config_sha256"));
}

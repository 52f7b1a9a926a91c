use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn mwl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mwl")).args(args).output().unwrap()
}

fn mwl_env(args: &[&str], key: &str, value: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mwl"))
        .args(args)
        .env(key, value)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn read(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn list_shows_every_family() {
    let o = mwl(&["list"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    for name in ["veronese_s4", "veronese_s2k", "clifford", "hopf_veronese", "cone_of", "plane"] {
        assert!(text.contains(name), "{name}");
    }
    assert!(text.contains("k=2|3"));
}

#[test]
fn help_and_version_succeed_usage_errors_exit_1() {
    assert_eq!(code(&mwl(&["--help"])), 0);
    assert_eq!(code(&mwl(&["--version"])), 0);
    assert_eq!(code(&mwl(&[])), 1);
    assert_eq!(code(&mwl(&["gap", "--example", "veronese_s4"])), 1);
    assert_eq!(code(&mwl(&["gap", "--example", "nope", "--grid", "2"])), 1);
    assert_eq!(code(&mwl(&["gap", "--example", "clifford", "--param", "m", "--grid", "2"])), 1);
    assert_eq!(code(&mwl(&["gap", "--example", "veronese_s4", "--grid", "2", "--random", "3", "--seed", "1"])), 1);
    assert_eq!(code(&mwl(&["certify", "--example", "veronese_s4", "--point", "1,x"])), 1);
    assert_eq!(code(&mwl(&["certify", "--example", "veronese_s4", "--point", "1"])), 1);
    assert_eq!(code(&mwl(&["invariants", "--example", "veronese_s4", "--point", "1,1", "--fd-scheme", "3"])), 1);
    assert_eq!(code(&mwl(&["clifford-check", "--r", "1,1", "--theta", "0"])), 1);
    let o = mwl(&["eval", "--config", "/nonexistent.json", "gap"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8(o.stderr).unwrap().contains("cannot read config"));
}

#[test]
fn clifford_check_example() {
    let o = mwl(&["clifford-check", "--r", "0.577,0.577,0.577", "--theta", "0,1.0472,2.0944", "--assert"]);
    assert_eq!(code(&o), 0);
    let rep: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rep["summary"]["verdict"], "minimal, Wintgen ideal");
    assert!(rep["summary"]["normalized"]["minimal_defect"].as_f64().unwrap() < 1e-4);
    assert!(rep["summary"]["normalized"]["wintgen_defect"].as_f64().unwrap() < 1e-4);

    let torus = mwl(&["clifford-check", "--r", "0.7071,0.7071", "--theta", "0,1.5708"]);
    let rep: Value = serde_json::from_slice(&torus.stdout).unwrap();
    assert_eq!(rep["summary"]["verdict"], "minimal, not Wintgen ideal");
    assert!(rep["summary"]["geometry"]["max_gap"].as_f64().unwrap() > 0.5);
    assert_eq!(code(&mwl(&["clifford-check", "--r", "0.7071,0.7071", "--theta", "0,1.5708", "--assert"])), 3);

    let rep: Value = serde_json::from_slice(&mwl(&["clifford-check", "--r", "0.6,0.8", "--theta", "0,1"]).stdout).unwrap();
    assert_eq!(rep["summary"]["verdict"], "not minimal");
}

#[test]
fn gap_report_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("r.json");
    let csv = dir.path().join("r.csv");
    let o = mwl(&[
        "gap",
        "--example",
        "veronese_s4",
        "--grid",
        "10",
        "--out",
        json.to_str().unwrap(),
        "--csv",
        csv.to_str().unwrap(),
        "--assert",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8(o.stdout).unwrap().contains("max gap"));
    let rep = read(&json);
    assert!(rep["summary"]["max_gap"].as_f64().unwrap() < 1e-7);
    assert_eq!(rep["records"].as_array().unwrap().len(), 100);
    assert!(rep["wall_time_seconds"].is_number());
    assert_eq!(rep["tool_version"], env!("CARGO_PKG_VERSION"));

    let mut reader = csv::Reader::from_path(&csv).unwrap();
    let headers = reader.headers().unwrap().clone();
    assert!(headers.iter().any(|h| h == "gap"));
    assert!(headers.iter().any(|h| h == "point.1"));
    assert!(headers.iter().any(|h| h == "certificate.mu0"));
    assert_eq!(reader.records().count(), 100);
}

#[test]
fn geometric_failures_exit_2_and_still_write_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("plane.json");
    let o = mwl(&["gap", "--example", "plane", "--grid", "3", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8(o.stderr).unwrap().contains("umbilic"));
    let rep = read(&out);
    assert_eq!(rep["summary"]["errors"], 27);

    let cfg = dir.path().join("cusp.json");
    std::fs::write(
        &cfg,
        r#"{"immersion": {"chart_dim": 2, "ambient": {"kind": "euclidean", "dim": 3},
            "components": ["u1^3", "u2", "u2^2"]},
           "region": {"lower": [-1, -1], "upper": [1, 1]}, "point": [0, 0.5]}"#,
    )
    .unwrap();
    let o = mwl(&["eval", "--config", cfg.to_str().unwrap(), "certify"]);
    assert_eq!(code(&o), 2);
    let rep: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(rep["summary"]["error"].as_str().unwrap().contains("not an immersion"));
}

#[test]
fn assert_mode_exits_3_on_tolerance_failure() {
    let o = mwl(&["gap", "--example", "clifford", "--param", "preset=torus", "--random", "5", "--seed", "1", "--assert"]);
    assert_eq!(code(&o), 3);
    let o = mwl(&["certify", "--example", "clifford", "--param", "preset=torus", "--point", "0.1,0.2", "--assert"]);
    assert_eq!(code(&o), 3);
    let o = mwl(&["certify", "--example", "veronese_s4", "--point", "1,2", "--assert"]);
    assert_eq!(code(&o), 0);
}

#[test]
fn config_echo_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let first = mwl(&[
        "invariants",
        "--example",
        "cone_of",
        "--param",
        "base=clifford",
        "--random",
        "4",
        "--seed",
        "3",
        "--fd-step",
        "0.002",
        "--deterministic",
    ]);
    assert_eq!(code(&first), 0);
    let rep: Value = serde_json::from_slice(&first.stdout).unwrap();
    let cfg = dir.path().join("echo.json");
    std::fs::write(&cfg, rep["config"].to_string()).unwrap();
    let again = mwl(&["eval", "--config", cfg.to_str().unwrap(), "invariants", "--deterministic"]);
    assert_eq!(code(&again), 0);
    assert_eq!(first.stdout, again.stdout);
}

#[test]
fn thread_count_does_not_change_reports() {
    let args = ["gap", "--example", "hopf_veronese", "--random", "40", "--seed", "9", "--deterministic"];
    let one = mwl_env(&args, "MWL_THREADS", "1");
    let four = mwl_env(&args, "MWL_THREADS", "4");
    assert_eq!(code(&one), 0);
    assert_eq!(one.stdout, four.stdout);
    assert!(!String::from_utf8(one.stdout).unwrap().contains("wall_time"));
    assert_eq!(code(&mwl_env(&args, "MWL_THREADS", "0")), 1);
    assert_eq!(code(&mwl_env(&args, "MWL_THREADS", "many")), 1);
}

#[test]
fn transform_and_probe_reports() {
    let o = mwl(&[
        "transform",
        "--example",
        "veronese_s4",
        "--moebius-seed",
        "3",
        "--check-invariance",
        "--samples",
        "3",
        "--assert",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rep: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rep["summary"]["within_tolerance"], true);
    assert_eq!(rep["summary"]["invariance"]["points"].as_array().unwrap().len(), 3);

    let o = mwl(&["transform", "--example", "plane", "--moebius-seed", "1", "--check-invariance"]);
    assert_eq!(code(&o), 2);

    let o = mwl(&["probe", "--example", "veronese_s4", "--random", "8", "--seed", "2", "--assert"]);
    assert_eq!(code(&o), 0);
    let rep: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rep["summary"]["consistent_with_homogeneity"], true);
    assert_eq!(rep["records"].as_array().unwrap().len(), 8);
}

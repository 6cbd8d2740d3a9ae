use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spikebeta"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

const QUARTIC: &str = "0,0.11418,0.37448,-0.16736,0.02093";

#[test]
fn predict_semicircle_location_and_scale() {
    let out = run(&["predict", "--coeffs", "0,0,1", "--a", "2", "--beta", "2", "--n", "200"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let c = &v["components"][0];
    assert!((c["location"].as_f64().unwrap() - 1.5).abs() < 1e-10);
    assert!((c["scale"].as_f64().unwrap() - 0.035_355_3).abs() < 1e-7);
    assert_eq!(v["provenance"]["command"], "predict");
    let cdf = v["cdf"].as_array().unwrap();
    assert!(cdf.windows(2).all(|w| w[0][1].as_f64() <= w[1][1].as_f64()));
}

#[test]
fn eqm_quartic_conditions_hold() {
    let out = run(&["eqm", "--coeffs", QUARTIC]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    for k in ["cond1_ok", "cond2_ok", "cond3_ok", "cond4_ok"] {
        assert_eq!(v["conditions"][k], true, "{k}");
    }
    // the output is itself a readable measure file
    spikebeta::io::parse_eqm_json(&out.stdout).unwrap();
}

#[test]
fn phase_csv_is_byte_stable() {
    let args = ["phase", "--coeffs", "0,0,1", "--a-min", "0.5", "--a-max", "3", "--a-count", "6"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.starts_with("# library: spikebeta"));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 7);
    assert!(text.contains("supercritical_unique"));
}

#[test]
fn sample_then_ks_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let s1 = dir.path().join("s1.csv");
    let s2 = dir.path().join("s2.csv");
    for p in [&s1, &s2] {
        let out = run(&[
            "sample", "--a", "2", "--beta", "2", "--n", "60", "--trials", "400", "--seed", "3", "--out",
            p.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(std::fs::read(&s1).unwrap(), std::fs::read(&s2).unwrap());
    let out = run(&["ks", "--sample", s1.to_str().unwrap(), "--tol-ks", "0.2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let d = json(&out)["d"].as_f64().unwrap();
    assert!(d < 0.2, "{d}");
    // an impossible tolerance is a verification failure
    let out = run(&["ks", "--sample", s1.to_str().unwrap(), "--tol-ks", "1e-9"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn mcmc_sample_carries_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("m.csv");
    let out = run(&[
        "sample", "--method", "mcmc", "--coeffs", "0,0,1", "--a", "2", "--beta", "3", "--n", "10", "--steps",
        "20000", "--seed", "1", "--out", p.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let file = spikebeta::io::parse_samples_csv(&std::fs::read(&p).unwrap()).unwrap();
    assert_eq!(file.get("method"), Some("Mcmc"));
    assert!(file.get("acceptance_rate").is_some());
    assert!(!file.values.is_empty());
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    write(&cfg, r#"{"coeffs": [0, 0, 1], "a": 2, "beta": 2, "n": 50}"#);
    let out = run(&["predict", "--config", cfg.to_str().unwrap(), "--n", "200"]);
    assert_eq!(out.status.code(), Some(0));
    let scale = json(&out)["components"][0]["scale"].as_f64().unwrap();
    assert!((scale - 1.0 / (2.0 * 200f64.sqrt())).abs() < 1e-12);
    // config for a different command is rejected
    write(&cfg, r#"{"command": "eqm", "coeffs": [0, 0, 1]}"#);
    assert_eq!(run(&["predict", "--config", cfg.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn potential_file_input() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("v.json");
    write(&p, r#"{"coeffs": [0, 0, 2]}"#);
    let out = run(&["eqm", "--potential", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!((json(&out)["edge"].as_f64().unwrap() - 1.0).abs() < 1e-10);
}

#[test]
fn input_errors_exit_one() {
    for args in [
        vec!["predict", "--coeffs", "0,1", "--a", "2", "--beta", "2", "--n", "10"],
        vec!["predict", "--coeffs", "0,0,1", "--beta", "2", "--n", "10"],
        vec!["sample", "--a", "2", "--beta", "3", "--n", "10", "--trials", "5", "--seed", "0"],
        vec!["sample", "--a", "2", "--beta", "2", "--n", "10", "--trials", "5"],
        vec!["predict", "--coeffs", "0,0,1", "--a", "2", "--beta", "-1", "--n", "10"],
        vec!["nonsense"],
        vec!["ks", "--sample", "/nonexistent/file.csv"],
    ] {
        let out = run(&args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn verification_commands_pass() {
    let out = run(&["verify-jack", "--n", "4", "--beta", "3", "--k-max", "10"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["report"]["passed"], true);
    let out = run(&["verify-appendix"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let reports = json(&out)["reports"].as_array().unwrap().clone();
    assert!(reports.len() > 50);
    assert!(reports.iter().all(|r| r["passed"] == true));
}

#[test]
fn help_exits_zero() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
}

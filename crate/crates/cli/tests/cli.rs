use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sqisw_core::dynamics::estimate_period;
use tempfile::TempDir;

const NOISY: &str = r#"{
    "noise": {"t1a_ns": 400, "t1b_ns": 400, "t2a_ns": 120, "t2b_ns": 120},
    "measurement": {"f0a": 0.95, "f1a": 0.95, "f0b": 0.93, "f1b": 0.93, "xab": 0.117, "xba": 0.117},
    "shots": 1200,
    "seed": 11,
    "flags": {"finite_pulse": true}
}"#;

fn sqisw(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sqisw"))
        .args(args)
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn json(out: &Output) -> serde_json::Value {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn error_line(out: &Output) -> serde_json::Value {
    let text = String::from_utf8(out.stderr.clone()).unwrap();
    assert_eq!(text.trim_end().lines().count(), 1, "{text}");
    serde_json::from_str(text.trim_end()).unwrap()
}

#[test]
fn swap_scan_csv_recovers_period_and_theory_column() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("scan.csv");
    let o = sqisw(&[
        "swap-scan",
        "--delta",
        "0,200",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "delta_mhz,tf_ns,p00,p01,p10,p11");
    let (mut t, mut p) = (Vec::new(), Vec::new());
    for line in lines {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        if v[0] == 0.0 {
            t.push(v[1]);
            p.push(v[3]);
        }
    }
    let period = estimate_period(&t, &p).unwrap();
    assert!(
        (period - 1000.0 / 11.0).abs() / (1000.0 / 11.0) < 0.005,
        "{period}"
    );

    let summary = std::fs::read_to_string(dir.path().join("scan_summary.csv")).unwrap();
    let last: Vec<f64> = summary
        .lines()
        .last()
        .unwrap()
        .split(',')
        .map(|x| x.parse().unwrap())
        .collect();
    assert_eq!(last[0], 200.0);
    assert!((last[2] - 0.00302).abs() < 5e-6);
}

#[test]
fn qst_reports_ideal_and_noisy_states() {
    let v = json(&sqisw(&["qst", "--input", "01", "--gate", "none"]));
    assert!((v["rho"]["re"][1][1].as_f64().unwrap() - 1.0).abs() < 1e-12);

    let v = json(&sqisw(&["qst", "--input", "0+i1,0+i1", "--gate", "sqisw"]));
    assert!((v["state_fidelity"].as_f64().unwrap() - 1.0).abs() < 1e-12);

    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "noisy.json", NOISY);
    let v = json(&sqisw(&[
        "qst",
        "--config",
        cfg.to_str().unwrap(),
        "--input",
        "0+i1,0+i1",
        "--gate",
        "sqisw",
    ]));
    let f = v["state_fidelity"].as_f64().unwrap();
    assert!(f < 0.99 && f > 0.3, "{f}");
    assert_eq!(v["shot_records"].as_array().unwrap().len(), 9);
    assert_eq!(v["shot_records"][0]["shots"], 1200);
}

#[test]
fn qpt_noiseless_and_noisy() {
    let v = json(&sqisw(&["qpt"]));
    for side in ["calibrated", "uncalibrated"] {
        assert!((v[side]["process_fidelity"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    }
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "noisy.json", NOISY);
    let v = json(&sqisw(&[
        "qpt",
        "--config",
        cfg.to_str().unwrap(),
        "--shots",
        "exact",
    ]));
    let cal = v["calibrated"]["process_fidelity"].as_f64().unwrap();
    let uncal = v["uncalibrated"]["process_fidelity"].as_f64().unwrap();
    assert!(cal > uncal, "{cal} vs {uncal}");
    assert_eq!(v["calibrated"]["chi"]["basis"], "I,X,-iY,Z ⊗ I,X,-iY,Z");
}

#[test]
fn analyze_reads_chi_written_by_qpt() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "cfg.json",
        r#"{"noise": {"t1a_ns": 400, "t1b_ns": 400, "t2a_ns": 120, "t2b_ns": 120}, "flags": {"finite_pulse": true}}"#,
    );
    let qpt_out = dir.path().join("qpt.json");
    let o = sqisw(&[
        "qpt",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        qpt_out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&qpt_out).unwrap()).unwrap();
    let chi = write(
        dir.path(),
        "chi.json",
        &serde_json::to_string(&v["calibrated"]["chi"]).unwrap(),
    );

    let a = json(&sqisw(&[
        "analyze",
        chi.to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
        "--classify",
    ]));
    let t2 = a["t2_ns"].as_f64().unwrap();
    assert!((t2 - 120.0).abs() / 120.0 < 0.2, "{t2}");
    let flagged = a["flagged_elements"].as_array().unwrap();
    assert!(!flagged.is_empty());
    assert!(flagged.iter().all(|f| f["class"].is_string()));
}

#[test]
fn analyze_nominal_elements_and_ideal_chi() {
    let dir = TempDir::new().unwrap();
    let mut re = vec![vec![0.0; 16]; 16];
    re[0][0] = 0.91;
    re[3][3] = 0.09;
    re[3][12] = 0.02;
    re[12][3] = 0.02;
    let doc = serde_json::json!({"dim": 16, "basis": "I,X,-iY,Z ⊗ I,X,-iY,Z", "re": re, "im": vec![vec![0.0; 16]; 16]});
    let chi = write(dir.path(), "chi.json", &doc.to_string());
    let a = json(&sqisw(&["analyze", chi.to_str().unwrap(), "--g-mhz", "11"]));
    let t2 = a["t2_ns"].as_f64().unwrap();
    let kappa = a["kappa"].as_f64().unwrap();
    assert!((110.0..=115.0).contains(&t2), "{t2}");
    assert!((0.10..=0.13).contains(&kappa), "{kappa}");

    let qpt = json(&sqisw(&["qpt"]));
    let ideal = write(
        dir.path(),
        "ideal.json",
        &serde_json::to_string(&qpt["calibrated"]["chi"]).unwrap(),
    );
    let o = sqisw(&["analyze", ideal.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(error_line(&o)["error"], "extraction_undefined");
}

#[test]
fn calibrate_recovers_planted_model() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "noisy.json", NOISY);
    let v = json(&sqisw(&[
        "calibrate",
        "--config",
        cfg.to_str().unwrap(),
        "--shots",
        "exact",
    ]));
    for (k, want) in [
        ("f0a", 0.95),
        ("f1a", 0.95),
        ("f0b", 0.93),
        ("f1b", 0.93),
        ("xab", 0.117),
        ("xba", 0.117),
    ] {
        assert!((v["model"][k].as_f64().unwrap() - want).abs() < 1e-9, "{k}");
    }
    assert!((v["estimate"]["crosstalk_consistency_xab"].as_f64().unwrap() - 0.117).abs() < 1e-9);
    assert!(v["estimate"]["crosstalk_approximate"]["xab"].is_number());
}

#[test]
fn config_errors_exit_with_code_two() {
    let dir = TempDir::new().unwrap();
    let bad = write(dir.path(), "bad.json", r#"{"seed": 1, "colour": "blue"}"#);
    let o = sqisw(&["qpt", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_line(&o)["error"], "config");

    for args in [
        vec!["qpt", "--shots", "lots"],
        vec!["qst", "--input", "2"],
        vec!["qpt", "--gate", "toffoli"],
        vec!["swap-scan", "--tf", "5:1:1"],
        vec!["qpt", "--config", "/nonexistent/cfg.json"],
        vec!["qpt", "--jobs", "0"],
        vec!["frobnicate"],
    ] {
        let o = sqisw(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        error_line(&o);
    }
}

#[test]
fn analyze_rejects_malformed_chi() {
    let dir = TempDir::new().unwrap();
    let chi = write(
        dir.path(),
        "chi.json",
        r#"{"dim": 16, "basis": "nope", "re": [], "im": []}"#,
    );
    let o = sqisw(&["analyze", chi.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn outputs_are_identical_across_seeds_and_jobs() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "noisy.json", NOISY);
    let c = cfg.to_str().unwrap();
    let run = |args: &[&str], jobs: &str| {
        let mut a: Vec<&str> = args.to_vec();
        a.extend(["--config", c, "--jobs", jobs]);
        let o = sqisw(&a);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        o.stdout
    };
    let qst = ["qst", "--input", "0+1,1", "--gate", "cnot"];
    assert_eq!(run(&qst, "1"), run(&qst, "8"));
    let other_seed = {
        let mut a = qst.to_vec();
        a.extend(["--seed", "12"]);
        run(&a, "1")
    };
    assert_ne!(run(&qst, "1"), other_seed);
}

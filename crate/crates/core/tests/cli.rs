use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use yamabe_lab::warped::WarpedMetric;

fn lab(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_yamabe-lab"))
        .args(args)
        .current_dir(cwd)
        .env_remove("YAMABE_LAB_OUT")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn run_writes_reports_and_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "cfg.json",
        r#"{"case": ["cylinder", "hemisphere"], "n": 3, "N": 64, "p_list": [2, 5], "flow": {"t_end": 0.005}}"#,
    );
    let out = dir.path().join("out");
    let o = lab(
        &[
            "run",
            "--config",
            &cfg,
            "--out",
            out.to_str().unwrap(),
            "--jobs",
            "2",
        ],
        dir.path(),
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    for case in ["cylinder", "hemisphere"] {
        for file in [
            "metric.json",
            "solution_p2.json",
            "history_p5.csv",
            "theorem_b_p5.json",
            "trajectory.csv",
        ] {
            assert!(out.join(case).join(file).is_file(), "{case}/{file}");
        }
    }
    let csv = fs::read_to_string(out.join("summary.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("case,p,lhs,rhs,rel_error,trusted"));
    assert_eq!(lines.count(), 4);
    let md = fs::read_to_string(out.join("summary.md")).unwrap();
    assert!(md.contains("status: PASS"));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("cylinder/theorem_b_p2.json")).unwrap())
            .unwrap();
    assert!((report["rhs_total"].as_f64().unwrap() - 8.0 / 3.0).abs() < 1e-6);
    assert_eq!(report["passed"], true);
}

#[test]
fn failing_threshold_sets_exit_status() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "cfg.json",
        r#"{"case": "cylinder", "N": 32, "p_list": [2], "thresholds": {"rel_error": 1e-14}, "out": "res"}"#,
    );
    let o = lab(&["run", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(fs::read_to_string(dir.path().join("res/summary.md"))
        .unwrap()
        .contains("status: FAIL"));
}

#[test]
fn invalid_config_is_rejected_before_running() {
    let dir = tempfile::tempdir().unwrap();
    for (i, body) in [
        r#"{"case": "cylinder", "p_list": []}"#,
        r#"{"case": "cylinder", "p_list": [7]}"#,
        r#"{"case": "torus", "p_list": [2]}"#,
        r#"{"case": "cylinder", "p_list": [2], "extra": 1}"#,
        r#"{"case": "cylinder", "n": 2, "p_list": [2]}"#,
    ]
    .iter()
    .enumerate()
    {
        let cfg = write(dir.path(), &format!("bad{i}.json"), body);
        let o = lab(&["run", "--config", &cfg, "--out", "never"], dir.path());
        assert_eq!(o.status.code(), Some(2), "{body}");
    }
    assert!(!dir.path().join("never").exists());
}

#[test]
fn metric_file_case() {
    let dir = tempfile::tempdir().unwrap();
    let wm = WarpedMetric::perturbed_cylinder(3, 128, 0.03).unwrap();
    fs::write(dir.path().join("metric.json"), wm.to_json().unwrap()).unwrap();
    let cfg = write(
        dir.path(),
        "cfg.json",
        r#"{"case": {"kind": "from_file", "path": "metric.json"}, "p_list": [2], "out": "res"}"#,
    );
    let o = lab(&["run", "--config", &cfg], dir.path());
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let csv = fs::read_to_string(dir.path().join("res/summary.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn verify_prints_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(
        &["verify", "--case", "cylinder", "--p", "3", "--N", "32"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["lhs_fd"].as_f64().unwrap() - 2.0).abs() < 1e-6);
    assert_eq!(v["N"], 32);
    assert!(v["rhs_terms"]["boundary_line"].as_f64().unwrap().abs() <= 1e-10);
}

#[test]
fn sweep_reports_orders() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "cfg.json",
        r#"{"case": "cylinder", "N": 32, "p_list": [2]}"#,
    );
    let o = lab(&["sweep", "--config", &cfg, "--out", "res"], dir.path());
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let csv = fs::read_to_string(dir.path().join("res/orders.csv")).unwrap();
    assert!(csv.starts_with("quantity,case,level,resolution,value,order"));
    let kernel: Vec<f64> = csv
        .lines()
        .filter(|l| l.starts_with("kernel_cross"))
        .filter_map(|l| l.rsplit(',').next().unwrap().parse().ok())
        .collect();
    assert_eq!(kernel.len(), 2);
    assert!(kernel.iter().all(|&q| q > 1.8), "{kernel:?}");
}

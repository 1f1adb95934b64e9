use std::fs;
use std::process::Command;

fn vortun() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vortun"))
}

const NULL: &str = r#"{
  "sim": {"l_x": 6.0, "l_y": 60.0, "n_kx": 12, "n_ky": 4, "t_start": -20.0, "t_end": 20.0},
  "pulse": {"shape": "bipolar-derivative", "m0": 1.0, "e_max": 0.0, "m_min": 1.0, "t_p": 4.0, "t_center": 0.0},
  "outputs": {"sampling": {"per_period": 20, "per_tp": 40}}
}"#;

#[test]
fn simulate_writes_outputs_identically_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("null.json");
    fs::write(&cfg, NULL).unwrap();
    for n in ["1", "3"] {
        let out = dir.path().join(format!("run{n}"));
        let st = vortun()
            .args(["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--threads", n, "--tol", "1e-10"])
            .output()
            .unwrap();
        assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
        let summary: serde_json::Value = serde_json::from_slice(&st.stdout).unwrap();
        assert!(summary["n_transported"].as_f64().unwrap().abs() < 1e-15);
    }
    for f in ["summary.json", "timeseries.csv"] {
        assert_eq!(fs::read(dir.path().join("run1").join(f)).unwrap(), fs::read(dir.path().join("run3").join(f)).unwrap());
    }
}

#[test]
fn bad_config_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, NULL.replace("\"n_ky\": 4", "\"n_ky\": \"four\"")).unwrap();
    let st = vortun().args(["simulate", "--config", cfg.to_str().unwrap()]).output().unwrap();
    assert_eq!(st.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&st.stderr).contains("line 2"));
}

#[test]
fn verify_exit_codes() {
    let ok = vortun().args(["verify", "materials"]).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ok.stdout).lines().all(|l| l.starts_with("PASS")));
    let bad = vortun().args(["verify", "nonsense"]).output().unwrap();
    assert_ne!(bad.status.code(), Some(0));
}

#[test]
fn analytic_subcommands() {
    let est = vortun().args(["estimate"]).output().unwrap();
    assert!(est.status.success());
    assert!(String::from_utf8_lossy(&est.stdout).contains("L_x / lambda"));
    let inst = vortun().args(["instanton"]).output().unwrap();
    let v: serde_json::Value = serde_json::from_slice(&inst.stdout).unwrap();
    assert!((v["saddle"]["v_e_star"].as_f64().unwrap() - 10.0).abs() < 0.5);
    let dir = tempfile::tempdir().unwrap();
    let f = vortun().args(["fermions", "--out", dir.path().to_str().unwrap()]).output().unwrap();
    assert!(f.status.success());
    assert!(dir.path().join("boundary.csv").exists() && dir.path().join("momentum.csv").exists());
}

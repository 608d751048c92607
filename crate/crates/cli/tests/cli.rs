use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use muhs_cli::config::load_config;
use tempfile::TempDir;

fn muhs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_muhs"))
        .args(args)
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn zero_preset_completes_with_zero_diagnostics() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "zero.json",
        r#"{"n":32,"t_end":0.05,"gamma1":0.1,"gamma2":0,"initial":"zero","mode":"direct","dt":0.01}"#,
    );
    let out = tmp.path().join("out");
    let o = muhs(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let report = read_json(&out.join("report.json"));
    assert_eq!(report["status"], "completed");
    let mut rows = csv::Reader::from_path(out.join("diagnostics.csv")).unwrap();
    let headers = rows.headers().unwrap().clone();
    assert_eq!(
        headers.iter().collect::<Vec<_>>(),
        [
            "t",
            "mu0",
            "energy",
            "a",
            "sup_ux",
            "inf_ux",
            "slope_integral",
            "u_linf",
            "rho_linf",
            "utx_residual",
            "hs_norm_u",
            "hs_norm_rho",
            "dt"
        ]
    );
    for row in rows.records() {
        let row = row.unwrap();
        for (h, v) in headers.iter().zip(row.iter()) {
            if h != "t" && h != "dt" {
                assert_eq!(v.parse::<f64>().unwrap(), 0.0, "{h}");
            }
        }
    }
    let term = read_json(&out.join("termination.json"));
    assert_eq!(term["status"], "completed");
    assert!(term["thresholds"]["s_max"].as_f64().unwrap() > 0.0);
}

#[test]
fn validation_errors_exit_four_and_name_the_key() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "bad.json",
        r#"{"n":100,"t_end":1,"gamma1":0,"gamma2":0,"initial":"sine","mode":"direct"}"#,
    );
    let o = muhs(&["run", &cfg]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`n`"));
    let cfg = write(
        tmp.path(),
        "global.json",
        r#"{"n":64,"t_end":1,"gamma1":0.3,"gamma2":0.1,"initial":"global","mode":"flow"}"#,
    );
    assert_eq!(muhs(&["run", &cfg]).status.code(), Some(4));
}

#[test]
fn runs_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "flow.json",
        r#"{"n":64,"t_end":0.2,"gamma1":0.2,"gamma2":0.1,"initial":"global","mode":"flow","dt":0.001,"checkpoint_every":50}"#,
    );
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(
        muhs(&["run", &cfg, "--out", a.to_str().unwrap(), "--seed", "3"])
            .status
            .code(),
        Some(0)
    );
    assert_eq!(
        muhs(&["run", &cfg, "--out", b.to_str().unwrap(), "--seed", "3"])
            .status
            .code(),
        Some(0)
    );
    for name in [
        "diagnostics.csv",
        "flow.csv",
        "certificate.json",
        "report.json",
    ] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
    let cert = read_json(&a.join("certificate.json"));
    assert_eq!(cert["applicable"], true);
    for key in ["min_identity", "max_identity_drift", "qx_lower_bound"] {
        assert!(cert[key].is_number(), "{key}");
    }
}

#[test]
fn short_sine_flow_is_resolved() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "sine.json",
        r#"{"n":256,"t_end":0.05,"gamma1":0,"gamma2":0,"initial":"sine","mode":"flow","dt":0.0001}"#,
    );
    let out = tmp.path().join("out");
    assert_eq!(
        muhs(&["run", &cfg, "--out", out.to_str().unwrap()])
            .status
            .code(),
        Some(0)
    );
    let report = read_json(&out.join("report.json"));
    assert!(report["max_qx_discrepancy"].as_f64().unwrap() < 1e-5);
    assert!(report["max_rho_identity_residual"].as_f64().unwrap() < 1e-5);
    let cert = read_json(&out.join("certificate.json"));
    assert_eq!(cert["applicable"], false);
    let flow = csv::Reader::from_path(out.join("flow.csv"))
        .unwrap()
        .headers()
        .unwrap()
        .clone();
    assert_eq!(
        flow.iter().collect::<Vec<_>>(),
        [
            "t",
            "x_seed",
            "q",
            "qx_fd",
            "qx_formula",
            "rho_identity_value"
        ]
    );
}

#[test]
fn picard_on_small_sine_converges() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "picard.json",
        r#"{"n":64,"t_end":1,"gamma1":0,"gamma2":0,"initial":{"preset":"sine","scale":0.1},"mode":"picard","dt":0.001}"#,
    );
    let out = tmp.path().join("out");
    assert_eq!(
        muhs(&["run", &cfg, "--out", out.to_str().unwrap()])
            .status
            .code(),
        Some(0)
    );
    let summary = read_json(&out.join("summary.json"));
    assert_eq!(summary["converged"], true);
    assert!(summary["final_error"].as_f64().unwrap() < 1e-4);
    let mut rows = csv::Reader::from_path(out.join("picard.csv")).unwrap();
    assert_eq!(
        rows.headers().unwrap().iter().collect::<Vec<_>>(),
        ["n", "sup_l_n", "h_n", "ratio", "mu0_n", "error_vs_direct"]
    );
    assert_eq!(rows.records().count(), 12);
}

#[test]
fn steep_data_exit_with_wave_breaking() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "muhs.json",
        r#"{"n":256,"t_end":1,"gamma1":0,"gamma2":0,"initial":"muhs","mode":"direct","thresholds":{"s_max":50}}"#,
    );
    let out = tmp.path().join("out");
    assert_eq!(
        muhs(&["run", &cfg, "--out", out.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        read_json(&out.join("report.json"))["status"],
        "wave_breaking_detected"
    );
}

#[test]
fn failure_still_reports() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "ok.json",
        r#"{"n":16,"t_end":0.1,"gamma1":0,"gamma2":0,"initial":"zero","mode":"direct"}"#,
    );
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "").unwrap();
    let o = muhs(&["run", &cfg, "--out", blocker.join("sub").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&o.stdout).contains("failed"));
}

#[test]
fn batch_runs_in_separate_directories() {
    let tmp = TempDir::new().unwrap();
    let a = write(
        tmp.path(),
        "a.json",
        r#"{"n":16,"t_end":0.1,"gamma1":0,"gamma2":0,"initial":"zero","mode":"direct","dt":0.01}"#,
    );
    let b = write(
        tmp.path(),
        "b.json",
        r#"{"n":16,"t_end":0.1,"gamma1":0,"gamma2":0,"initial":"sine","mode":"norms"}"#,
    );
    let out = tmp.path().join("batch");
    let o = Command::new(env!("CARGO_BIN_EXE_muhs"))
        .args(["run", &a, &b, "--out", out.to_str().unwrap()])
        .env("MUHS_BATCH_WIDTH", "1")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(out.join("a").join("diagnostics.csv").exists());
    assert!(out.join("b").join("norms.csv").exists());
}

#[test]
fn norms_prints_table() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "norms.json",
        r#"{"n":32,"t_end":1,"gamma1":0,"gamma2":0,"initial":{"u":[{"k":0,"re":3}],"rho":[]},"mode":"norms","norms":[{"s":1.5}]}"#,
    );
    let o = muhs(&["norms", &cfg]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("name,s,p,r,value"));
    let u0: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(u0[0], "u0");
    assert!((u0[4].parse::<f64>().unwrap() - 3.0 * (-1.5f64).exp2()).abs() < 1e-12);
}

#[test]
fn config_round_trips_through_disk() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "c.json",
        r#"{"n":64,"t_end":0.5,"gamma1":0.2,"gamma2":0.1,"initial":"global","mode":"flow","thresholds":{"s_max":100,"max_tail_fraction":0.01},"seed":4}"#,
    );
    let loaded = load_config(Path::new(&cfg)).unwrap();
    let again = write(
        tmp.path(),
        "again.json",
        &muhs_cli::config::to_json(&loaded),
    );
    assert_eq!(load_config(Path::new(&again)).unwrap(), loaded);
}

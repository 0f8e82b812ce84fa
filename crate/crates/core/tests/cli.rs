//! End-to-end runs of the command-line front end.

use std::fs;
use std::path::Path;
use std::process::Command;

use navier_blowup::cli::{run_args, RunConfig};
use serde_json::Value;

fn run(args: &[&str], out: &Path) -> navier_blowup::Result<navier_blowup::cli::Outcome> {
    let mut v = vec!["blowup"];
    v.extend_from_slice(args);
    v.push("--out");
    v.push(out.to_str().unwrap());
    run_args(v)
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let headers = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(|v| v.parse().unwrap()).collect())
        .collect();
    (headers, rows)
}

fn column(headers: &[String], name: &str) -> usize {
    headers
        .iter()
        .position(|h| h.split('[').next() == Some(name))
        .unwrap_or_else(|| panic!("no column {name} in {headers:?}"))
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn constants_rows() {
    let dir = tempfile::tempdir().unwrap();
    for n in [5, 6] {
        let out = dir.path().join(format!("n{n}"));
        let o = run(&["constants", "--n", &n.to_string()], &out).unwrap();
        assert!(o.pass);
        let (h, rows) = csv_rows(&out.join("constants.csv"));
        let row = &rows[0];
        assert!(row[column(&h, "c2_e34")] > 0.0);
        if n == 6 {
            let c0 = row[column(&h, "c0")];
            assert!((c0 - 384f64.powf(0.25)).abs() < 1e-12);
            let closed = 384f64.powf(1.5) * std::f64::consts::PI.powi(3) / 24.0;
            assert!((row[column(&h, "c1")] - closed).abs() / closed < 1e-9);
            assert!((row[column(&h, "phi_center")] - 4.0 / 3.0).abs() < 1e-12);
        }
    }
}

#[test]
fn every_column_carries_provenance() {
    let dir = tempfile::tempdir().unwrap();
    run(&["constants"], dir.path()).unwrap();
    run(&["robin", "--stations", "21"], dir.path()).unwrap();
    for f in ["constants.csv", "robin.csv"] {
        let (h, _) = csv_rows(&dir.path().join(f));
        for name in h {
            let prov = name.split('[').nth(1).expect("provenance suffix");
            assert!(
                ["formula]", "quadrature]", "solver]", "fit]"].contains(&prov),
                "{name}"
            );
        }
    }
    let j = json(&dir.path().join("constants.json"));
    assert_eq!(j["schema_version"], 1);
    assert_eq!(j["command"], "constants");
}

#[test]
fn robin_center_row_and_slopes() {
    let dir = tempfile::tempdir().unwrap();
    run(&["robin", "--stations", "41", "--radius", "2"], dir.path()).unwrap();
    let (h, rows) = csv_rows(&dir.path().join("robin.csv"));
    let center = rows
        .iter()
        .find(|r| r[column(&h, "x1")].abs() < 1e-12)
        .unwrap();
    // φ(center) = (2n−4)/n·R^{4−n} with n = 6, R = 2.
    assert!((center[column(&h, "phi")] - 4.0 / 3.0 / 4.0).abs() < 1e-4);
    assert!(center[column(&h, "grad_norm")] < 1e-8);
    let j = json(&dir.path().join("robin.json"));
    let slope = j["data"]["boundary"]["phi_fit"]["slope"].as_f64().unwrap();
    assert!((slope + 2.0).abs() < 0.15);
}

#[test]
fn verify_blowup_default_run_passes_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let oa = run(&["verify-blowup", "--seed", "7"], &a).unwrap();
    let ob = run(&["verify-blowup", "--seed", "7"], &b).unwrap();
    assert!(oa.pass && ob.pass);
    for f in ["sweep.csv", "solution_final.csv", "solution_final.json"] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    let j = json(&a.join("verify_blowup.json"));
    let v = &j["data"]["verdict"];
    assert_eq!(v["operative"], "e34");
    let c = navier_blowup::bubble::balance_constants::<f64>(6).unwrap();
    let target = c.c1 * c.c0 * c.c0 / c.c2 * 4.0 / 3.0;
    for e in v["extrapolated_eps_m2"].as_array().unwrap() {
        let l = e["limit"].as_f64().unwrap();
        assert!((l - target).abs() / target < 0.15, "{l} vs {target}");
    }
    let (h, rows) = csv_rows(&a.join("sweep.csv"));
    assert_eq!(rows.len(), 7);
    assert_eq!(rows[6][column(&h, "eps")], 0.005);
}

#[test]
fn failed_sweep_keeps_partial_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("in.json");
    let cfg = RunConfig {
        newton_tol: 1e-30,
        ..RunConfig::default()
    };
    cfg.save(&cfg_path).unwrap();
    let out = dir.path().join("out");
    let err = run(
        &["verify-blowup", "--config", cfg_path.to_str().unwrap()],
        &out,
    )
    .unwrap_err();
    assert!(err.to_string().contains("partial results"), "{err}");
    let j = json(&out.join("verify_blowup.json"));
    assert!(j["data"]["failure"].is_string());
    assert_eq!(j["data"]["pass"], false);
    assert!(out.join("sweep.csv").exists());
}

#[test]
fn short_or_unordered_schedules_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    for eps in ["0.3,0.2", "0.3,0.1,0.2,0.05", "0.3,0.2,0.1,-0.05"] {
        let err = run(&["verify-blowup", "--eps", eps], dir.path()).unwrap_err();
        assert!(
            matches!(err, navier_blowup::Error::InvalidArgument(_)),
            "{eps}: {err}"
        );
    }
    assert!(run(&["constants", "--n", "4"], dir.path()).is_err());
    assert!(run(&["verify-blowup", "--n", "5"], dir.path()).is_err());
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("in.json");
    let cfg = RunConfig {
        n: 5,
        radius: 3.0,
        ..RunConfig::default()
    };
    cfg.save(&cfg_path).unwrap();
    let out = dir.path().join("out");
    run(
        &[
            "constants",
            "--config",
            cfg_path.to_str().unwrap(),
            "--radius",
            "2",
        ],
        &out,
    )
    .unwrap();
    let written = RunConfig::load(&out.join("config.json")).unwrap();
    assert_eq!(written.n, 5);
    assert_eq!(written.radius, 2.0);
    assert_eq!(written.out, out);
    // Unknown fields are rejected.
    fs::write(&cfg_path, r#"{"n": 6, "bogus": 1}"#).unwrap();
    assert!(run(&["constants", "--config", cfg_path.to_str().unwrap()], &out).is_err());
}

#[test]
fn supercritical_report_sections() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["supercritical", "--eps", "0.3,0.1,0.02,0.01"], dir.path()).unwrap();
    assert!(o.pass);
    let j = json(&dir.path().join("supercritical.json"));
    let d = &j["data"];
    assert_eq!(d["obstruction"]["all_positive"], true);
    assert_eq!(d["probe"]["any_concentrating"], false);
    let contrast = d["subcritical_contrast"].as_array().unwrap();
    assert_eq!(contrast.len(), 4);
    for c in contrast
        .iter()
        .filter(|c| c["eps"].as_f64().unwrap() <= 0.02)
    {
        assert_eq!(c["concentrating"], true);
    }
}

#[test]
fn expansion_orders_slopes() {
    let dir = tempfile::tempdir().unwrap();
    run(&["expansion-orders"], dir.path()).unwrap();
    let j = json(&dir.path().join("expansion_orders.json"));
    let t = j["data"]["theta_norm_fit"]["slope"].as_f64().unwrap();
    let f = j["data"]["remainder_fit"]["slope"].as_f64().unwrap();
    assert!((t + 1.0).abs() < 0.2 && (f + 3.0).abs() < 0.3);
}

#[test]
fn binary_exit_codes() {
    let exe = env!("CARGO_BIN_EXE_blowup");
    let dir = tempfile::tempdir().unwrap();
    let ok = Command::new(exe)
        .args(["constants", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("c2_e34"));
    let bad = Command::new(exe)
        .args(["verify-blowup", "--eps", "0.3,0.2", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("at least 4"));
}

use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

use cvqkd_cli::scenario::{preset, PRESETS};
use serde_json::Value;

fn cvqkd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cvqkd")).args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn ideal_pure_channel_gives_one_bit() {
    let out = cvqkd(&["keyrate", "--T", "1", "--veps", "0", "--vs", "1", "--v", "3", "--beta", "1", "--ideal-bounds"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert!((r["k_inf"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert!(r["corner"].is_object());
}

#[test]
fn exit_codes() {
    assert_eq!(cvqkd(&["keyrate", "--vs", "1"]).status.code(), Some(1));
    assert_eq!(cvqkd(&["keyrate", "--T", "0.5", "--d", "3"]).status.code(), Some(1));
    assert_eq!(cvqkd(&["keyrate", "--T", "0.5", "--veps", "0.1", "--eps-ratio", "0.1"]).status.code(), Some(1));
    assert_eq!(cvqkd(&["keyrate", "--T", "1.5"]).status.code(), Some(1));
    assert_eq!(cvqkd(&["keyrate", "--T", "0.5", "--scheme", "double", "--r", "0.3"]).status.code(), Some(1));
    assert_eq!(cvqkd(&["sweep", "--preset", "nope"]).status.code(), Some(1));
    assert_eq!(cvqkd(&["--help"]).status.code(), Some(0));

    let secure = cvqkd(&["keyrate", "--d", "10"]);
    assert_eq!(secure.status.code(), Some(0));
    assert!(json(&secure)["k"].as_f64().unwrap() > 0.0);

    let insecure = cvqkd(&["keyrate", "--d", "76", "--scheme", "double", "--vs", "0.1", "--N", "1e6"]);
    assert_eq!(insecure.status.code(), Some(2));
    assert!(json(&insecure)["k"].as_f64().unwrap() <= 0.0);

    assert_eq!(cvqkd(&["optimize", "--d", "20", "--scheme", "modified"]).status.code(), Some(0));
    assert_eq!(cvqkd(&["optimize", "--T", "1e-4"]).status.code(), Some(2));

    let bad = Command::new(env!("CARGO_BIN_EXE_cvqkd"))
        .args(["presets"])
        .env("CVQKD_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn invalid_scenario_file_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.json");
    std::fs::write(&path, r#"{"name":"x","sweep":{"variable":"d","min":0,"max":1,"points":1}}"#).unwrap();
    let out = cvqkd(&["sweep", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("at least 2 points"));
}

#[test]
fn sweep_presets_have_stable_schema() {
    let dir = tempfile::tempdir().unwrap();
    for p in PRESETS {
        let scenario = preset(p.name).unwrap();
        let Some(sweep) = &scenario.sweep else { continue };
        let out = cvqkd(&["sweep", "--preset", p.name, "--out", dir.path().to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}", p.name);
        for scheme in &scenario.schemes {
            let csv = read(dir.path(), &format!("{}_{}.csv", p.name, scheme.name()));
            let lines: Vec<&str> = csv.lines().collect();
            assert!(lines[0].starts_with(&format!("# cvqkd {} scenario={} digest=", env!("CARGO_PKG_VERSION"), p.name)));
            assert!(lines[0].contains(&format!("table={}", scheme.name())));
            assert_eq!(
                lines[1],
                "V_S,axis_value,K,K_inf,I_AB,chi,Delta,T_low,Veps_up,V_opt,r_opt,K_th,K_th_inf,K_legacy"
            );
            assert_eq!(lines.len() - 2, sweep.points * scenario.sources.len(), "{}", p.name);
            assert!(lines[2..].iter().all(|l| l.split(',').count() == 14));
        }
        let manifest: Value = serde_json::from_str(&read(dir.path(), &format!("{}_manifest.json", p.name))).unwrap();
        assert_eq!(manifest["digest"], scenario.digest());
    }
}

#[test]
fn fig3_preset_shape() {
    let dir = tempfile::tempdir().unwrap();
    cvqkd(&["sweep", "--preset", "fig3", "--out", dir.path().to_str().unwrap()]);
    // 2 schemes x 3 sources plus the legacy and limit columns
    for scheme in ["single", "modified"] {
        let csv = read(dir.path(), &format!("fig3_{scheme}.csv"));
        assert_eq!(csv.lines().count(), 2 + 3 * 41);
    }
}

#[test]
fn manifest_rerun_reproduces_data() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    cvqkd(&["sweep", "--preset", "fig4_short", "--out", a.path().to_str().unwrap()]);
    let manifest = a.path().join("fig4_short_manifest.json");
    let out = cvqkd(&["sweep", manifest.to_str().unwrap(), "--out", b.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(read(a.path(), "fig4_short_single.csv"), read(b.path(), "fig4_short_single.csv"));
}

#[test]
fn montecarlo_smoke_and_repeatability() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let started = Instant::now();
    let out = cvqkd(&["montecarlo", "--preset", "fig6", "--trials", "10", "--seed", "42", "--out", a.path().to_str().unwrap()]);
    assert!(started.elapsed().as_secs_f64() < 5.0);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["rows"], 60);
    cvqkd(&["montecarlo", "--preset", "fig6", "--trials", "10", "--seed", "42", "--out", b.path().to_str().unwrap()]);
    let csv = read(a.path(), "fig6_montecarlo.csv");
    assert_eq!(csv, read(b.path(), "fig6_montecarlo.csv"));
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].contains("seed=42"));
    assert_eq!(lines[1], "scheme,T,m_or_N,s_analytic,s_empirical,rel_err,sigma_analytic,sigma_empirical,Veps_th");
    assert_eq!(lines.len(), 62);
}

#[test]
fn maxdist_synthetic_fit_is_closed_form() {
    let out = cvqkd(&["maxdist", "--a", "1.5", "--kappa", "0.02", "--N", "1e6", "1e8"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    let c = r["c"].as_f64().unwrap();
    assert!((c - 7.0 * (2e10f64).log2().sqrt()).abs() < 1e-12);
    assert!((r["slope_per_decade"].as_f64().unwrap() - 25.0).abs() < 1e-12);
    for row in r["table"].as_array().unwrap() {
        let n = row["N"].as_f64().unwrap();
        let expected = n.log10() / 0.04 - (c / 1.5).log10() / 0.02;
        assert!((row["d_max"].as_f64().unwrap() - expected).abs() < 1e-9);
        assert!((row["d_cross"].as_f64().unwrap() - expected).abs() < 1e-4);
    }
}

#[test]
fn maxdist_default_table() {
    let r = json(&cvqkd(&["maxdist"]));
    let table = r["table"].as_array().unwrap();
    assert_eq!(table.len(), 3);
    let d: Vec<f64> = table.iter().map(|t| t["d_max"].as_f64().unwrap()).collect();
    assert!(d[0] < d[1] && d[1] < d[2]);
    let slope = r["slope_per_decade"].as_f64().unwrap();
    assert!((d[1] - d[0] - 2.0 * slope).abs() < 1e-9);
    for t in table {
        // the fit is only an approximation of where K_inf meets Delta(N)
        let (dm, dc) = (t["d_max"].as_f64().unwrap(), t["d_cross"].as_f64().unwrap());
        assert!((dm - dc).abs() < 5.0, "{dm} vs {dc}");
    }
}

#[test]
fn presets_listing() {
    let out = cvqkd(&["presets"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for p in PRESETS {
        assert!(text.contains(p.name));
    }
    let fig6 = json(&cvqkd(&["presets", "fig6"]));
    assert_eq!(fig6["montecarlo"]["trials"], 1000);
}

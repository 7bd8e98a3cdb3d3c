//! CSV tables and run manifests.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use cvqkd_core::estimation::SchemeKind;
use cvqkd_core::montecarlo::ValidationRow;
use serde::Serialize;

use crate::scenario::Scenario;
use crate::sweep::{SweepRow, SWEEP_COLUMNS};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const MONTECARLO_COLUMNS: [&str; 9] = [
    "scheme",
    "T",
    "m_or_N",
    "s_analytic",
    "s_empirical",
    "rel_err",
    "sigma_analytic",
    "sigma_empirical",
    "Veps_th",
];

/// Twelve significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.11e}")
}

pub fn header_line(scenario: &Scenario, table: &str) -> String {
    format!(
        "# cvqkd {VERSION} scenario={} digest={} seed={} table={table}",
        scenario.name,
        scenario.digest(),
        scenario.seed
    )
}

pub fn sweep_csv(scenario: &Scenario, scheme: SchemeKind, rows: &[SweepRow]) -> String {
    let axis = scenario.sweep.as_ref().map(|s| s.variable.to_string()).unwrap_or_default();
    let mut out = header_line(scenario, scheme.name());
    out.push_str(&format!(" axis={axis}\n"));
    out.push_str(&SWEEP_COLUMNS.join(","));
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.values().iter().map(|&x| num(x)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn montecarlo_csv(scenario: &Scenario, rows: &[ValidationRow]) -> String {
    let mut out = header_line(scenario, "montecarlo");
    out.push('\n');
    out.push_str(&MONTECARLO_COLUMNS.join(","));
    out.push('\n');
    for r in rows {
        let cells = [
            r.scheme.name().to_string(),
            num(r.t),
            r.m_or_n.to_string(),
            num(r.s_analytic),
            num(r.s_empirical),
            num(r.rel_err),
            num(r.sigma_analytic),
            num(r.sigma_empirical),
            num(r.veps_th),
        ];
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

#[derive(Debug, Serialize)]
pub struct RunManifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub timestamp: u64,
    pub digest: String,
    pub seed: u64,
    pub files: Vec<String>,
    pub scenario: &'a Scenario,
}

impl<'a> RunManifest<'a> {
    pub fn new(scenario: &'a Scenario, files: Vec<String>) -> Self {
        Self {
            tool: "cvqkd",
            version: VERSION,
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            digest: scenario.digest(),
            seed: scenario.seed,
            files,
            scenario,
        }
    }
}

/// Write `(file name, contents)` pairs into `dir` plus `<name>_manifest.json`.
pub fn write_outputs(dir: &Path, scenario: &Scenario, tables: &[(String, String)]) -> Result<Vec<PathBuf>, String> {
    std::fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    let mut written = Vec::new();
    for (name, body) in tables {
        let path = dir.join(name);
        write_file(&path, body.as_bytes())?;
        written.push(path);
    }
    let manifest = RunManifest::new(scenario, tables.iter().map(|(n, _)| n.clone()).collect());
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| e.to_string())?;
    let path = dir.join(format!("{}_manifest.json", scenario.name));
    write_file(&path, json.as_bytes())?;
    written.push(path);
    Ok(written)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), String> {
    let mut f = std::fs::File::create(path).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    f.write_all(bytes).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(num(1.0), "1.00000000000e0");
        assert_eq!(num(-0.000123456789012345), "-1.23456789012e-4");
    }
}

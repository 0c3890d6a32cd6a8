//! Error reports and CSV output.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{HarnessError, Result};

/// Column order of every error report.
pub const HEADER: [&str; 7] = ["epsilon", "n_ts", "dt", "dx", "linf_error", "wall_seconds", "solver_id"];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorRow {
    pub epsilon: f64,
    pub n_ts: usize,
    pub dt: f64,
    pub dx: f64,
    pub linf_error: f64,
    pub wall_seconds: f64,
    pub solver_id: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ErrorReport {
    pub rows: Vec<ErrorRow>,
    pub metadata: Vec<(String, String)>,
}

impl ErrorReport {
    pub fn new(preset: &str) -> Self {
        let metadata = vec![
            ("preset".to_string(), preset.to_string()),
            ("build".to_string(), build_id()),
            ("date".to_string(), chrono::Utc::now().format("%Y-%m-%dT%H:%M:%SZ").to_string()),
        ];
        Self { rows: Vec::new(), metadata }
    }

    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.metadata.push((key.to_string(), value.to_string()));
    }

    /// Sorts by `(ε descending, solver_id, n_ts)` and rejects duplicate keys.
    pub fn finish(&mut self) -> Result<()> {
        self.rows.sort_by(|a, b| {
            b.epsilon
                .total_cmp(&a.epsilon)
                .then(a.solver_id.cmp(&b.solver_id))
                .then(a.n_ts.cmp(&b.n_ts))
        });
        for w in self.rows.windows(2) {
            if w[0].solver_id == w[1].solver_id && w[0].epsilon == w[1].epsilon && w[0].n_ts == w[1].n_ts {
                return Err(HarnessError::Config(format!(
                    "duplicate row ε = {}, n_ts = {}, {}",
                    w[0].epsilon, w[0].n_ts, w[0].solver_id
                )));
            }
        }
        Ok(())
    }

    /// Rows of one solver, for fixed ε, ordered by `n_ts`.
    pub fn series(&self, solver_id: &str, epsilon: f64) -> Vec<&ErrorRow> {
        let mut rows: Vec<_> =
            self.rows.iter().filter(|r| r.solver_id == solver_id && r.epsilon == epsilon).collect();
        rows.sort_by_key(|r| r.n_ts);
        rows
    }

    pub fn find(&self, solver_id: &str, epsilon: f64, n_ts: usize) -> Option<&ErrorRow> {
        self.rows.iter().find(|r| r.solver_id == solver_id && r.epsilon == epsilon && r.n_ts == n_ts)
    }

    pub fn to_csv(&self) -> Result<String> {
        to_csv(&self.rows)
    }

    /// CSV text without the timing column, for determinism checks.
    pub fn body_without_timing(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(HEADER.iter().filter(|h| **h != "wall_seconds"))?;
        for r in &self.rows {
            w.write_record([
                r.epsilon.to_string(),
                r.n_ts.to_string(),
                r.dt.to_string(),
                r.dx.to_string(),
                r.linf_error.to_string(),
                r.solver_id.clone(),
            ])?;
        }
        finish_writer(w)
    }

    /// Writes `<dir>/<name>.csv` and the `<name>.meta` sidecar; returns the CSV path.
    pub fn write(&self, dir: &Path, name: &str) -> Result<PathBuf> {
        let path = write_csv(dir, name, &self.rows)?;
        let meta: String = self.metadata.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
        let meta_path = dir.join(format!("{name}.meta"));
        std::fs::write(&meta_path, meta).map_err(|e| HarnessError::io(&meta_path, e))?;
        Ok(path)
    }
}

pub fn build_id() -> String {
    format!("ngo-harness-{}", option_env!("NGO_BUILD_ID").unwrap_or(env!("CARGO_PKG_VERSION")))
}

fn finish_writer(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| HarnessError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn to_csv<R: Serialize>(rows: &[R]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    finish_writer(w)
}

/// Writes `rows` to `<dir>/<name>.csv`, creating `dir`.
pub fn write_csv<R: Serialize>(dir: &Path, name: &str, rows: &[R]) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let path = dir.join(format!("{name}.csv"));
    std::fs::write(&path, to_csv(rows)?).map_err(|e| HarnessError::io(&path, e))?;
    Ok(path)
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let cov: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    cov / var
}

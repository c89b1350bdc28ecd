//! `summary.json` and `series.csv`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use qnd_core::propagator::IntegrandTable;
use qnd_core::Complex64;

/// One assertion and its outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    /// `"le"`, `"lt"`, `"gt"` or `"reported"`.
    pub comparison: String,
    pub pass: bool,
}

impl Check {
    pub fn le(name: &str, value: f64, threshold: f64) -> Self {
        Self::new(name, value, threshold, "le", value <= threshold)
    }

    pub fn lt(name: &str, value: f64, threshold: f64) -> Self {
        Self::new(name, value, threshold, "lt", value < threshold)
    }

    pub fn gt(name: &str, value: f64, threshold: f64) -> Self {
        Self::new(name, value, threshold, "gt", value > threshold)
    }

    /// Passes whenever the value was computed.
    pub fn reported(name: &str, value: f64) -> Self {
        Self::new(name, value, f64::NAN, "reported", value.is_finite())
    }

    fn new(name: &str, value: f64, threshold: f64, comparison: &str, pass: bool) -> Self {
        Self {
            name: name.to_string(),
            value,
            threshold,
            comparison: comparison.to_string(),
            pass,
        }
    }
}

/// Per-node columns written to `series.csv`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Series {
    pub kind: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub const INTEGRAND_COLUMNS: [&str; 12] = [
    "t", "a", "beta", "gamma", "gamma_cap", "log_u_re", "log_u_im", "log_p_term1", "log_p_term2",
    "log_p_term3", "log_p_term4", "log_p_total",
];

impl Series {
    pub fn new(kind: &str, columns: &[&str]) -> Self {
        Self {
            kind: kind.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn integrand(table: &IntegrandTable) -> Self {
        let mut s = Self::new("integrand", &INTEGRAND_COLUMNS);
        for i in 0..table.t.len() {
            let u: Complex64 = table.log_u[i].iter().sum();
            let p = table.log_p[i];
            s.rows.push(vec![
                table.t[i],
                table.a[i],
                table.beta[i],
                table.gamma[i],
                table.gamma_cap[i],
                u.re,
                u.im,
                p[0],
                p[1],
                p[2],
                p[3],
                p.iter().sum(),
            ]);
        }
        s
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| format_float(*v)))?;
        }
        w.flush()
    }
}

/// Shortest representation that parses back to the same `f64`.
pub fn format_float(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// Totals obtained by integrating the series columns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesTotals {
    pub log_u_re: f64,
    pub log_u_im: f64,
    pub log_p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub tool: String,
    pub version: String,
    pub scenario: String,
    pub seed: Option<u64>,
    /// Seconds since the Unix epoch; the only field that varies between identical runs.
    pub generated_at_unix: u64,
    pub inputs: serde_json::Value,
    pub metrics: BTreeMap<String, f64>,
    pub per_term: BTreeMap<String, f64>,
    pub residuals: BTreeMap<String, f64>,
    pub series_kind: Option<String>,
    pub series_totals: Option<SeriesTotals>,
    pub details: serde_json::Value,
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl Summary {
    pub fn write_json(&self, path: &Path) -> std::io::Result<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        text.push('\n');
        fs::write(path, text)
    }
}

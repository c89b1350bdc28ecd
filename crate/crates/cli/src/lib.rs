//! Scenario runner behind the `qndsim` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod scenario;
pub mod summary;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use qnd_core::propagator::fit_inverse;

use crate::config::ScenarioConfig;
use crate::summary::{format_float, Summary};

/// Environment variable that selects the output directory.
pub const OUTPUT_DIR_VAR: &str = "QNDSIM_OUTPUT_DIR";
pub const DEFAULT_OUTPUT_DIR: &str = "qndsim-out";

#[derive(Debug)]
pub enum CliError {
    Parse(String),
    Domain(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Domain(_) | CliError::Io(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Parse(m) => write!(f, "parse error: {m}"),
            CliError::Domain(m) => write!(f, "precondition failed: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<qnd_core::Error> for CliError {
    fn from(e: qnd_core::Error) -> Self {
        CliError::Domain(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    ScenarioConfig::from_json(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

/// `$QNDSIM_OUTPUT_DIR`, else the config's `output.dir`, else `qndsim-out`.
pub fn output_dir(cfg: &ScenarioConfig) -> PathBuf {
    std::env::var_os(OUTPUT_DIR_VAR)
        .map(PathBuf::from)
        .or_else(|| cfg.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
}

/// Run a scenario without touching the filesystem.
pub fn evaluate(cfg: &ScenarioConfig) -> Result<(Summary, Option<summary::Series>), CliError> {
    let resolved = cfg.resolve()?;
    let out = scenario::execute(cfg, &resolved)?;
    let pass = out.checks.iter().all(|c| c.pass);
    let generated_at_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let summary = Summary {
        tool: "qndsim".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        scenario: cfg.scenario.name().into(),
        seed: resolved.seed,
        generated_at_unix,
        inputs: serde_json::to_value(cfg).map_err(|e| CliError::Io(e.to_string()))?,
        metrics: out.metrics,
        per_term: out.per_term,
        residuals: out.residuals,
        series_kind: out.series.as_ref().map(|s| s.kind.clone()),
        series_totals: out.series_totals,
        details: out.details,
        checks: out.checks,
        pass,
    };
    Ok((summary, out.series))
}

/// Run a scenario and write `summary.json` (and `series.csv` when the scenario has one) into `dir`.
pub fn run_in(cfg: &ScenarioConfig, dir: &Path) -> Result<Summary, CliError> {
    let (summary, series) = evaluate(cfg)?;
    fs::create_dir_all(dir)?;
    if let Some(s) = &series {
        s.write_csv(&dir.join("series.csv"))?;
    }
    summary.write_json(&dir.join("summary.json"))?;
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    #[value(name = "delta_a_sq")]
    DeltaASq,
    #[value(name = "n_slices")]
    NSlices,
    #[value(name = "mass")]
    Mass,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::DeltaASq => "delta_a_sq",
            Axis::NSlices => "n_slices",
            Axis::Mass => "mass",
        }
    }

    fn apply(self, cfg: &ScenarioConfig, v: f64) -> Result<ScenarioConfig, CliError> {
        let mut c = cfg.clone();
        match self {
            Axis::DeltaASq => c.window.delta_a_sq = Some(v),
            Axis::NSlices => {
                if v.fract() != 0.0 {
                    return Err(CliError::Domain(format!("n_slices must be an integer, got {v}")));
                }
                c.oracle.n_slices = v as usize;
            }
            Axis::Mass => c.params.overrides.m = Some(v),
        }
        Ok(c)
    }
}

/// Metric whose ratio to the first row is tabulated in a sweep.
fn primary_metric(cfg: &ScenarioConfig) -> Option<&'static str> {
    use config::Scenario::*;
    match cfg.scenario {
        LimitSweep => Some("mean_c"),
        Probability | OracleCompare => Some("log_p"),
        UniformCheck => Some("max_abs_log_p"),
        QdContrast => Some("qd_spread_at_critical"),
        RiccatiCheck => Some("max_rel_err"),
        Commutator => Some("pair_ratio_cosh"),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRun {
    pub value: f64,
    pub pass: bool,
    pub dir: PathBuf,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub axis: Axis,
    pub scenario: String,
    pub primary_metric: Option<String>,
    /// `C` of the fit `primary ≈ C/value + D`, reported for resolution sweeps.
    pub fitted_inverse_slope: Option<f64>,
    pub runs: Vec<SweepRun>,
    pub pass: bool,
}

/// One scenario run per axis value, in the given order; writes `sweep.csv` and `sweep.json` into `dir`.
pub fn sweep_in(cfg: &ScenarioConfig, axis: Axis, values: &[f64], dir: &Path) -> Result<SweepReport, CliError> {
    if values.len() < 2 {
        return Err(CliError::Domain("a sweep needs at least two axis values".into()));
    }
    if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(CliError::Domain("sweep values must be positive".into()));
    }
    let configs = values
        .iter()
        .map(|&v| axis.apply(cfg, v))
        .collect::<Result<Vec<_>, _>>()?;
    fs::create_dir_all(dir)?;
    let mut summaries = Vec::with_capacity(values.len());
    let mut runs = Vec::with_capacity(values.len());
    for (i, (c, &v)) in configs.iter().zip(values).enumerate() {
        let sub = dir.join(format!("{}_{i:03}", axis.name()));
        let s = run_in(c, &sub)?;
        runs.push(SweepRun { value: v, pass: s.pass, dir: sub });
        summaries.push(s);
    }

    let primary = primary_metric(cfg);
    let metric_names: Vec<String> = summaries[0].metrics.keys().cloned().collect();
    let mut w = csv::Writer::from_path(dir.join("sweep.csv"))?;
    let mut header = vec![axis.name().to_string(), "pass".into(), "primary".into(), "primary_ratio_to_first".into()];
    header.extend(metric_names.iter().cloned());
    w.write_record(&header)?;
    let primary_values: Vec<f64> = summaries
        .iter()
        .map(|s| primary.and_then(|p| s.metrics.get(p).copied()).unwrap_or(f64::NAN))
        .collect();
    for (k, s) in summaries.iter().enumerate() {
        let mut row = vec![format_float(values[k]), s.pass.to_string()];
        row.push(format_float(primary_values[k]));
        row.push(format_float(primary_values[k] / primary_values[0]));
        for m in &metric_names {
            row.push(format_float(s.metrics.get(m).copied().unwrap_or(f64::NAN)));
        }
        w.write_record(&row)?;
    }
    w.flush()?;

    let fitted_inverse_slope = (axis == Axis::DeltaASq && primary_values.iter().all(|v| v.is_finite()))
        .then(|| fit_inverse(values, &primary_values).0);
    let report = SweepReport {
        axis,
        scenario: cfg.scenario.name().into(),
        primary_metric: primary.map(String::from),
        fitted_inverse_slope,
        pass: runs.iter().all(|r| r.pass),
        runs,
    };
    let mut text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    fs::write(dir.join("sweep.json"), text)?;
    Ok(report)
}

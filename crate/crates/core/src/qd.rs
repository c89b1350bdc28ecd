//! Continuous Gaussian monitoring of position, the demolition counterpart of
//! the QND weight, and the spread comparison between the two.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::{assemble_lattice, gaussian_reduce, oracle_log_probability, LatticeHamiltonian, Position, SliceCoupling};
use crate::params::PhysicalParams;
use crate::propagator::{log_probabilities_at, spread};
use crate::qnd::QndVariable;
use crate::record::OutputRecord;
use crate::window::{MeasurementWindow, SampledSeries};

#[derive(Debug, Clone, PartialEq)]
pub struct PositionMonitorConfig {
    pub l_record: SampledSeries,
    pub delta_l_sq: f64,
    pub window: MeasurementWindow,
    pub params: PhysicalParams,
}

impl PositionMonitorConfig {
    pub fn new(
        l_record: SampledSeries,
        delta_l_sq: f64,
        window: MeasurementWindow,
        params: PhysicalParams,
    ) -> Result<Self> {
        if !(delta_l_sq > 0.0) {
            return Err(Error::Domain(format!("position resolution must be positive, got {delta_l_sq}")));
        }
        let g = l_record.grid;
        let tol = 1e-12 * window.duration().max(1.0);
        if (g.start - window.tau_start).abs() > tol || (g.end - window.tau_end).abs() > tol {
            return Err(Error::Domain(format!(
                "position record spans [{}, {}], window is [{}, {}]",
                g.start, g.end, window.tau_start, window.tau_end
            )));
        }
        Ok(Self {
            l_record,
            delta_l_sq,
            window,
            params,
        })
    }

    /// `TΔl²`.
    pub fn resolution_product(&self) -> f64 {
        self.window.duration() * self.delta_l_sq
    }
}

/// `2 Re log U` for position monitoring with weight `exp(−(1/TΔl²)∫(l − l̃)²)`.
pub fn qd_log_probability(cfg: &PositionMonitorConfig, n_slices: usize, boundary: (f64, f64)) -> Result<f64> {
    if n_slices < 16 {
        return Err(Error::Usage(format!("need at least 16 slices, got {n_slices}")));
    }
    let w = &cfg.window;
    let dt = w.duration() / n_slices as f64;
    let record = OutputRecord::Samples(cfg.l_record.clone());
    let coupling = SliceCoupling::monitor(&Position, &record, cfg.resolution_product(), w.tau_start, dt, n_slices);
    let lat = assemble_lattice(&LatticeHamiltonian::from_params(&cfg.params), &coupling, w.duration(), boundary)?;
    Ok(2.0 * gaussian_reduce(&lat)?.total.re)
}

/// Solution of `l̈ = Ω²l − g` through the two boundary points.
pub fn classical_trajectory(params: &PhysicalParams, window: &MeasurementWindow, boundary: (f64, f64)) -> impl Fn(f64) -> f64 {
    let w = params.omega_rate();
    let rest = params.g() / params.omega_rate_sq();
    let span = w * window.duration();
    let a = boundary.0 - rest;
    let b = (boundary.1 - rest - a * span.cosh()) / span.sinh();
    let t0 = window.tau_start;
    move |t| {
        let s = w * (t - t0);
        rest + a * s.cosh() + b * s.sinh()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastRow {
    pub delta_sq: f64,
    /// `TΔ² / 2mℏ`.
    pub ratio_to_critical: f64,
    pub qnd_spread_closed_form: f64,
    pub qnd_spread_lattice: f64,
    pub qd_spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastReport {
    pub n_slices: usize,
    pub boundary: (f64, f64),
    pub records: usize,
    pub rows: Vec<ContrastRow>,
}

impl ContrastReport {
    pub fn row_near(&self, ratio: f64) -> Option<&ContrastRow> {
        self.rows
            .iter()
            .min_by(|a, b| (a.ratio_to_critical - ratio).abs().total_cmp(&(b.ratio_to_critical - ratio).abs()))
    }
}

/// Spreads of log-probability over `records` for QND monitoring of the
/// variable `qnd` and for position monitoring, at each resolution `Δ²` in `delta_sequence`.
pub fn sql_contrast_report(
    params: &PhysicalParams,
    window: &MeasurementWindow,
    qnd: &QndVariable,
    records: &[OutputRecord],
    delta_sequence: &[f64],
    n_slices: usize,
    boundary: (f64, f64),
) -> Result<ContrastReport> {
    let critical = params.critical_resolution();
    let full = window.full_grid();
    let rows = delta_sequence
        .iter()
        .map(|&d| {
            let w = window.with_delta_a_sq(d)?;
            let x = w.resolution_product();
            let closed: Vec<f64> = log_probabilities_at(records, qnd, params, &w, x)?
                .into_iter()
                .map(|(p, _)| p.total.re)
                .collect();
            let (lattice, qd): (Vec<f64>, Vec<f64>) = records
                .par_iter()
                .map(|a| {
                    let l = oracle_log_probability(a, qnd, params, &w, n_slices, boundary)?;
                    let cfg = PositionMonitorConfig::new(a.sample(full), d, w, *params)?;
                    Ok((l, qd_log_probability(&cfg, n_slices, boundary)?))
                })
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .unzip();
            Ok(ContrastRow {
                delta_sq: d,
                ratio_to_critical: x / critical,
                qnd_spread_closed_form: spread(&closed),
                qnd_spread_lattice: spread(&lattice),
                qd_spread: spread(&qd),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ContrastReport {
        n_slices,
        boundary,
        records: records.len(),
        rows,
    })
}

//! Closed-form propagator and output probability for continuous monitoring
//! of a QND variable.
//!
//! With `x = TΔa²` the propagator exponent is
//! `−αa² + [4a²gm²α²/R − m²g²β²/(2ℏ²) + 2iam²αβgΩ/ℏ] / [4m²gα/R + imω²β²/ℏ]`
//! integrated over the window, where
//! `α = (x² − 4m²ℏ² − 4imℏx) / (x(x² + 4m²ℏ²))` and `β = coth(Ω(t−τ′))/σ(t)`.
//! The log-probability is the four-term real integrand built from `γ` and `Γ`.
//! Both are evaluated on `[τ′ + εT, τ″]`, where `β` is finite.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::PhysicalParams;
use crate::qnd::{LinearObservable, QndVariable};
use crate::quadrature::simpson;
use crate::record::OutputRecord;
use crate::window::{MeasurementWindow, SampledSeries};

const SINGULAR_FLOOR: f64 = 1e-300;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// `(x − 2mℏ)(x + 2mℏ)`, factored so it is exactly zero at `x = 2mℏ`.
fn resolution_gap(x: f64, params: &PhysicalParams) -> f64 {
    let c = params.critical_resolution();
    (x - c) * (x + c)
}

fn resolution_sum(x: f64, params: &PhysicalParams) -> f64 {
    let c = params.critical_resolution();
    x * x + c * c
}

/// `α` as a function of the resolution product `x = TΔa²`.
pub fn alpha(x: f64, params: &PhysicalParams) -> Complex64 {
    let mh = params.mass() * params.hbar();
    Complex64::new(resolution_gap(x, params), -4.0 * mh * x) / (x * resolution_sum(x, params))
}

/// `α` and samples of `β(t)` on the clipped grid.
#[derive(Debug, Clone)]
pub struct AlphaBeta {
    pub alpha: Complex64,
    pub beta_series: SampledSeries,
    qnd: QndVariable,
    omega_rate: f64,
}

impl AlphaBeta {
    pub fn new(qnd: &QndVariable, params: &PhysicalParams, window: &MeasurementWindow) -> Self {
        let omega_rate = params.omega_rate();
        let beta = |t: f64| beta_value(t, qnd, omega_rate);
        Self {
            alpha: alpha(window.resolution_product(), params),
            beta_series: SampledSeries::from_fn(window.clipped_grid(), beta),
            qnd: qnd.clone(),
            omega_rate,
        }
    }

    /// `β(t)` evaluated directly rather than interpolated.
    pub fn beta_at(&self, t: f64) -> f64 {
        beta_value(t, &self.qnd, self.omega_rate)
    }
}

fn beta_value(t: f64, qnd: &QndVariable, omega_rate: f64) -> f64 {
    1.0 / ((omega_rate * (t - qnd.tau_ref())).tanh() * qnd.sigma(t))
}

/// Samples of `γ(t)` and `Γ(t)` on the clipped grid.
#[derive(Debug, Clone)]
pub struct GammaCaps {
    pub gamma_series: SampledSeries,
    pub gamma_cap_series: SampledSeries,
}

impl GammaCaps {
    pub fn new(ab: &AlphaBeta, params: &PhysicalParams, window: &MeasurementWindow) -> Self {
        let x = window.resolution_product();
        Self {
            gamma_series: ab.beta_series.map(|b| gamma(b, x, params)),
            gamma_cap_series: ab.beta_series.map(|b| gamma_cap(b, x, params)),
        }
    }
}

/// `γ = 4m²g/R − 4m²ω²β²x²/(x² + (2mℏ)²)`.
pub fn gamma(beta: f64, x: f64, params: &PhysicalParams) -> f64 {
    let m = params.mass();
    4.0 * m * m * params.g() / params.radius()
        - 4.0 * m * m * params.omega_sq() * beta * beta * x * x / resolution_sum(x, params)
}

/// `Γ = (mω²β²x/ℏ)(x² − (2mℏ)²)/(x² + (2mℏ)²)`.
pub fn gamma_cap(beta: f64, x: f64, params: &PhysicalParams) -> f64 {
    params.mass() * params.omega_sq() * beta * beta * x / params.hbar() * resolution_gap(x, params)
        / resolution_sum(x, params)
}

/// An integrated complex exponent with its per-term split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexExponent {
    pub total: Complex64,
    pub per_term: Vec<(String, Complex64)>,
    /// Largest integrand modulus on the grid.
    pub max_integrand: f64,
    /// Node index where it occurs.
    pub max_node: usize,
}

impl ComplexExponent {
    pub(crate) fn from_terms(names: &[&str], columns: &[Vec<Complex64>], h: f64) -> Result<Self> {
        let mut per_term = Vec::with_capacity(columns.len());
        for (name, col) in names.iter().zip(columns) {
            per_term.push((name.to_string(), simpson(col, h)?));
        }
        let total = per_term.iter().map(|(_, v)| *v).sum();
        let n = columns.first().map_or(0, Vec::len);
        let (mut max_integrand, mut max_node) = (0.0, 0);
        for i in 0..n {
            let v: Complex64 = columns.iter().map(|c| c[i]).sum();
            if v.norm() > max_integrand {
                max_integrand = v.norm();
                max_node = i;
            }
        }
        Ok(Self {
            total,
            per_term,
            max_integrand,
            max_node,
        })
    }

    pub fn term(&self, name: &str) -> Option<Complex64> {
        self.per_term.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }
}

pub const PROPAGATOR_TERMS: [&str; 4] = ["quadratic", "a_squared_ratio", "gravity_ratio", "cross_ratio"];
pub const PROBABILITY_TERMS: [&str; 4] = ["first", "second", "third", "fourth"];

/// The four additive pieces of the propagator integrand: `−αa²` and the
/// three numerator pieces of the fraction, each over the common denominator.
pub fn propagator_terms(
    a_val: f64,
    beta: f64,
    alpha: Complex64,
    params: &PhysicalParams,
) -> Result<[Complex64; 4]> {
    let (m, g, r, hbar) = (params.mass(), params.g(), params.radius(), params.hbar());
    let denom = alpha * (4.0 * m * m * g / r) + I * (m * params.omega_sq() * beta * beta / hbar);
    if denom.norm() < SINGULAR_FLOOR {
        return Err(Error::Singular(format!(
            "propagator denominator vanishes (beta = {beta})"
        )));
    }
    let quadratic = -alpha * a_val * a_val;
    let a_sq = alpha * alpha * (4.0 * a_val * a_val * g * m * m / r) / denom;
    let grav = Complex64::new(-m * m * g * g * beta * beta / (2.0 * hbar * hbar), 0.0) / denom;
    let cross = I * alpha * (2.0 * a_val * m * m * beta * g * params.omega_rate() / hbar) / denom;
    Ok([quadratic, a_sq, grav, cross])
}

/// Integrand of the propagator exponent at time `t` (clipped domain).
pub fn exponent_integrand(
    t: f64,
    a_val: f64,
    ab: &AlphaBeta,
    params: &PhysicalParams,
    window: &MeasurementWindow,
) -> Result<Complex64> {
    if t < window.clipped_grid().start || t > window.tau_end {
        return Err(Error::Domain(format!("t = {t} outside the clipped window")));
    }
    Ok(propagator_terms(a_val, ab.beta_at(t), ab.alpha, params)?.iter().sum())
}

/// The four closed-form terms of the log-probability integrand.
///
/// The fourth term is divided through by `β⁴` so it stays finite as `t → τ′`.
pub fn probability_terms(
    a_val: f64,
    beta: f64,
    gamma: f64,
    gamma_cap: f64,
    x: f64,
    params: &PhysicalParams,
) -> Result<[f64; 4]> {
    let (m, g, r, hbar) = (params.mass(), params.g(), params.radius(), params.hbar());
    let gap = resolution_gap(x, params);
    let sum = resolution_sum(x, params);
    let gg = gamma * gamma + gamma_cap * gamma_cap;
    if gg < SINGULAR_FLOOR {
        return Err(Error::Singular("gamma^2 + Gamma^2 vanishes".into()));
    }
    let first = -2.0 * gap / (x * sum) * a_val * a_val;
    let second = 8.0 * a_val * a_val * m * m * g / (r * gg) * (gamma * gap
        - 4.0 * gamma_cap * m * hbar * x)
        / (x * sum);
    let third =
        4.0 * a_val * m * m * beta * g * params.omega_rate() * gamma_cap / (hbar * gg);

    let k = 4.0 * m * m * g / (r * x) * gap / sum / (beta * beta);
    let b = m * params.omega_sq() / hbar - 16.0 * m * m * m * g * hbar / (r * sum * beta * beta);
    let den = k * k + b * b;
    if den < SINGULAR_FLOOR {
        return Err(Error::Singular("fourth-term denominator vanishes".into()));
    }
    let fourth = -(m * m * g * g / (hbar * hbar)) * k / den;
    Ok([first, second, third, fourth])
}

/// Per-node integrands on the clipped grid, shared by the integrals and CSV export.
#[derive(Debug, Clone)]
pub struct IntegrandTable {
    pub t: Vec<f64>,
    pub a: Vec<f64>,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub gamma_cap: Vec<f64>,
    pub log_u: Vec<[Complex64; 4]>,
    pub log_p: Vec<[f64; 4]>,
    pub step: f64,
}

impl IntegrandTable {
    pub fn build(
        a: &OutputRecord,
        qnd: &QndVariable,
        params: &PhysicalParams,
        window: &MeasurementWindow,
    ) -> Result<Self> {
        let ab = AlphaBeta::new(qnd, params, window);
        let gc = GammaCaps::new(&ab, params, window);
        Self::from_parts(a, &ab, &gc, params, window)
    }

    fn from_parts(
        a: &OutputRecord,
        ab: &AlphaBeta,
        gc: &GammaCaps,
        params: &PhysicalParams,
        window: &MeasurementWindow,
    ) -> Result<Self> {
        let grid = window.clipped_grid();
        let x = window.resolution_product();
        let t: Vec<f64> = grid.nodes().collect();
        let a_vals: Vec<f64> = t.iter().map(|&s| a.value(s)).collect();
        let beta = ab.beta_series.values.clone();
        let gamma = gc.gamma_series.values.clone();
        let gamma_cap = gc.gamma_cap_series.values.clone();
        let mut log_u = Vec::with_capacity(grid.n);
        let mut log_p = Vec::with_capacity(grid.n);
        for i in 0..grid.n {
            log_u.push(propagator_terms(a_vals[i], beta[i], ab.alpha, params)?);
            log_p.push(probability_terms(a_vals[i], beta[i], gamma[i], gamma_cap[i], x, params)?);
        }
        Ok(Self {
            t,
            a: a_vals,
            beta,
            gamma,
            gamma_cap,
            log_u,
            log_p,
            step: grid.step(),
        })
    }

    pub fn propagator_exponent(&self) -> Result<ComplexExponent> {
        let cols: Vec<Vec<Complex64>> =
            (0..4).map(|k| self.log_u.iter().map(|r| r[k]).collect()).collect();
        ComplexExponent::from_terms(&PROPAGATOR_TERMS, &cols, self.step)
    }

    pub fn log_probability(&self) -> Result<ComplexExponent> {
        let cols: Vec<Vec<Complex64>> = (0..4)
            .map(|k| self.log_p.iter().map(|r| Complex64::new(r[k], 0.0)).collect())
            .collect();
        ComplexExponent::from_terms(&PROBABILITY_TERMS, &cols, self.step)
    }
}

/// Integrated propagator exponent `log U[a]` (without boundary terms).
pub fn log_propagator(
    a: &OutputRecord,
    qnd: &QndVariable,
    params: &PhysicalParams,
    window: &MeasurementWindow,
) -> Result<ComplexExponent> {
    IntegrandTable::build(a, qnd, params, window)?.propagator_exponent()
}

/// Integrated closed-form log-probability; the total is real.
pub fn log_probability_from_parts(
    a: &OutputRecord,
    ab: &AlphaBeta,
    gc: &GammaCaps,
    params: &PhysicalParams,
    window: &MeasurementWindow,
) -> Result<ComplexExponent> {
    IntegrandTable::from_parts(a, ab, gc, params, window)?.log_probability()
}

/// Convenience wrapper building `α, β, γ, Γ` internally.
pub fn log_probability(
    a: &OutputRecord,
    qnd: &QndVariable,
    params: &PhysicalParams,
    window: &MeasurementWindow,
) -> Result<f64> {
    Ok(IntegrandTable::build(a, qnd, params, window)?
        .log_probability()?
        .total
        .re)
}

/// Closed-form `log P` versus `2 Re log U`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyResidual {
    pub closed_form: f64,
    pub from_propagator: f64,
    pub residual: f64,
}

pub fn consistency_residual(
    a: &OutputRecord,
    qnd: &QndVariable,
    params: &PhysicalParams,
    window: &MeasurementWindow,
) -> Result<ConsistencyResidual> {
    let table = IntegrandTable::build(a, qnd, params, window)?;
    let closed_form = table.log_probability()?.total.re;
    let from_propagator = 2.0 * table.propagator_exponent()?.total.re;
    Ok(ConsistencyResidual {
        closed_form,
        from_propagator,
        residual: closed_form - from_propagator,
    })
}

/// Outcome of the equiprobability check at `TΔa² = 2mℏ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformReport {
    pub resolution_product: f64,
    pub trials: usize,
    pub max_abs_log_p: f64,
    pub max_abs_term: [f64; 4],
    pub max_abs_two_re_log_u: f64,
    /// Largest per-term magnitude of the same records off the condition (`x·(1+10⁻³)`).
    pub off_condition_term_scale: [f64; 4],
    pub log_p: Vec<f64>,
}

impl UniformReport {
    pub fn spread(&self) -> f64 {
        spread(&self.log_p)
    }
}

/// `max − min` of a slice (0 for fewer than two entries).
pub fn spread(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if values.len() < 2 {
        0.0
    } else {
        max - min
    }
}

/// Evaluate `log P` for every record at resolution product `x` (window otherwise fixed).
pub fn log_probabilities_at(
    records: &[OutputRecord],
    qnd: &QndVariable,
    params: &PhysicalParams,
    window: &MeasurementWindow,
    x: f64,
) -> Result<Vec<(ComplexExponent, ComplexExponent)>> {
    let w = window.with_resolution_product(x)?;
    let ab = AlphaBeta::new(qnd, params, &w);
    let gc = GammaCaps::new(&ab, params, &w);
    records
        .par_iter()
        .map(|a| {
            let table = IntegrandTable::from_parts(a, &ab, &gc, params, &w)?;
            Ok((table.log_probability()?, table.propagator_exponent()?))
        })
        .collect()
}

/// Evaluate the closed-form log-probability and `2 Re log U` for `records` at
/// `TΔa² = 2mℏ`, tracking the largest deviations from zero.
pub fn uniform_probability_check(
    params: &PhysicalParams,
    window: &MeasurementWindow,
    qnd: &QndVariable,
    records: &[OutputRecord],
) -> Result<UniformReport> {
    let x = params.critical_resolution();
    let on = log_probabilities_at(records, qnd, params, window, x)?;
    let off = log_probabilities_at(records, qnd, params, window, x * (1.0 + 1e-3))?;
    let mut rep = UniformReport {
        resolution_product: window.with_resolution_product(x)?.resolution_product(),
        trials: records.len(),
        max_abs_log_p: 0.0,
        max_abs_term: [0.0; 4],
        max_abs_two_re_log_u: 0.0,
        off_condition_term_scale: [0.0; 4],
        log_p: Vec::with_capacity(records.len()),
    };
    for ((p14, u13), (p14_off, _)) in on.iter().zip(&off) {
        rep.max_abs_log_p = rep.max_abs_log_p.max(p14.total.re.abs());
        for k in 0..4 {
            rep.max_abs_term[k] = rep.max_abs_term[k].max(p14.per_term[k].1.re.abs());
            rep.off_condition_term_scale[k] =
                rep.off_condition_term_scale[k].max(p14_off.per_term[k].1.re.abs());
        }
        rep.max_abs_two_re_log_u = rep.max_abs_two_re_log_u.max((2.0 * u13.total.re).abs());
        rep.log_p.push(p14.total.re);
    }
    Ok(rep)
}

/// Least-squares fit `y ≈ c / d + e` over `(d, y)` pairs. Returns `(c, e)`.
pub fn fit_inverse(deltas: &[f64], values: &[f64]) -> (f64, f64) {
    let n = deltas.len() as f64;
    let xs: Vec<f64> = deltas.iter().map(|d| 1.0 / d).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = values.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(values).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let c = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (c, my - c * mx)
}

/// One record's trajectory along the shrinking-resolution sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitRow {
    pub log_p: Vec<f64>,
    /// `log P · Δa²` along the sequence.
    pub scaled: Vec<f64>,
    /// Slope `C` of `log P ≈ C/Δa² + D`.
    pub fitted_c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitReport {
    pub delta_sequence: Vec<f64>,
    pub rows: Vec<LimitRow>,
    /// `(max C − min C) / max |C|` across records.
    pub relative_spread_c: f64,
    pub mean_c: f64,
    /// `∫ 4m²GM/(Rβ⁴) dt` over the clipped window, the reference limit coefficient read as an integral.
    pub reference_coefficient: f64,
}

/// Track `log P` as `Δa² → 0` along `delta_sequence` and fit `log P ≈ C/Δa²`.
pub fn zero_resolution_limit(
    records: &[OutputRecord],
    qnd: &QndVariable,
    params: &PhysicalParams,
    window: &MeasurementWindow,
    delta_sequence: &[f64],
) -> Result<LimitReport> {
    if delta_sequence.len() < 2 {
        return Err(Error::Usage("limit needs at least two resolutions".into()));
    }
    if delta_sequence.iter().any(|d| !(*d > 0.0))
        || delta_sequence.windows(2).any(|w| !(w[1] < w[0]))
    {
        return Err(Error::Usage(
            "delta sequence must be positive and strictly decreasing".into(),
        ));
    }
    let per_delta: Vec<Vec<f64>> = delta_sequence
        .iter()
        .map(|&d| {
            let w = window.with_delta_a_sq(d)?;
            Ok(log_probabilities_at(records, qnd, params, &w, w.resolution_product())?
                .into_iter()
                .map(|(p, _)| p.total.re)
                .collect())
        })
        .collect::<Result<_>>()?;
    let rows: Vec<LimitRow> = (0..records.len())
        .map(|i| {
            let log_p: Vec<f64> = per_delta.iter().map(|v| v[i]).collect();
            let scaled = log_p.iter().zip(delta_sequence).map(|(l, d)| l * d).collect();
            let (fitted_c, _) = fit_inverse(delta_sequence, &log_p);
            LimitRow {
                log_p,
                scaled,
                fitted_c,
            }
        })
        .collect();
    let cs: Vec<f64> = rows.iter().map(|r| r.fitted_c).collect();
    let scale = cs.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
    let relative_spread_c = if scale > 0.0 { spread(&cs) / scale } else { 0.0 };
    let mean_c = cs.iter().sum::<f64>() / cs.len().max(1) as f64;

    let ab = AlphaBeta::new(qnd, params, window);
    let m = params.mass();
    let pref = 4.0 * m * m * params.big_g() * params.source_mass() / params.radius();
    let reference_coefficient = simpson(
        &ab.beta_series.values.iter().map(|b| pref / b.powi(4)).collect::<Vec<_>>(),
        ab.beta_series.grid.step(),
    )?;
    Ok(LimitReport {
        delta_sequence: delta_sequence.to_vec(),
        rows,
        relative_spread_c,
        mean_c,
        reference_coefficient,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{make_params, ParamOverrides, UnitRegime};
    use crate::qnd::{build_qnd_variable, SigmaChoice};
    use crate::record::RecordFamily;

    fn natural() -> PhysicalParams {
        make_params(UnitRegime::Natural, &ParamOverrides::default()).unwrap()
    }

    fn setup(x: f64) -> (PhysicalParams, MeasurementWindow, QndVariable) {
        let p = natural();
        let w = MeasurementWindow::new(0.0, 1.0, x, 801).unwrap();
        let q = build_qnd_variable(SigmaChoice::CoshDefault, &w, &p).unwrap();
        (p, w, q)
    }

    /// Second transcription of the propagator integrand, straight from the formula.
    fn propagator_integrand_direct(a: f64, beta: f64, x: f64, p: &PhysicalParams) -> Complex64 {
        let (m, g, r, h) = (p.mass(), p.g(), p.radius(), p.hbar());
        let i = Complex64::i();
        let al = (x * x - 4.0 * m * m * h * h - 4.0 * i * m * h * x)
            / (x * (x * x + 4.0 * m * m * h * h));
        let w2 = -2.0 * g / r;
        let num = 4.0 * a * a * g * m * m * al * al / r - m * m * g * g * beta * beta / (2.0 * h * h)
            + 2.0 * i * a * m * m * al * beta * g * (2.0 * g / r).sqrt() / h;
        let den = 4.0 * m * m * g * al / r + i * m * w2 * beta * beta / h;
        -al * a * a + num / den
    }

    #[test]
    fn alpha_at_critical_resolution() {
        let p = natural();
        assert_eq!(alpha(2.0, &p), Complex64::new(0.0, -0.5));
        let q = PhysicalParams::new(1.7, 1.0, 0.5, 1.0, 0.3).unwrap();
        let a = alpha(q.critical_resolution(), &q);
        let expected = -1.0 / (2.0 * 1.7 * 0.3);
        assert_eq!(a.re, 0.0);
        assert!((a.im - expected).abs() < 1e-12 * expected.abs());
    }

    #[test]
    fn alpha_signs() {
        let p = natural();
        for x in [0.1, 1.0, 1.9, 2.1, 5.0, 40.0] {
            let a = alpha(x, &p);
            assert!(a.im < 0.0);
            assert_eq!(a.re.signum(), (x * x - 4.0).signum());
        }
    }

    #[test]
    fn gamma_cap_vanishes_at_critical_resolution() {
        let (p, w, q) = setup(2.0);
        let ab = AlphaBeta::new(&q, &p, &w);
        let gc = GammaCaps::new(&ab, &p, &w);
        assert!(gc.gamma_cap_series.values.iter().all(|&v| v == 0.0));
        assert!(ab.beta_series.values.iter().all(|b| b.is_finite()));
        assert!(gc.gamma_series.values.iter().all(|g| g.is_finite() && *g > 0.0));
    }

    #[test]
    fn integrand_matches_direct_transcription() {
        let (p, w, q) = setup(1.3);
        let ab = AlphaBeta::new(&q, &p, &w);
        for (t, a) in [(0.01, 0.7), (0.4, -1.2), (0.93, 0.05)] {
            let v = exponent_integrand(t, a, &ab, &p, &w).unwrap();
            let d = propagator_integrand_direct(a, ab.beta_at(t), 1.3, &p);
            assert!((v - d).norm() <= 1e-12 * d.norm(), "{v} vs {d}");
        }
    }

    #[test]
    fn integrand_purely_imaginary_at_critical_resolution() {
        let (p, w, q) = setup(2.0);
        let ab = AlphaBeta::new(&q, &p, &w);
        for (t, a) in [(0.01, 0.0), (0.2, 1.5), (0.8, -0.4)] {
            let v = exponent_integrand(t, a, &ab, &p, &w).unwrap();
            assert!(v.re.abs() <= 1e-12 * v.norm(), "{v}");
        }
    }

    #[test]
    fn integrand_bounded_near_tau_start() {
        let (p, w, q) = setup(1.3);
        let ab = AlphaBeta::new(&q, &p, &w);
        let near: Vec<f64> = [1e-3, 1e-5, 1e-7]
            .iter()
            .map(|&s| {
                let beta = ab.beta_at(s);
                propagator_terms(0.0, beta, ab.alpha, &p).unwrap().iter().sum::<Complex64>().norm()
            })
            .collect();
        // leading ratio -m²g²/(2ℏ²) / (imω²/ℏ) = m g²/(2ℏ Ω²)
        let limit = p.mass() * p.g() * p.g() / (2.0 * p.hbar() * p.omega_rate_sq());
        for v in &near {
            assert!((v - limit).abs() < 1e-2 * limit, "{v} vs {limit}");
        }
        assert!((near[2] - limit).abs() < 1e-8);
    }

    #[test]
    fn out_of_window_time_is_rejected() {
        let (p, w, q) = setup(1.0);
        let ab = AlphaBeta::new(&q, &p, &w);
        assert!(exponent_integrand(0.0, 0.0, &ab, &p, &w).is_err());
    }

    #[test]
    fn zero_record_exponent_imaginary_at_critical_resolution() {
        let (p, w, q) = setup(2.0);
        let e = log_propagator(&OutputRecord::zero(&w), &q, &p, &w).unwrap();
        assert!(e.total.re.abs() < 1e-12 * e.total.norm());
        let sum: Complex64 = e.per_term.iter().map(|(_, v)| *v).sum();
        assert!((sum - e.total).norm() <= 1e-12 * e.total.norm());
    }

    #[test]
    fn record_scaling_of_terms() {
        let (p, w, q) = setup(0.7);
        let a = RecordFamily::new(3, 3, 1.0).unwrap().generate(1, &w).remove(0);
        let e1 = log_propagator(&a, &q, &p, &w).unwrap();
        let e2 = log_propagator(&a.scaled(2.5), &q, &p, &w).unwrap();
        let ratio = |k: usize| e2.per_term[k].1 / e1.per_term[k].1;
        assert!((ratio(0) - 6.25).norm() < 1e-10);
        assert!((ratio(1) - 6.25).norm() < 1e-10);
        assert!((ratio(2) - 1.0).norm() < 1e-12);
        assert!((ratio(3) - 2.5).norm() < 1e-10);
    }

    #[test]
    fn zero_record_only_fourth_term() {
        let (p, w, q) = setup(0.9);
        let ab = AlphaBeta::new(&q, &p, &w);
        let gc = GammaCaps::new(&ab, &p, &w);
        let e = log_probability_from_parts(&OutputRecord::zero(&w), &ab, &gc, &p, &w).unwrap();
        for k in 0..3 {
            assert_eq!(e.per_term[k].1, Complex64::new(0.0, 0.0));
        }
        assert!(e.per_term[3].1.re.abs() > 1e-6);
        assert_eq!(e.total.im, 0.0);
    }

    #[test]
    fn first_term_damps_above_critical_resolution() {
        let p = natural();
        for x in [2.5, 4.0, 10.0] {
            let t = probability_terms(1.0, 1.0, gamma(1.0, x, &p), gamma_cap(1.0, x, &p), x, &p).unwrap();
            assert!(t[0] < 0.0);
        }
    }

    #[test]
    fn stabilized_fourth_term_matches_unscaled_form() {
        let p = natural();
        let (m, g, r, h) = (p.mass(), p.g(), p.radius(), p.hbar());
        for (beta, x) in [(3.0, 0.5), (0.2, 3.0), (40.0, 1.1)] {
            let t = probability_terms(0.0, beta, gamma(beta, x, &p), gamma_cap(beta, x, &p), x, &p).unwrap();
            let k = 4.0 * m * m * g / (r * x) * (x * x - 4.0 * m * m * h * h)
                / (x * x + 4.0 * m * m * h * h);
            let b = m * p.omega_sq() * beta * beta / h
                - 16.0 * m * m * m * g * h / (r * (x * x + 4.0 * m * m * h * h));
            let unscaled = -(m * m * g * g * beta * beta / (h * h)) * k / (k * k + b * b);
            assert!((t[3] - unscaled).abs() <= 1e-12 * unscaled.abs());
        }
    }

    #[test]
    fn limit_rejects_bad_sequences() {
        let (p, w, q) = setup(1.0);
        let recs = vec![OutputRecord::zero(&w)];
        assert!(zero_resolution_limit(&recs, &q, &p, &w, &[0.1]).is_err());
        assert!(zero_resolution_limit(&recs, &q, &p, &w, &[0.1, 0.2]).is_err());
        assert!(zero_resolution_limit(&recs, &q, &p, &w, &[0.1, -0.2]).is_err());
    }

    #[test]
    fn inverse_fit_recovers_exact_law() {
        let d = [1.0, 0.5, 0.25, 0.125];
        let y: Vec<f64> = d.iter().map(|x| 3.0 / x - 1.5).collect();
        let (c, e) = fit_inverse(&d, &y);
        assert!((c - 3.0).abs() < 1e-12 && (e + 1.5).abs() < 1e-12);
    }
}

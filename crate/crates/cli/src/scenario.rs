//! The seven scenarios. Each returns metrics, checks and an optional series.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use qnd_core::oracle::{
    free_propagator_magnitude, momentum_slice_check, oracle_log_probability, oscillator_propagator_magnitude,
    richardson_log_magnitude, LatticeHamiltonian, SliceCoupling,
};
use qnd_core::propagator::{
    consistency_residual, log_probabilities_at, spread, uniform_probability_check, zero_resolution_limit,
    IntegrandTable, PROPAGATOR_TERMS, PROBABILITY_TERMS,
};
use qnd_core::qd::sql_contrast_report;
use qnd_core::qnd::{
    analytic_f, equal_time_commutator_with_q, heisenberg_components, integrate_riccati_oracle, qnd_commutator,
};
use qnd_core::{build_qnd_variable, Error, Grid, Result, SampledSeries, SigmaChoice};

use crate::config::{Resolved, Scenario, ScenarioConfig};
use crate::summary::{Check, Series, SeriesTotals};

/// Tolerances pinned by the acceptance criteria.
pub mod tol {
    pub const RICCATI_REL: f64 = 1e-8;
    pub const COMMUTATOR_REL: f64 = 1e-12;
    pub const UNIFORM_ABS: f64 = 1e-10;
    pub const SHARPNESS_SPREAD: f64 = 1e-3;
    pub const LATTICE_SPREAD: f64 = 1e-6;
    pub const LIMIT_RECORD_SPREAD: f64 = 1e-2;
    pub const LIMIT_HBAR_CHANGE: f64 = 1e-3;
    pub const LIMIT_MASS_SCALING: f64 = 5e-2;
    pub const ANCHOR_REL: f64 = 1e-6;
    pub const SLICE_REL: f64 = 1e-6;
    pub const QND_SPREAD: f64 = 1e-6;
    pub const QD_SPREAD: f64 = 1e-3;
    pub const NO_MEASUREMENT_SPREAD: f64 = 1e-6;
}

/// Factor above critical used as "no measurement".
pub const FAR_RESOLUTION_FACTOR: f64 = 1e9;

#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub metrics: BTreeMap<String, f64>,
    pub per_term: BTreeMap<String, f64>,
    pub residuals: BTreeMap<String, f64>,
    pub details: Value,
    pub checks: Vec<Check>,
    pub series: Option<Series>,
    pub series_totals: Option<SeriesTotals>,
}

impl Outcome {
    fn metric(&mut self, name: &str, v: f64) {
        self.metrics.insert(name.to_string(), v);
    }

    fn integrand_series(&mut self, table: &IntegrandTable) -> Result<()> {
        let u = table.propagator_exponent()?;
        let p = table.log_probability()?;
        self.series = Some(Series::integrand(table));
        self.series_totals = Some(SeriesTotals {
            log_u_re: u.total.re,
            log_u_im: u.total.im,
            log_p: p.total.re,
        });
        Ok(())
    }
}

pub fn execute(cfg: &ScenarioConfig, r: &Resolved) -> Result<Outcome> {
    match cfg.scenario {
        Scenario::RiccatiCheck => riccati(cfg, r),
        Scenario::Commutator => commutator(cfg, r),
        Scenario::Probability => probability(r),
        Scenario::UniformCheck => uniform(r),
        Scenario::LimitSweep => limit(cfg, r),
        Scenario::OracleCompare => oracle_compare(cfg, r),
        Scenario::QdContrast => qd_contrast(cfg, r),
    }
}

fn require_records(r: &Resolved) -> Result<()> {
    if r.records.is_empty() {
        return Err(Error::Usage("this scenario needs a record block".into()));
    }
    Ok(())
}

fn require_seed(r: &Resolved) -> Result<u64> {
    r.seed
        .ok_or_else(|| Error::Usage("random sampling needs a seed (sampling.seed or record.seed)".into()))
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

fn riccati(cfg: &ScenarioConfig, r: &Resolved) -> Result<Outcome> {
    let sol = integrate_riccati_oracle(0.0, &r.window, &r.params, cfg.riccati.steps)?;
    let mut series = Series::new("riccati", &["t", "f_rk4", "f_closed", "rel_err"]);
    let mut max_rel = 0.0_f64;
    for (i, (t, f)) in sol.iter().enumerate() {
        let exact = analytic_f(t, r.window.tau_start, &r.params);
        let rel = if i == 0 { (f - exact).abs() } else { (f - exact).abs() / exact.abs() };
        max_rel = max_rel.max(rel);
        series.rows.push(vec![t, f, exact, rel]);
    }
    let mut out = Outcome::default();
    out.metric("max_rel_err", max_rel);
    out.metric("steps", cfg.riccati.steps as f64);
    out.metric("span_omega_units", r.window.duration() * r.params.omega_rate());
    out.checks.push(Check::le("riccati_max_rel_err", max_rel, tol::RICCATI_REL));
    out.series = Some(series);
    Ok(out)
}

fn tabulated_sigma(r: &Resolved) -> SigmaChoice {
    match r.qnd.sigma_choice() {
        SigmaChoice::Tabulated(s) => SigmaChoice::Tabulated(s.clone()),
        _ => {
            let w = &r.window;
            SigmaChoice::Tabulated(SampledSeries::from_fn(w.full_grid(), |t| {
                let s = t - w.tau_start;
                1.0 + 0.5 * s * s
            }))
        }
    }
}

fn commutator(cfg: &ScenarioConfig, r: &Resolved) -> Result<Outcome> {
    let seed = require_seed(r)?;
    let trials = cfg.sampling.trials.unwrap_or(100);
    let (p, w) = (&r.params, &r.window);
    let tau = w.tau_start;
    let choices = [
        ("cosh", SigmaChoice::CoshDefault),
        ("unit", SigmaChoice::UnitConstant),
        ("tabulated", tabulated_sigma(r)),
    ];
    let pointwise = Grid::new(w.tau_start, w.tau_end, 1000)?;
    let mut out = Outcome::default();
    for (name, choice) in choices {
        let q = build_qnd_variable(choice, w, p)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pair_max = 0.0_f64;
        for _ in 0..trials {
            let t1 = rng.gen_range(w.tau_start..=w.tau_end);
            let t2 = rng.gen_range(w.tau_start..=w.tau_end);
            let c = qnd_commutator(t1, t2, &q, tau, p);
            let (_, v1) = heisenberg_components(&q, t1, tau, p);
            let (_, v2) = heisenberg_components(&q, t2, tau, p);
            pair_max = pair_max.max(c.norm() / (p.hbar() * (v1 * v2).abs()));
        }
        let mut point_max = 0.0_f64;
        for t in pointwise.nodes() {
            let (u, v) = heisenberg_components(&q, t, tau, p);
            point_max = point_max.max(u.abs() / v.abs());
        }
        out.metric(&format!("pair_ratio_{name}"), pair_max);
        out.metric(&format!("pointwise_ratio_{name}"), point_max);
        out.checks.push(Check::le(&format!("commutator_pairs_{name}"), pair_max, tol::COMMUTATOR_REL));
        out.checks.push(Check::le(&format!("commutator_pointwise_{name}"), point_max, tol::COMMUTATOR_REL));
    }
    // [A, Q] at equal times against −iℏ cosh(2Ω(t − τ′)) for the cosh member
    let q = build_qnd_variable(SigmaChoice::CoshDefault, w, p)?;
    let mut eq_dev = 0.0_f64;
    for t in pointwise.nodes() {
        let c = equal_time_commutator_with_q(&q, t, tau, p);
        let expected = -p.hbar() * (2.0 * p.omega_rate() * (t - tau)).cosh();
        eq_dev = eq_dev.max((c.im - expected).abs() / expected.abs());
    }
    out.metric("equal_time_q_rel_dev", eq_dev);
    out.metric("trials", trials as f64);

    let mut series = Series::new("commutator", &["t", "u", "v", "u_over_v"]);
    for t in pointwise.nodes() {
        let (u, v) = heisenberg_components(&r.qnd, t, tau, p);
        series.rows.push(vec![t, u, v, u / v]);
    }
    out.series = Some(series);
    Ok(out)
}

fn exponent_terms(out: &mut Outcome, table: &IntegrandTable) -> Result<()> {
    let p = table.log_probability()?;
    let u = table.propagator_exponent()?;
    for (k, name) in PROBABILITY_TERMS.iter().enumerate() {
        out.per_term.insert(format!("log_p_{name}"), p.per_term[k].1.re);
    }
    for (k, name) in PROPAGATOR_TERMS.iter().enumerate() {
        out.per_term.insert(format!("log_u_{name}_re"), u.per_term[k].1.re);
        out.per_term.insert(format!("log_u_{name}_im"), u.per_term[k].1.im);
    }
    out.metric("log_p", p.total.re);
    out.metric("log_u_re", u.total.re);
    out.metric("log_u_im", u.total.im);
    out.metric("two_re_log_u", 2.0 * u.total.re);
    out.metric("max_integrand_log_p", p.max_integrand);
    out.metric("max_integrand_log_u", u.max_integrand);
    Ok(())
}

/// Resolution products, in units of `2mℏ`, at which the consistency residual is tabulated.
pub const RESIDUAL_GRID: [f64; 6] = [0.25, 0.5, 1.0, 2.0, 4.0, 8.0];

fn probability(r: &Resolved) -> Result<Outcome> {
    require_records(r)?;
    let (p, w) = (&r.params, &r.window);
    let table = IntegrandTable::build(&r.records[0], &r.qnd, p, w)?;
    let mut out = Outcome::default();
    exponent_terms(&mut out, &table)?;
    out.integrand_series(&table)?;
    out.metric("resolution_product", w.resolution_product());
    out.metric("ratio_to_critical", w.resolution_product() / p.critical_resolution());

    let own = consistency_residual(&r.records[0], &r.qnd, p, w)?;
    out.residuals.insert("consistency".into(), own.residual);
    let mut grid_rows = Vec::new();
    let mut grid_max = 0.0_f64;
    for ratio in RESIDUAL_GRID {
        let wx = w.with_resolution_product(ratio * p.critical_resolution())?;
        for (i, a) in r.records.iter().enumerate() {
            let c = consistency_residual(a, &r.qnd, p, &wx)?;
            grid_max = grid_max.max(c.residual.abs());
            grid_rows.push(json!({
                "ratio_to_critical": ratio,
                "record": i,
                "closed_form": c.closed_form,
                "from_propagator": c.from_propagator,
                "residual": c.residual,
            }));
        }
    }
    out.residuals.insert("consistency_grid_max_abs".into(), grid_max);
    out.checks.push(Check::reported("consistency_residual", own.residual));
    out.checks.push(Check::reported("consistency_residual_grid", grid_max));
    out.details = json!({ "residual_grid": grid_rows });
    Ok(out)
}

fn uniform(r: &Resolved) -> Result<Outcome> {
    require_records(r)?;
    let (p, w) = (&r.params, &r.window);
    let rep = uniform_probability_check(p, w, &r.qnd, &r.records)?;
    let x = p.critical_resolution();
    let spread_at = |factor: f64| -> Result<f64> {
        let v: Vec<f64> = log_probabilities_at(&r.records, &r.qnd, p, w, x * factor)?
            .into_iter()
            .map(|(lp, _)| lp.total.re)
            .collect();
        Ok(spread(&v))
    };
    let (below, above) = (spread_at(0.9)?, spread_at(1.1)?);

    let mut out = Outcome::default();
    out.metric("max_abs_log_p", rep.max_abs_log_p);
    out.metric("max_abs_two_re_log_u", rep.max_abs_two_re_log_u);
    out.metric("spread", rep.spread());
    out.metric("spread_minus_10pct", below);
    out.metric("spread_plus_10pct", above);
    out.metric("trials", rep.trials as f64);
    for (k, name) in PROBABILITY_TERMS.iter().enumerate() {
        out.per_term.insert(format!("max_abs_{name}"), rep.max_abs_term[k]);
        out.checks.push(Check::le(&format!("term_{name}"), rep.max_abs_term[k], tol::UNIFORM_ABS));
    }
    out.checks.insert(0, Check::le("max_abs_log_p", rep.max_abs_log_p, tol::UNIFORM_ABS));
    out.checks.push(Check::le("two_re_log_u", rep.max_abs_two_re_log_u, tol::UNIFORM_ABS));
    out.checks.push(Check::gt("sharpness_minus_10pct", below, tol::SHARPNESS_SPREAD));
    out.checks.push(Check::gt("sharpness_plus_10pct", above, tol::SHARPNESS_SPREAD));
    out.details = to_value(&rep);
    let wc = w.with_resolution_product(x)?;
    out.integrand_series(&IntegrandTable::build(&r.records[0], &r.qnd, p, &wc)?)?;
    Ok(out)
}

fn limit(cfg: &ScenarioConfig, r: &Resolved) -> Result<Outcome> {
    require_records(r)?;
    let (p, w) = (&r.params, &r.window);
    let deltas = &cfg.resolutions;
    let base = zero_resolution_limit(&r.records, &r.qnd, p, w, deltas)?;
    let hbar2 = zero_resolution_limit(&r.records, &r.qnd, &p.with_hbar(2.0 * p.hbar())?, w, deltas)?;
    let mass2 = zero_resolution_limit(&r.records, &r.qnd, &p.with_mass(2.0 * p.mass())?, w, deltas)?;
    let hbar_change = ((hbar2.mean_c - base.mean_c) / base.mean_c).abs();
    let mass_ratio = mass2.mean_c / base.mean_c;
    let convergence = base
        .rows
        .iter()
        .map(|row| {
            let n = row.scaled.len();
            ((row.scaled[n - 1] - row.scaled[n - 2]) / row.scaled[n - 1]).abs()
        })
        .fold(0.0_f64, f64::max);

    let mut out = Outcome::default();
    out.metric("mean_c", base.mean_c);
    out.metric("relative_spread_c", base.relative_spread_c);
    out.metric("hbar_relative_change", hbar_change);
    out.metric("mass_ratio", mass_ratio);
    out.metric("reference_coefficient", base.reference_coefficient);
    out.metric("scaled_last_step_change", convergence);
    out.checks.push(Check::le("scaled_converges", convergence, tol::LIMIT_RECORD_SPREAD));
    out.checks.push(Check::le("record_independent_c", base.relative_spread_c, tol::LIMIT_RECORD_SPREAD));
    out.checks.push(Check::lt("hbar_independent_c", hbar_change, tol::LIMIT_HBAR_CHANGE));
    out.checks.push(Check::le("mass_squared_scaling", (mass_ratio / 4.0 - 1.0).abs(), tol::LIMIT_MASS_SCALING));
    out.details = json!({ "base": to_value(&base), "hbar_doubled": to_value(&hbar2), "mass_doubled": to_value(&mass2) });
    let smallest = w.with_delta_a_sq(*deltas.last().unwrap())?;
    out.integrand_series(&IntegrandTable::build(&r.records[0], &r.qnd, p, &smallest)?)?;
    Ok(out)
}

fn oracle_compare(cfg: &ScenarioConfig, r: &Resolved) -> Result<Outcome> {
    require_records(r)?;
    let seed = require_seed(r)?;
    let (p, w) = (&r.params, &r.window);
    let n = cfg.oracle.n_slices;
    let boundary = (cfg.oracle.boundary[0], cfg.oracle.boundary[1]);
    let t = w.duration();
    let mut out = Outcome::default();

    let free = richardson_log_magnitude(&LatticeHamiltonian::free(p), SliceCoupling::none, t, boundary, n)?;
    let free_exact = free_propagator_magnitude(p.mass(), p.hbar(), t);
    let free_err = (free.extrapolated - free_exact.ln()).exp_m1().abs();
    let omega = p.omega_rate();
    let osc_ham = LatticeHamiltonian::free(p).with_omega_sq(omega * omega);
    let osc = richardson_log_magnitude(&osc_ham, SliceCoupling::none, t, (0.0, 0.0), n)?;
    let osc_exact = oscillator_propagator_magnitude(p.mass(), p.hbar(), omega, t);
    let osc_err = (osc.extrapolated - osc_exact.ln()).exp_m1().abs();
    out.metric("free_anchor_rel_err", free_err);
    out.metric("oscillator_anchor_rel_err", osc_err);
    out.checks.push(Check::le("free_anchor", free_err, tol::ANCHOR_REL));
    out.checks.push(Check::le("oscillator_anchor", osc_err, tol::ANCHOR_REL));

    let trials = cfg.sampling.trials.unwrap_or(50);
    let slices = momentum_slice_check(p, w, &r.qnd, n, trials, seed)?;
    let ratios: Vec<f64> = slices.samples.iter().map(|s| s.reference_ratio_re).collect();
    out.metric("slice_max_rel_err", slices.max_rel_err);
    out.metric("slice_reference_ratio_re_mean", ratios.iter().sum::<f64>() / ratios.len().max(1) as f64);
    out.checks.push(Check::le("momentum_slice", slices.max_rel_err, tol::SLICE_REL));

    let wc = w.with_resolution_product(p.critical_resolution())?;
    let lattice: Vec<f64> = r
        .records
        .iter()
        .map(|a| oracle_log_probability(a, &r.qnd, p, &wc, n, boundary))
        .collect::<Result<_>>()?;
    out.metric("lattice_spread_at_critical", spread(&lattice));
    out.checks.push(Check::le("lattice_equiprobable_at_critical", spread(&lattice), tol::LATTICE_SPREAD));

    let here = oracle_log_probability(&r.records[0], &r.qnd, p, w, n, boundary)?;
    let table = IntegrandTable::build(&r.records[0], &r.qnd, p, w)?;
    exponent_terms(&mut out, &table)?;
    out.metric("lattice_log_p", here);
    out.residuals.insert("lattice_minus_closed_form".into(), here - out.metrics["log_p"]);
    out.integrand_series(&table)?;
    if let Some(other) = r.records.get(1) {
        let lattice_ratio = oracle_log_probability(other, &r.qnd, p, w, n, boundary)? - here;
        let closed_ratio = IntegrandTable::build(other, &r.qnd, p, w)?.log_probability()?.total.re - out.metrics["log_p"];
        out.metric("lattice_log_ratio", lattice_ratio);
        out.metric("closed_form_log_ratio", closed_ratio);
        out.residuals.insert("log_ratio_lattice_minus_closed_form".into(), lattice_ratio - closed_ratio);
    }
    out.details = json!({
        "free_anchor": to_value(&free),
        "oscillator_anchor": to_value(&osc),
        "lattice_log_p_at_critical": lattice,
        "slice_check": to_value(&slices),
    });
    Ok(out)
}

fn qd_contrast(cfg: &ScenarioConfig, r: &Resolved) -> Result<Outcome> {
    require_records(r)?;
    let (p, w) = (&r.params, &r.window);
    let critical = p.critical_resolution() / w.duration();
    let far = FAR_RESOLUTION_FACTOR * critical;
    let mut deltas: Vec<f64> = cfg.resolutions.clone();
    deltas.extend([critical, far]);
    if deltas.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
        return Err(Error::Domain("resolutions must be positive".into()));
    }
    deltas.sort_by(|a, b| b.total_cmp(a));
    deltas.dedup();
    let boundary = (cfg.oracle.boundary[0], cfg.oracle.boundary[1]);
    let rep = sql_contrast_report(p, w, &r.qnd, &r.records, &deltas, cfg.oracle.n_slices, boundary)?;
    let at_critical = rep.row_near(1.0).expect("critical row present");
    let at_far = rep.row_near(FAR_RESOLUTION_FACTOR).expect("far row present");
    let violations = rep.rows.windows(2).filter(|p| p[1].qd_spread < p[0].qd_spread).count();

    let mut out = Outcome::default();
    out.metric("qnd_spread_at_critical", at_critical.qnd_spread_closed_form);
    out.metric("qnd_lattice_spread_at_critical", at_critical.qnd_spread_lattice);
    out.metric("qd_spread_at_critical", at_critical.qd_spread);
    out.metric("qd_monotonicity_violations", violations as f64);
    out.checks.push(Check::le("qnd_spread_at_critical", at_critical.qnd_spread_closed_form, tol::QND_SPREAD));
    out.checks.push(Check::gt("qd_spread_at_critical", at_critical.qd_spread, tol::QD_SPREAD));
    let far_max = at_far
        .qnd_spread_closed_form
        .max(at_far.qnd_spread_lattice)
        .max(at_far.qd_spread);
    out.metric("max_spread_without_measurement", far_max);
    out.checks.push(Check::le("spreads_vanish_without_measurement", far_max, tol::NO_MEASUREMENT_SPREAD));
    out.checks.push(Check::reported("qd_monotonicity_violations", violations as f64));
    out.details = to_value(&rep);
    let wc = w.with_delta_a_sq(critical)?;
    out.integrand_series(&IntegrandTable::build(&r.records[0], &r.qnd, p, &wc)?)?;
    Ok(out)
}

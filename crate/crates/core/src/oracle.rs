//! Time-sliced evaluation of the restricted path integral.
//!
//! Each slice `[t_k, t_k + dt]` carries one momentum `p_k` and the phase-space
//! action `p_k (l_{k+1} − l_k) − dt H`, with the potential split evenly over
//! the two end positions. The Gaussian weight
//! `exp(−λ dt (σ p_k + ρ l̄_k − a_k)²)`, `λ = 1/(TΔa²)`, uses slice-midpoint
//! values of `σ`, `ρ`, `a` and the midpoint position `l̄_k`. Momenta are
//! integrated exactly slice by slice, which leaves a complex symmetric
//! tridiagonal quadratic form in the interior positions; that form is
//! reduced by sequential Gaussian elimination.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::params::PhysicalParams;
use crate::propagator::ComplexExponent;
use crate::qnd::{LinearObservable, QndVariable};
use crate::quadrature::simpson;
use crate::record::OutputRecord;
use crate::window::MeasurementWindow;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const PIVOT_FLOOR: f64 = 1e-300;

/// `H = p²/2m + m g l + m ω² l²/2` with freely chosen `g` and `ω²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeHamiltonian {
    pub mass: f64,
    pub hbar: f64,
    pub gravity: f64,
    pub omega_sq: f64,
}

impl LatticeHamiltonian {
    pub fn from_params(params: &PhysicalParams) -> Self {
        Self {
            mass: params.mass(),
            hbar: params.hbar(),
            gravity: params.g(),
            omega_sq: params.omega_sq(),
        }
    }

    /// Free particle of the same mass.
    pub fn free(params: &PhysicalParams) -> Self {
        Self {
            gravity: 0.0,
            omega_sq: 0.0,
            ..Self::from_params(params)
        }
    }

    pub fn with_gravity(self, gravity: f64) -> Self {
        Self { gravity, ..self }
    }

    pub fn with_omega_sq(self, omega_sq: f64) -> Self {
        Self { omega_sq, ..self }
    }
}

/// Slice-midpoint samples of the monitored combination `σ p + ρ l` and its readout.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceCoupling {
    /// `λ = 1/(TΔ²)`; zero switches the weight off.
    pub weight_rate: f64,
    pub sigma: Vec<f64>,
    pub rho: Vec<f64>,
    pub record: Vec<f64>,
}

impl SliceCoupling {
    pub fn none(n_slices: usize) -> Self {
        Self {
            weight_rate: 0.0,
            sigma: vec![0.0; n_slices],
            rho: vec![0.0; n_slices],
            record: vec![0.0; n_slices],
        }
    }

    /// Monitoring of `obs` against the readout `a` with resolution product `TΔ²`.
    pub fn monitor<A: LinearObservable + ?Sized>(
        obs: &A,
        a: &OutputRecord,
        resolution_product: f64,
        tau_start: f64,
        dt: f64,
        n_slices: usize,
    ) -> Self {
        let mids: Vec<f64> = (0..n_slices)
            .map(|k| tau_start + (k as f64 + 0.5) * dt)
            .collect();
        Self {
            weight_rate: 1.0 / resolution_product,
            sigma: mids.iter().map(|&t| obs.sigma(t)).collect(),
            rho: mids.iter().map(|&t| obs.rho(t)).collect(),
            record: mids.iter().map(|&t| a.value(t)).collect(),
        }
    }
}

/// Plain position `l`.
pub struct Position;

impl LinearObservable for Position {
    fn rho(&self, _t: f64) -> f64 {
        1.0
    }
    fn sigma(&self, _t: f64) -> f64 {
        0.0
    }
}

/// Exponent `Σ dᵢlᵢ² + 2Σ eᵢlᵢlᵢ₊₁ + Σ bᵢlᵢ + c` over the interior positions
/// `l₁ … l_{N−1}`, after the momenta and the fixed end points are folded in.
#[derive(Debug, Clone, PartialEq)]
pub struct SlicedLattice {
    pub n_slices: usize,
    pub dt: f64,
    pub boundary: (f64, f64),
    pub quad_diag: Vec<Complex64>,
    pub quad_offdiag: Vec<Complex64>,
    pub source: Vec<Complex64>,
    pub const_term: Complex64,
}

/// Closed form of `∫ dp/(2πℏ) exp(−c p² + b p)` for `Re c ≥ 0`, as a logarithm.
pub fn momentum_slice_log_factor(c: Complex64, b: Complex64, hbar: f64) -> Complex64 {
    0.5 * ((PI / c).ln()) + b * b / (4.0 * c) - (2.0 * PI * hbar).ln()
}

/// Momentum coefficients `(c, b)` of one slice, with `b = b₀ + b₁ l_k + b₂ l_{k+1}`.
struct SliceMomentum {
    c: Complex64,
    b0: Complex64,
    b1: Complex64,
    b2: Complex64,
}

fn slice_momentum(
    ham: &LatticeHamiltonian,
    lambda: f64,
    sigma: f64,
    rho: f64,
    a: f64,
    dt: f64,
) -> SliceMomentum {
    let (m, h) = (ham.mass, ham.hbar);
    let ldt = lambda * dt;
    SliceMomentum {
        c: Complex64::new(ldt * sigma * sigma, dt / (2.0 * m * h)),
        b0: Complex64::new(2.0 * ldt * sigma * a, 0.0),
        b1: Complex64::new(-ldt * sigma * rho, -1.0 / h),
        b2: Complex64::new(-ldt * sigma * rho, 1.0 / h),
    }
}

/// Assemble the lattice for an arbitrary Hamiltonian and coupling on `[tau_start, tau_start + T]`.
pub fn assemble_lattice(
    ham: &LatticeHamiltonian,
    coupling: &SliceCoupling,
    duration: f64,
    boundary: (f64, f64),
) -> Result<SlicedLattice> {
    let n = coupling.sigma.len();
    if n < 2 || coupling.rho.len() != n || coupling.record.len() != n {
        return Err(Error::Usage(format!(
            "lattice needs >= 2 slices with matching coupling arrays, got {n}"
        )));
    }
    if !(boundary.0.is_finite() && boundary.1.is_finite()) {
        return Err(Error::Domain("boundary positions must be finite".into()));
    }
    let dt = duration / n as f64;
    let (m, h) = (ham.mass, ham.hbar);
    let lambda = coupling.weight_rate;
    let zero = Complex64::new(0.0, 0.0);
    let mut diag = vec![zero; n + 1];
    let mut off = vec![zero; n];
    let mut lin = vec![zero; n + 1];
    let mut c_acc = zero;

    let pot_quad = -I * (dt * m * ham.omega_sq / (4.0 * h));
    let pot_lin = -I * (dt * m * ham.gravity / (2.0 * h));
    for k in 0..n {
        let (sigma, rho, a) = (coupling.sigma[k], coupling.rho[k], coupling.record[k]);
        let s = slice_momentum(ham, lambda, sigma, rho, a, dt);
        let inv4c = 1.0 / (4.0 * s.c);
        let ldt = lambda * dt;
        let w_quad = -ldt * rho * rho / 4.0;
        diag[k] += s.b1 * s.b1 * inv4c + w_quad + pot_quad;
        diag[k + 1] += s.b2 * s.b2 * inv4c + w_quad + pot_quad;
        off[k] += s.b1 * s.b2 * inv4c + w_quad;
        let w_lin = ldt * a * rho;
        lin[k] += 2.0 * s.b0 * s.b1 * inv4c + w_lin + pot_lin;
        lin[k + 1] += 2.0 * s.b0 * s.b2 * inv4c + w_lin + pot_lin;
        c_acc += s.b0 * s.b0 * inv4c - ldt * a * a + momentum_slice_log_factor(s.c, zero, h);
    }

    let (z0, z1) = boundary;
    let const_term = c_acc + diag[0] * z0 * z0 + diag[n] * z1 * z1 + lin[0] * z0 + lin[n] * z1;
    let mut source: Vec<Complex64> = lin[1..n].to_vec();
    source[0] += 2.0 * off[0] * z0;
    source[n - 2] += 2.0 * off[n - 1] * z1;
    Ok(SlicedLattice {
        n_slices: n,
        dt,
        boundary,
        quad_diag: diag[1..n].to_vec(),
        quad_offdiag: off[1..n - 1].to_vec(),
        source,
        const_term,
    })
}

/// Lattice for continuous monitoring of the QND variable `qnd` with readout `a`.
pub fn build_lattice(
    a: &OutputRecord,
    qnd: &QndVariable,
    params: &PhysicalParams,
    window: &MeasurementWindow,
    n_slices: usize,
    boundary: (f64, f64),
) -> Result<SlicedLattice> {
    if n_slices < 16 {
        return Err(Error::Usage(format!("need at least 16 slices, got {n_slices}")));
    }
    let dt = window.duration() / n_slices as f64;
    let coupling = SliceCoupling::monitor(
        qnd,
        a,
        window.resolution_product(),
        window.tau_start,
        dt,
        n_slices,
    );
    assemble_lattice(
        &LatticeHamiltonian::from_params(params),
        &coupling,
        window.duration(),
        boundary,
    )
}

/// Exact Gaussian integration over the interior positions.
///
/// Terms: `"determinant"` (`Σ ½ log(π/qᵢ)` over pivots `qᵢ`),
/// `"stationary"` (`Σ jᵢ²/(4qᵢ)`), `"constant"`. Pivot phases are unwrapped
/// along the sweep so the accumulated phase is continuous.
pub fn gaussian_reduce(lattice: &SlicedLattice) -> Result<ComplexExponent> {
    let n = lattice.quad_diag.len();
    let mut det = Complex64::new(0.0, 0.0);
    let mut stat = Complex64::new(0.0, 0.0);
    let mut carry_d = Complex64::new(0.0, 0.0);
    let mut carry_j = Complex64::new(0.0, 0.0);
    let mut prev_arg: Option<f64> = None;
    let (mut max_term, mut max_node) = (0.0, 0);
    for i in 0..n {
        let q = -(lattice.quad_diag[i] + carry_d);
        let j = lattice.source[i] + carry_j;
        if !(q.norm() > PIVOT_FLOOR) || !q.is_finite() {
            return Err(Error::Singular(format!("lattice pivot {i} vanishes ({q})")));
        }
        let mut arg = q.arg();
        if let Some(p) = prev_arg {
            arg += (2.0 * PI) * ((p - arg) / (2.0 * PI)).round();
        }
        prev_arg = Some(arg);
        det += 0.5 * Complex64::new(PI.ln() - q.norm().ln(), -arg);
        let s = j * j / (4.0 * q);
        stat += s;
        if s.norm() > max_term {
            max_term = s.norm();
            max_node = i;
        }
        if i + 1 < n {
            let e = lattice.quad_offdiag[i];
            carry_d = e * e / q;
            carry_j = j * e / q;
        }
    }
    let per_term = vec![
        ("determinant".to_string(), det),
        ("stationary".to_string(), stat),
        ("constant".to_string(), lattice.const_term),
    ];
    Ok(ComplexExponent {
        total: det + stat + lattice.const_term,
        per_term,
        max_integrand: max_term,
        max_node,
    })
}

/// `log P = 2 Re log U` from the lattice, boundary terms included.
pub fn oracle_log_probability(
    a: &OutputRecord,
    qnd: &QndVariable,
    params: &PhysicalParams,
    window: &MeasurementWindow,
    n_slices: usize,
    boundary: (f64, f64),
) -> Result<f64> {
    let lat = build_lattice(a, qnd, params, window, n_slices, boundary)?;
    Ok(2.0 * gaussian_reduce(&lat)?.total.re)
}

/// `log |U|` at `N` and `2N` slices and its Richardson extrapolation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extrapolated {
    pub coarse: f64,
    pub fine: f64,
    pub extrapolated: f64,
}

/// Richardson extrapolation of `log |U|` for second-order slicing error.
pub fn richardson_log_magnitude(
    ham: &LatticeHamiltonian,
    coupling_for: impl Fn(usize) -> SliceCoupling,
    duration: f64,
    boundary: (f64, f64),
    n_slices: usize,
) -> Result<Extrapolated> {
    let eval = |n: usize| -> Result<f64> {
        let lat = assemble_lattice(ham, &coupling_for(n), duration, boundary)?;
        Ok(gaussian_reduce(&lat)?.total.re)
    };
    let coarse = eval(n_slices)?;
    let fine = eval(2 * n_slices)?;
    Ok(Extrapolated {
        coarse,
        fine,
        extrapolated: (4.0 * fine - coarse) / 3.0,
    })
}

/// `|U|` of the free particle between any two points.
pub fn free_propagator_magnitude(mass: f64, hbar: f64, duration: f64) -> f64 {
    (mass / (2.0 * PI * hbar * duration)).sqrt()
}

/// `|U|` of the oscillator with real frequency `ω` (before the first caustic).
pub fn oscillator_propagator_magnitude(mass: f64, hbar: f64, omega: f64, duration: f64) -> f64 {
    (mass * omega / (2.0 * PI * hbar * (omega * duration).sin().abs())).sqrt()
}

/// Where the numeric momentum integral was taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Contour {
    RealLine,
    /// Straight line through the complex saddle, rotated onto steepest descent.
    Saddle,
}

/// Numeric `∫ dp/(2πℏ) exp(−c p² + b p)` by composite Simpson, doubling the
/// node count until successive values agree to `1e-12` relative.
pub fn numeric_momentum_integral(
    c: Complex64,
    b: Complex64,
    hbar: f64,
) -> Result<(Complex64, Contour)> {
    if c.re < 0.0 {
        return Err(Error::Domain("momentum Gaussian diverges (Re c < 0)".into()));
    }
    let f = |p: Complex64| (-c * p * p + b * p).exp();
    // real-line peak height against the saddle value: large ratios mean cancellation
    let real_ok = c.re > 0.0 && {
        let peak = b.re * b.re / (4.0 * c.re);
        let saddle = (b * b / (4.0 * c)).re;
        peak - saddle < 15.0
    };
    let (origin, dir, half_width, contour) = if real_ok {
        let w = 1.0 / c.re.sqrt();
        (Complex64::new(b.re / (2.0 * c.re), 0.0), Complex64::new(1.0, 0.0), 12.0 * w, Contour::RealLine)
    } else {
        let theta = -0.5 * c.arg();
        let w = 1.0 / c.norm().sqrt();
        (b / (2.0 * c), Complex64::from_polar(1.0, theta), 12.0 * w, Contour::Saddle)
    };
    let integrate = |nodes: usize| -> Result<Complex64> {
        let h = 2.0 * half_width / (nodes - 1) as f64;
        let vals: Vec<Complex64> = (0..nodes)
            .map(|i| f(origin + dir * (-half_width + i as f64 * h)))
            .collect();
        Ok(simpson(&vals, h)? * dir / (2.0 * PI * hbar))
    };
    let mut nodes = 2049;
    let mut prev = integrate(nodes)?;
    for _ in 0..8 {
        nodes = 2 * nodes - 1;
        let next = integrate(nodes)?;
        if (next - prev).norm() <= 1e-12 * next.norm() {
            return Ok((next, contour));
        }
        prev = next;
    }
    Err(Error::NonConvergence(format!(
        "momentum quadrature did not settle (c = {c}, b = {b})"
    )))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceSample {
    pub t: f64,
    pub l: f64,
    pub dl: f64,
    pub a: f64,
    /// Relative error of the lattice slice factor.
    pub rel_err: f64,
    /// Relative error for the kinetic-sign convention without the `p l̇` term.
    pub rel_err_lagrangian_form: f64,
    /// Reference slice exponent `4iℏm/(x(x + 2imℏ))(a − ρl)²` over the completed-square exponent.
    pub reference_ratio_re: f64,
    pub reference_ratio_im: f64,
    pub contour: Contour,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceCheckReport {
    pub trials: usize,
    pub dt: f64,
    pub max_rel_err: f64,
    pub samples: Vec<SliceSample>,
}

/// Compare numeric momentum quadrature with the closed-form slice factor
/// on `trials` seeded random slices of width `T/n_slices`.
///
/// Each slice draws `t`, `l`, `a` and a step `Δl` of typical size `√(ℏ dt/m)`.
/// Two exponents are checked: the lattice's phase-space slice, and the
/// Lagrangian-sign form `(i/ℏ)(1/2m + iℏσ²/TΔa²) p² + (2σ/TΔa²)(a − ρ l) p`.
pub fn momentum_slice_check(
    params: &PhysicalParams,
    window: &MeasurementWindow,
    qnd: &QndVariable,
    n_slices: usize,
    trials: usize,
    seed: u64,
) -> Result<SliceCheckReport> {
    let ham = LatticeHamiltonian::from_params(params);
    let dt = window.duration() / n_slices as f64;
    let lambda = 1.0 / window.resolution_product();
    let (m, h) = (params.mass(), params.hbar());
    let x = window.resolution_product();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step = (h * dt / m).sqrt();
    let mut samples = Vec::with_capacity(trials);
    for _ in 0..trials {
        let t = rng.gen_range(window.tau_start..window.tau_end);
        let l = rng.gen_range(-1.0..1.0);
        let dl = rng.gen_range(-1.0..1.0) * step;
        let a = rng.gen_range(-1.0..1.0);
        let (sigma, rho) = (qnd.sigma(t), qnd.rho(t));

        let s = slice_momentum(&ham, lambda, sigma, rho, a, dt);
        let b = s.b0 + s.b1 * l + s.b2 * (l + dl);
        // b₁ l + b₂ (l + Δl) carries the midpoint position of the weight
        let closed = momentum_slice_log_factor(s.c, b, h).exp();
        let (numeric, contour) = numeric_momentum_integral(s.c, b, h)?;
        let rel_err = (numeric - closed).norm() / closed.norm();

        // Lagrangian-sign form: coefficient of p² is dt (i/2mℏ − σ²/x)
        let c_lag = Complex64::new(dt * sigma * sigma / x, -dt / (2.0 * m * h));
        let b_lag = Complex64::new(2.0 * dt * sigma / x * (a - rho * l), 0.0);
        let closed_lag = momentum_slice_log_factor(c_lag, b_lag, h).exp();
        let (numeric_lag, _) = numeric_momentum_integral(c_lag, b_lag, h)?;
        let rel_err_lag = (numeric_lag - closed_lag).norm() / closed_lag.norm();

        // reference slice exponent: dt · 4iℏm/(x(x + 2imℏ)) · (a − ρ l)²
        let reference = dt * 4.0 * I * h * m / (x * (x + 2.0 * I * m * h)) * (a - rho * l).powi(2);
        let exact = b_lag * b_lag / (4.0 * c_lag);
        let ratio = if exact.norm() > 0.0 { reference / exact } else { Complex64::new(f64::NAN, 0.0) };
        samples.push(SliceSample {
            t,
            l,
            dl,
            a,
            rel_err,
            rel_err_lagrangian_form: rel_err_lag,
            reference_ratio_re: ratio.re,
            reference_ratio_im: ratio.im,
            contour,
        });
    }
    let max_rel_err = samples
        .iter()
        .map(|s| s.rel_err.max(s.rel_err_lagrangian_form))
        .fold(0.0, f64::max);
    Ok(SliceCheckReport {
        trials,
        dt,
        max_rel_err,
        samples,
    })
}

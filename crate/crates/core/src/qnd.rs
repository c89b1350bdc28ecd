//! The QND observable family `A(t) = σ(t)[p + f(t) l]`.
//!
//! `f = ρ/σ` must solve the Riccati equation `ḟ = f²/m − 2mg/R`; the
//! solution vanishing at `τ′` is `f(t) = −mΩ tanh(Ω(t − τ′))`. Any
//! non-vanishing `σ` then gives a variable that commutes with itself at
//! all times. Commutators are evaluated on phase-space coefficients: for
//! a quadratic Hamiltonian `l(t)` and `p(t)` are linear in `l₀, p₀`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::PhysicalParams;
use crate::window::{Grid, MeasurementWindow, SampledSeries};

/// Right-hand side of the Riccati equation for the ratio `f = ρ/σ`.
pub fn riccati_rhs(f_val: f64, params: &PhysicalParams) -> f64 {
    let m = params.mass();
    f_val * f_val / m - 2.0 * m * params.g() / params.radius()
}

/// Closed-form ratio `f(t) = −mΩ tanh(Ω(t − τ′))`.
pub fn analytic_f(t: f64, tau_ref: f64, params: &PhysicalParams) -> f64 {
    -params.m_omega() * (params.omega_rate() * (t - tau_ref)).tanh()
}

/// Classical RK4 integration of the Riccati equation over the full window,
/// starting from `f(τ′) = f0`. Fails once `|f|` exceeds `10 mΩ`.
pub fn integrate_riccati_oracle(
    f0: f64,
    window: &MeasurementWindow,
    params: &PhysicalParams,
    steps: usize,
) -> Result<SampledSeries> {
    if steps == 0 {
        return Err(Error::Usage("RK4 needs at least one step".into()));
    }
    let grid = Grid::new(window.tau_start, window.tau_end, steps + 1)?;
    let h = grid.step();
    let bound = 10.0 * params.m_omega();
    let rhs = |f: f64| riccati_rhs(f, params);
    let mut values = Vec::with_capacity(steps + 1);
    let mut f = f0;
    values.push(f);
    for i in 0..steps {
        let k1 = rhs(f);
        let k2 = rhs(f + 0.5 * h * k1);
        let k3 = rhs(f + 0.5 * h * k2);
        let k4 = rhs(f + h * k3);
        f += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !f.is_finite() || f.abs() > bound {
            return Err(Error::Divergence(format!(
                "Riccati trajectory left |f| <= 10 mΩ at t = {}",
                grid.node(i + 1)
            )));
        }
        values.push(f);
    }
    SampledSeries::new(grid, values)
}

/// How the free factor `σ(t)` of the family is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SigmaChoice {
    /// `σ(t) = cosh(Ω(t − τ′))`.
    #[default]
    CoshDefault,
    /// `σ ≡ 1`.
    UnitConstant,
    /// Samples, linearly interpolated.
    Tabulated(SampledSeries),
}

/// Anything of the form `ρ(t) l + σ(t) p`.
pub trait LinearObservable {
    fn rho(&self, t: f64) -> f64;
    fn sigma(&self, t: f64) -> f64;
}

/// One member of the QND family.
#[derive(Debug, Clone, PartialEq)]
pub struct QndVariable {
    sigma: SigmaChoice,
    tau_ref: f64,
    m_omega: f64,
    omega_rate: f64,
}

impl QndVariable {
    pub fn tau_ref(&self) -> f64 {
        self.tau_ref
    }

    pub fn sigma_choice(&self) -> &SigmaChoice {
        &self.sigma
    }

    /// The ratio `f = ρ/σ`.
    pub fn f(&self, t: f64) -> f64 {
        -self.m_omega * (self.omega_rate * (t - self.tau_ref)).tanh()
    }
}

impl LinearObservable for QndVariable {
    fn rho(&self, t: f64) -> f64 {
        self.sigma(t) * self.f(t)
    }

    fn sigma(&self, t: f64) -> f64 {
        match &self.sigma {
            SigmaChoice::CoshDefault => (self.omega_rate * (t - self.tau_ref)).cosh(),
            SigmaChoice::UnitConstant => 1.0,
            SigmaChoice::Tabulated(s) => s.at(t),
        }
    }
}

pub fn build_qnd_variable(
    sigma_choice: SigmaChoice,
    window: &MeasurementWindow,
    params: &PhysicalParams,
) -> Result<QndVariable> {
    if let SigmaChoice::Tabulated(s) = &sigma_choice {
        if s.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("tabulated sigma has non-finite samples".into()));
        }
        let first = s.values.first().copied().unwrap_or(0.0);
        // a sign change between samples means a zero of the interpolant
        if s.values.iter().any(|&v| v == 0.0 || v.signum() != first.signum()) {
            return Err(Error::Domain(
                "tabulated sigma vanishes on the window; f = rho/sigma is undefined".into(),
            ));
        }
    }
    Ok(QndVariable {
        sigma: sigma_choice,
        tau_ref: window.tau_start,
        m_omega: params.m_omega(),
        omega_rate: params.omega_rate(),
    })
}

/// Heisenberg-picture evolution over elapsed time `t`:
/// `l(t) = u_l l₀ + u_p p₀ + d_l`, `p(t) = v_l l₀ + v_p p₀ + d_p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeisenbergCoeffs {
    pub u_l: f64,
    pub u_p: f64,
    pub v_l: f64,
    pub v_p: f64,
    pub d_l: f64,
    pub d_p: f64,
}

impl HeisenbergCoeffs {
    pub fn wronskian(&self) -> f64 {
        self.u_l * self.v_p - self.u_p * self.v_l
    }
}

/// Solution of `l̈ = Ω² l − g` for the inverted oscillator.
pub fn heisenberg_coeffs(t: f64, params: &PhysicalParams) -> HeisenbergCoeffs {
    let w = params.omega_rate();
    let mw = params.m_omega();
    let (sh, ch) = ((w * t).sinh(), (w * t).cosh());
    let g = params.g();
    HeisenbergCoeffs {
        u_l: ch,
        u_p: sh / mw,
        v_l: mw * sh,
        v_p: ch,
        d_l: g / (w * w) * (1.0 - ch),
        d_p: -params.mass() * g / w * sh,
    }
}

/// Coefficients `(U, V)` of `l₀` and `p₀` in the Heisenberg form of an
/// observable at time `t`, evolved from `tau_ref`. Drifts are dropped.
pub fn heisenberg_components<A: LinearObservable + ?Sized>(
    obs: &A,
    t: f64,
    tau_ref: f64,
    params: &PhysicalParams,
) -> (f64, f64) {
    let h = heisenberg_coeffs(t - tau_ref, params);
    let (rho, sigma) = (obs.rho(t), obs.sigma(t));
    (rho * h.u_l + sigma * h.v_l, rho * h.u_p + sigma * h.v_p)
}

/// `[A(t₁), A(t₂)] = iℏ (U(t₁)V(t₂) − U(t₂)V(t₁))`.
pub fn qnd_commutator<A: LinearObservable + ?Sized>(
    t1: f64,
    t2: f64,
    obs: &A,
    tau_ref: f64,
    params: &PhysicalParams,
) -> Complex64 {
    let (u1, v1) = heisenberg_components(obs, t1, tau_ref, params);
    let (u2, v2) = heisenberg_components(obs, t2, tau_ref, params);
    Complex64::new(0.0, params.hbar() * (u1 * v2 - u2 * v1))
}

/// Coefficients `(on p, on l)` of `Q(t) = p sinh(Ω(t−τ′))/(mΩ) + cosh(Ω(t−τ′)) l`.
pub fn conjugate_q(t: f64, tau_ref: f64, params: &PhysicalParams) -> (f64, f64) {
    let x = params.omega_rate() * (t - tau_ref);
    (x.sinh() / params.m_omega(), x.cosh())
}

/// Equal-time `[A(t), Q(t)] = iℏ (ρ q_p − σ q_l)` using `[l, p] = iℏ`.
pub fn equal_time_commutator_with_q<A: LinearObservable + ?Sized>(
    obs: &A,
    t: f64,
    tau_ref: f64,
    params: &PhysicalParams,
) -> Complex64 {
    let (q_p, q_l) = conjugate_q(t, tau_ref, params);
    Complex64::new(0.0, params.hbar() * (obs.rho(t) * q_p - obs.sigma(t) * q_l))
}

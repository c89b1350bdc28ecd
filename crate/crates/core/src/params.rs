//! Physical constants of the near-surface problem.
//!
//! The Hamiltonian is `p²/2m + m g l + m ω² l²/2` with `g = GM/R²` and
//! `ω² = −2g/R`. The frequency itself is imaginary; only the real rate
//! `Ω = √(2g/R)` and the negative square `ω² = −Ω²` are ever stored.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Newton's constant in SI units.
pub const G_SI: f64 = 6.674e-11;
/// Earth mass in kg.
pub const EARTH_MASS: f64 = 5.972e24;
/// Earth mean radius in m.
pub const EARTH_RADIUS: f64 = 6.371e6;
/// Reduced Planck constant in J·s.
pub const HBAR_SI: f64 = 1.054_571_817e-34;
/// Default SI test mass (a neutron), kg.
pub const NEUTRON_MASS: f64 = 1.674_927_498e-27;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum UnitRegime {
    /// Earth constants in SI units.
    SiEarth,
    /// `m = ℏ = Ω = 1`, with `R = 1` and `G = 1` so that `M = R³/2`.
    #[default]
    Natural,
}

/// Optional replacements for the regime defaults. Every provided value must be positive.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    #[serde(default, rename = "G", skip_serializing_if = "Option::is_none")]
    pub g_const: Option<f64>,
    #[serde(default, rename = "M", skip_serializing_if = "Option::is_none")]
    pub source_mass: Option<f64>,
    #[serde(default, rename = "R", skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hbar: Option<f64>,
}

/// The problem's constants. Derived quantities are recomputed on access from
/// `G`, `M`, `R`, so they can never drift from the primary values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    m: f64,
    g_const: f64,
    source_mass: f64,
    radius: f64,
    hbar: f64,
}

impl PhysicalParams {
    pub fn new(m: f64, g_const: f64, source_mass: f64, radius: f64, hbar: f64) -> Result<Self> {
        for (name, v) in [
            ("m", m),
            ("G", g_const),
            ("M", source_mass),
            ("R", radius),
            ("hbar", hbar),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Domain(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(Self {
            m,
            g_const,
            source_mass,
            radius,
            hbar,
        })
    }

    pub fn mass(&self) -> f64 {
        self.m
    }
    pub fn big_g(&self) -> f64 {
        self.g_const
    }
    pub fn source_mass(&self) -> f64 {
        self.source_mass
    }
    pub fn radius(&self) -> f64 {
        self.radius
    }
    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    /// Surface acceleration `GM/R²`.
    pub fn g(&self) -> f64 {
        self.g_const * self.source_mass / (self.radius * self.radius)
    }

    /// `Ω² = 2g/R`.
    pub fn omega_rate_sq(&self) -> f64 {
        2.0 * self.g() / self.radius
    }

    /// `Ω = √(2g/R)`.
    pub fn omega_rate(&self) -> f64 {
        self.omega_rate_sq().sqrt()
    }

    /// `ω² = −Ω²`, the (negative) squared frequency of the inverted oscillator.
    pub fn omega_sq(&self) -> f64 {
        -self.omega_rate_sq()
    }

    /// `mΩ`, the asymptote of the QND ratio function.
    pub fn m_omega(&self) -> f64 {
        self.m * self.omega_rate()
    }

    /// `2mℏ`, the resolution product at which all outputs become equiprobable.
    pub fn critical_resolution(&self) -> f64 {
        2.0 * self.m * self.hbar
    }

    pub fn with_mass(&self, m: f64) -> Result<Self> {
        Self::new(m, self.g_const, self.source_mass, self.radius, self.hbar)
    }

    pub fn with_hbar(&self, hbar: f64) -> Result<Self> {
        Self::new(self.m, self.g_const, self.source_mass, self.radius, hbar)
    }
}

/// Build parameters for `regime`, replacing defaults with any positive override.
///
/// In natural mode `m = ℏ = 1`, `R = G = 1` and `M = 1/2`, which gives
/// `g = 1/2` and `Ω = 1`.
pub fn make_params(regime: UnitRegime, overrides: &ParamOverrides) -> Result<PhysicalParams> {
    let (m, g_const, source_mass, radius, hbar) = match regime {
        UnitRegime::SiEarth => (NEUTRON_MASS, G_SI, EARTH_MASS, EARTH_RADIUS, HBAR_SI),
        UnitRegime::Natural => (1.0, 1.0, 0.5, 1.0, 1.0),
    };
    let pick = |name: &str, o: Option<f64>, d: f64| -> Result<f64> {
        match o {
            Some(v) if !(v.is_finite() && v > 0.0) => {
                Err(Error::Domain(format!("override {name} must be positive, got {v}")))
            }
            Some(v) => Ok(v),
            None => Ok(d),
        }
    };
    PhysicalParams::new(
        pick("m", overrides.m, m)?,
        pick("G", overrides.g_const, g_const)?,
        pick("M", overrides.source_mass, source_mass)?,
        pick("R", overrides.radius, radius)?,
        pick("hbar", overrides.hbar, hbar)?,
    )
}

//! Measurement readouts `a(t)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::window::{Grid, MeasurementWindow, SampledSeries};

/// A readout of the monitored observable, defined at every time in the window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputRecord {
    /// `a(t) = c₀ + Σₖ cₖ cos(kπs) + sₖ sin(kπs)` with `s = (t − start)/length`.
    Fourier {
        start: f64,
        length: f64,
        offset: f64,
        cos: Vec<f64>,
        sin: Vec<f64>,
    },
    /// Explicit samples, linearly interpolated.
    Samples(SampledSeries),
}

impl OutputRecord {
    pub fn constant(value: f64, window: &MeasurementWindow) -> Self {
        OutputRecord::Fourier {
            start: window.tau_start,
            length: window.duration(),
            offset: value,
            cos: vec![],
            sin: vec![],
        }
    }

    pub fn zero(window: &MeasurementWindow) -> Self {
        Self::constant(0.0, window)
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        OutputRecord::Samples(SampledSeries::from_fn(grid, f))
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            OutputRecord::Fourier {
                start,
                length,
                offset,
                cos,
                sin,
            } => {
                let s = (t - start) / length;
                let mut v = *offset;
                for (k, c) in cos.iter().enumerate() {
                    v += c * ((k + 1) as f64 * PI * s).cos();
                }
                for (k, c) in sin.iter().enumerate() {
                    v += c * ((k + 1) as f64 * PI * s).sin();
                }
                v
            }
            OutputRecord::Samples(s) => s.at(t),
        }
    }

    pub fn sample(&self, grid: Grid) -> SampledSeries {
        SampledSeries::from_fn(grid, |t| self.value(t))
    }

    /// The record multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        match self {
            OutputRecord::Fourier {
                start,
                length,
                offset,
                cos,
                sin,
            } => OutputRecord::Fourier {
                start: *start,
                length: *length,
                offset: offset * factor,
                cos: cos.iter().map(|c| c * factor).collect(),
                sin: sin.iter().map(|c| c * factor).collect(),
            },
            OutputRecord::Samples(s) => OutputRecord::Samples(s.map(|v| v * factor)),
        }
    }
}

/// Seeded generator of smooth bounded readouts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecordFamily {
    pub seed: u64,
    pub modes: usize,
    /// Bound on `sup |a(t)|`.
    pub amplitude: f64,
}

impl RecordFamily {
    pub fn new(seed: u64, modes: usize, amplitude: f64) -> Result<Self> {
        if !(amplitude.is_finite() && amplitude >= 0.0) {
            return Err(Error::Domain(format!("record amplitude must be >= 0, got {amplitude}")));
        }
        Ok(Self {
            seed,
            modes,
            amplitude,
        })
    }

    /// `count` records; coefficients are uniform so that `|a| <= amplitude`.
    pub fn generate(&self, count: usize, window: &MeasurementWindow) -> Vec<OutputRecord> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let per = self.amplitude / (2 * self.modes + 1) as f64;
        (0..count)
            .map(|_| {
                let mut draw = || rng.gen_range(-per..=per);
                let offset = draw();
                let cos = (0..self.modes).map(|_| draw()).collect();
                let sin = (0..self.modes).map(|_| draw()).collect();
                OutputRecord::Fourier {
                    start: window.tau_start,
                    length: window.duration(),
                    offset,
                    cos,
                    sin,
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_family_is_reproducible_and_bounded() {
        let w = MeasurementWindow::new(0.0, 2.0, 1.0, 101).unwrap();
        let fam = RecordFamily::new(42, 3, 1.5).unwrap();
        let a = fam.generate(5, &w);
        let b = fam.generate(5, &w);
        assert_eq!(a, b);
        assert_ne!(a[0], a[1]);
        for r in &a {
            for t in w.full_grid().nodes() {
                assert!(r.value(t).abs() <= 1.5);
            }
        }
    }

    #[test]
    fn scaling_is_linear() {
        let w = MeasurementWindow::new(0.0, 2.0, 1.0, 101).unwrap();
        let r = RecordFamily::new(1, 2, 1.0).unwrap().generate(1, &w).remove(0);
        let s = r.scaled(-3.0);
        for t in [0.1, 0.9, 1.7] {
            assert!((s.value(t) + 3.0 * r.value(t)).abs() < 1e-14);
        }
    }
}

//! Measurement windows, uniform grids and sampled series.

use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul};

use crate::error::{Error, Result};

/// Default relative offset of the lower integration limit.
pub const DEFAULT_EPS_OFFSET: f64 = 1e-3;

/// The interval `[τ′, τ″]` over which the observable is monitored, its
/// resolution `Δa²`, and the Simpson grid used for time integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementWindow {
    pub tau_start: f64,
    pub tau_end: f64,
    pub delta_a_sq: f64,
    pub n_grid: usize,
    #[serde(default = "default_eps")]
    pub eps_offset: f64,
}

fn default_eps() -> f64 {
    DEFAULT_EPS_OFFSET
}

impl MeasurementWindow {
    pub fn new(tau_start: f64, tau_end: f64, delta_a_sq: f64, n_grid: usize) -> Result<Self> {
        Self {
            tau_start,
            tau_end,
            delta_a_sq,
            n_grid,
            eps_offset: DEFAULT_EPS_OFFSET,
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self> {
        if !(self.tau_start.is_finite() && self.tau_end.is_finite() && self.tau_end > self.tau_start) {
            return Err(Error::Domain(format!(
                "window needs tau_end > tau_start, got [{}, {}]",
                self.tau_start, self.tau_end
            )));
        }
        if !(self.delta_a_sq.is_finite() && self.delta_a_sq > 0.0) {
            return Err(Error::Domain(format!(
                "delta_a_sq must be positive, got {}",
                self.delta_a_sq
            )));
        }
        if self.n_grid < 3 || self.n_grid.is_multiple_of(2) {
            return Err(Error::Usage(format!(
                "n_grid must be odd and >= 3, got {}",
                self.n_grid
            )));
        }
        if !(self.eps_offset > 0.0 && self.eps_offset < 0.1) {
            return Err(Error::Domain(format!(
                "eps_offset must lie in (0, 0.1), got {}",
                self.eps_offset
            )));
        }
        Ok(self)
    }

    /// `T = τ″ − τ′`.
    pub fn duration(&self) -> f64 {
        self.tau_end - self.tau_start
    }

    /// The resolution product `TΔa²`.
    pub fn resolution_product(&self) -> f64 {
        self.duration() * self.delta_a_sq
    }

    pub fn with_delta_a_sq(&self, delta_a_sq: f64) -> Result<Self> {
        Self {
            delta_a_sq,
            ..*self
        }
        .validated()
    }

    /// Same window with `Δa²` chosen so that `TΔa² = product`.
    pub fn with_resolution_product(&self, product: f64) -> Result<Self> {
        self.with_delta_a_sq(product / self.duration())
    }

    /// Grid over `[τ′ + εT, τ″]`, the domain on which `coth` is finite.
    pub fn clipped_grid(&self) -> Grid {
        Grid {
            start: self.tau_start + self.eps_offset * self.duration(),
            end: self.tau_end,
            n: self.n_grid,
        }
    }

    /// Grid over the full `[τ′, τ″]`.
    pub fn full_grid(&self) -> Grid {
        Grid {
            start: self.tau_start,
            end: self.tau_end,
            n: self.n_grid,
        }
    }
}

/// Uniform grid of `n` nodes from `start` to `end` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub start: f64,
    pub end: f64,
    pub n: usize,
}

impl Grid {
    pub fn new(start: f64, end: f64, n: usize) -> Result<Self> {
        if n < 2 || !(end > start) {
            return Err(Error::Usage(format!("bad grid [{start}, {end}] with {n} nodes")));
        }
        Ok(Self { start, end, n })
    }

    pub fn step(&self) -> f64 {
        (self.end - self.start) / (self.n - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.end
        } else {
            self.start + i as f64 * self.step()
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.node(i))
    }

    pub fn length(&self) -> f64 {
        self.end - self.start
    }
}

/// Samples of a real or complex function on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledSeries<T = f64> {
    pub grid: Grid,
    pub values: Vec<T>,
}

impl<T: Copy> SampledSeries<T> {
    pub fn new(grid: Grid, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.n {
            return Err(Error::Usage(format!(
                "series has {} samples, grid has {} nodes",
                values.len(),
                grid.n
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> T) -> Self {
        let values = grid.nodes().map(f).collect();
        Self { grid, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> SampledSeries<U> {
        SampledSeries {
            grid: self.grid,
            values: self.values.iter().copied().map(f).collect(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, T)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(move |(i, v)| (self.grid.node(i), *v))
    }
}

impl<T> SampledSeries<T>
where
    T: Copy + Add<Output = T> + Mul<f64, Output = T>,
{
    /// Piecewise-linear value at `t`, clamped to the end samples outside the grid.
    pub fn at(&self, t: f64) -> T {
        let g = &self.grid;
        if t <= g.start {
            return self.values[0];
        }
        if t >= g.end {
            return self.values[g.n - 1];
        }
        let s = (t - g.start) / g.step();
        let i = (s.floor() as usize).min(g.n - 2);
        let w = s - i as f64;
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_even_grid() {
        assert!(matches!(
            MeasurementWindow::new(0.0, 1.0, 1.0, 10),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn rejects_reversed_window_and_bad_eps() {
        assert!(MeasurementWindow::new(1.0, 0.0, 1.0, 11).is_err());
        assert!(MeasurementWindow::new(0.0, 1.0, -1.0, 11).is_err());
        let w = MeasurementWindow {
            eps_offset: 0.2,
            ..MeasurementWindow::new(0.0, 1.0, 1.0, 11).unwrap()
        };
        assert!(w.validated().is_err());
    }

    #[test]
    fn clipped_grid_starts_after_tau_start() {
        let w = MeasurementWindow::new(2.0, 4.0, 1.0, 11).unwrap();
        let g = w.clipped_grid();
        assert_eq!(g.start, 2.0 + 1e-3 * 2.0);
        assert_eq!(g.node(10), 4.0);
    }

    #[test]
    fn linear_interpolation_between_nodes() {
        let g = Grid::new(0.0, 1.0, 3).unwrap();
        let s = SampledSeries::new(g, vec![0.0, 1.0, 4.0]).unwrap();
        assert_eq!(s.at(0.25), 0.5);
        assert_eq!(s.at(0.75), 2.5);
        assert_eq!(s.at(-1.0), 0.0);
        assert_eq!(s.at(2.0), 4.0);
    }
}

//! Composite Simpson quadrature on uniform grids.

use std::ops::{Add, Mul};

use crate::error::{Error, Result};
use crate::window::SampledSeries;

/// Composite Simpson value of a sampled series. Needs an odd number of samples.
pub fn integrate<T>(series: &SampledSeries<T>) -> Result<T>
where
    T: Copy + Add<Output = T> + Mul<f64, Output = T>,
{
    simpson(&series.values, series.grid.step())
}

/// Composite Simpson rule over equally spaced samples `h` apart.
pub fn simpson<T>(values: &[T], h: f64) -> Result<T>
where
    T: Copy + Add<Output = T> + Mul<f64, Output = T>,
{
    let n = values.len();
    if n < 3 || n.is_multiple_of(2) {
        return Err(Error::Usage(format!(
            "Simpson rule needs an odd number (>= 3) of samples, got {n}"
        )));
    }
    let mut acc = values[0] + values[n - 1];
    for (i, v) in values.iter().enumerate().take(n - 1).skip(1) {
        acc = acc + *v * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    Ok(acc * (h / 3.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::window::Grid;
    use num_complex::Complex64;
    use proptest::prelude::*;

    #[test]
    fn constant_series() {
        let g = Grid::new(1.0, 3.5, 9).unwrap();
        let s = SampledSeries::from_fn(g, |_| 3.0);
        assert!((integrate(&s).unwrap() - 7.5).abs() < 1e-14);
    }

    #[test]
    fn sine_over_half_period() {
        let g = Grid::new(0.0, std::f64::consts::PI, 101).unwrap();
        let s = SampledSeries::from_fn(g, f64::sin);
        // composite Simpson error for sin on [0, π] is h⁴/90 to leading order: 1.0825e-8 here
        let h = g.step();
        let err = integrate(&s).unwrap() - 2.0;
        assert!((err - h.powi(4) / 90.0).abs() < 1e-3 * err);
        assert!(err.abs() < 1.1e-8);
    }

    #[test]
    fn exact_for_cubics() {
        let g = Grid::new(0.0, 1.0, 3).unwrap();
        let s = SampledSeries::from_fn(g, |t| t * t * t);
        assert_eq!(integrate(&s).unwrap(), 0.25);
    }

    #[test]
    fn even_length_is_usage_error() {
        let g = Grid::new(0.0, 1.0, 4).unwrap();
        let s = SampledSeries::from_fn(g, |t| t);
        assert!(matches!(integrate(&s), Err(Error::Usage(_))));
    }

    #[test]
    fn complex_samples() {
        let g = Grid::new(0.0, 1.0, 5).unwrap();
        let s = SampledSeries::from_fn(g, |t| Complex64::new(t, -2.0 * t));
        let v = integrate(&s).unwrap();
        assert!((v - Complex64::new(0.5, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn fourth_order_refinement() {
        let f = |t: f64| (3.0 * t).exp() * t.cos();
        let exact = {
            // antiderivative of e^{3t} cos t is e^{3t}(3 cos t + sin t)/10
            let fp = |t: f64| (3.0 * t).exp() * (3.0 * t.cos() + t.sin()) / 10.0;
            fp(1.0) - fp(0.0)
        };
        let mut errs = vec![];
        let mut n = 9;
        for _ in 0..4 {
            let g = Grid::new(0.0, 1.0, n).unwrap();
            errs.push((integrate(&SampledSeries::from_fn(g, f)).unwrap() - exact).abs());
            n = 2 * n - 1;
        }
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!(ratio > 14.0 && ratio < 18.0, "ratio {ratio}");
        }
    }

    proptest! {
        #[test]
        fn linearity(a in -5.0..5.0f64, b in -5.0..5.0f64, k in 1usize..30) {
            let g = Grid::new(-0.3, 2.1, 2 * k + 1).unwrap();
            let f = SampledSeries::from_fn(g, |t| (t * 1.7).sin() + t * t);
            let h = SampledSeries::from_fn(g, |t| (0.4 * t).exp());
            let combo = SampledSeries::from_fn(g, |t| a * ((t * 1.7).sin() + t * t) + b * (0.4 * t).exp());
            let lhs = integrate(&combo).unwrap();
            let rhs = a * integrate(&f).unwrap() + b * integrate(&h).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }
    }
}

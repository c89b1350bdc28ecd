//! Continuous quantum-nondemolition monitoring of a particle near the
//! surface of a gravitating body, modelled with restricted path integrals.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod oracle;
pub mod params;
pub mod propagator;
pub mod qd;
pub mod qnd;
pub mod quadrature;
pub mod record;
pub mod window;

pub use error::{Error, Result};
pub use params::{make_params, ParamOverrides, PhysicalParams, UnitRegime};
pub use qnd::{build_qnd_variable, QndVariable, SigmaChoice};
pub use record::{OutputRecord, RecordFamily};
pub use window::{Grid, MeasurementWindow, SampledSeries};
pub use num_complex::Complex64;

//! Box-counting dimension of planar spirals and of solution curves of the
//! damped oscillator `x' = y, y' = -x - h(t) y`.
//!
//! The pipeline is: describe the damping ([`DampingSpec`]), integrate a
//! solution ([`integrate`]), convert it to its spiral form `r = f(φ)`
//! ([`to_polar`]), then measure ε-neighbourhood areas or box counts over a
//! geometric ε ladder and fit the log-log slope ([`build_profile`],
//! [`fit_dimension`]). The [`theorems`] module turns the known analytic
//! results into checkable predictions.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod boxdim;
pub mod damping;
pub mod error;
pub mod numeric;
pub mod ode_sim;
pub mod pipeline;
pub mod polar_curve;
pub mod spiral_gen;
pub mod table;
pub mod theorems;

pub use boxdim::{
    box_count, build_profile, fit_dimension, fit_dimension_with, sausage_area, DimensionReport,
    FitModel, Method, ProfileEntry, SausageProfile, Verdict, WindowPolicy,
};
pub use damping::{AsymptoticFit, DampingKind, DampingSpec, TailCheck};
pub use error::{Error, Result};
pub use ode_sim::{integrate, Sample, SystemSpec, Tolerances, Trajectory};
pub use pipeline::{analyze_system, Analysis, AnalysisConfig};
pub use polar_curve::{to_polar, PolarCurve};
pub use spiral_gen::{generate, known_dimension, SpiralKind, SpiralSpec};
pub use table::{reproduce_table, TableRow};
pub use theorems::{Conclusion, Criterion, CriterionReport, Hypothesis, Rectifiability, Status};

/// Formats a float with 17 significant digits, enough to round-trip binary64.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

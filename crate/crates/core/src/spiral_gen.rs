//! Analytic spirals with known box dimension.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polar_curve::{PolarCurve, MAX_PHI_STEP};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpiralKind {
    /// `f = φ^(-α)`
    PowerSpiral { alpha: f64 },
    /// `f = scale · φ^(-α)`
    ScaledPowerSpiral { scale: f64, alpha: f64 },
    /// `f = exp(-rate · φ)`, a finite-length spiral.
    ExpSpiral { rate: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpiralSpec {
    pub kind: SpiralKind,
    pub phi1: f64,
    pub phi2: f64,
}

impl SpiralSpec {
    pub fn new(kind: SpiralKind, phi1: f64, phi2: f64) -> Result<Self> {
        let spec = SpiralSpec { kind, phi1, phi2 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn power(alpha: f64, phi1: f64, phi2: f64) -> Result<Self> {
        Self::new(SpiralKind::PowerSpiral { alpha }, phi1, phi2)
    }

    fn validate(&self) -> Result<()> {
        if !(self.phi1 > 0.0 && self.phi2 > self.phi1 && self.phi2.is_finite()) {
            return Err(Error::Spec(format!(
                "need 0 < phi1 < phi2, got [{}, {}]",
                self.phi1, self.phi2
            )));
        }
        let alpha = match self.kind {
            SpiralKind::PowerSpiral { alpha } => alpha,
            SpiralKind::ScaledPowerSpiral { scale, alpha } => {
                if !(scale > 0.0 && scale.is_finite()) {
                    return Err(Error::Spec(format!("scale must be positive, got {scale}")));
                }
                alpha
            }
            SpiralKind::ExpSpiral { rate } => {
                if !(rate > 0.0 && rate.is_finite()) {
                    return Err(Error::Spec(format!("rate must be positive, got {rate}")));
                }
                return Ok(());
            }
        };
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::Spec(format!("alpha must lie in (0, 1], got {alpha}")));
        }
        if alpha == 1.0 && self.phi1 <= 1.0 {
            return Err(Error::Spec("alpha = 1 requires phi1 > 1".into()));
        }
        Ok(())
    }

    pub fn alpha(&self) -> Option<f64> {
        match self.kind {
            SpiralKind::PowerSpiral { alpha } | SpiralKind::ScaledPowerSpiral { alpha, .. } => {
                Some(alpha)
            }
            SpiralKind::ExpSpiral { .. } => None,
        }
    }

    pub fn eval(&self, phi: f64) -> f64 {
        match self.kind {
            SpiralKind::PowerSpiral { alpha } => phi.powf(-alpha),
            SpiralKind::ScaledPowerSpiral { scale, alpha } => scale * phi.powf(-alpha),
            SpiralKind::ExpSpiral { rate } => (-rate * phi).exp(),
        }
    }

    /// `f'(φ)` in closed form.
    pub fn derivative(&self, phi: f64) -> f64 {
        match self.kind {
            SpiralKind::PowerSpiral { alpha } => -alpha * phi.powf(-alpha - 1.0),
            SpiralKind::ScaledPowerSpiral { scale, alpha } => -scale * alpha * phi.powf(-alpha - 1.0),
            SpiralKind::ExpSpiral { rate } => -rate * (-rate * phi).exp(),
        }
    }

    pub fn describe(&self) -> String {
        match self.kind {
            SpiralKind::PowerSpiral { alpha } => format!("power spiral alpha={alpha}"),
            SpiralKind::ScaledPowerSpiral { scale, alpha } => {
                format!("power spiral scale={scale} alpha={alpha}")
            }
            SpiralKind::ExpSpiral { rate } => format!("exponential spiral rate={rate}"),
        }
    }
}

/// Samples the spiral on a uniform grid from `phi1` to `phi2` with spacing at
/// most `grid_step`.
pub fn generate(spec: &SpiralSpec, grid_step: f64) -> Result<PolarCurve> {
    spec.validate()?;
    if !(grid_step > 0.0 && grid_step <= MAX_PHI_STEP * (1.0 + 1e-12)) {
        return Err(Error::Spec(format!("grid step must lie in (0, π/16], got {grid_step}")));
    }
    let span = spec.phi2 - spec.phi1;
    let n = (span / grid_step * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let phi: Vec<f64> = (0..=n)
        .map(|k| if k == n { spec.phi2 } else { spec.phi1 + span * k as f64 / n as f64 })
        .collect();
    let f = phi.iter().map(|&p| spec.eval(p)).collect();
    Ok(PolarCurve::new(phi, f, spec.describe())?.with_open_tail(true))
}

/// Default sampling step for generated spirals.
pub const DEFAULT_GRID_STEP: f64 = PI / 32.0;

/// Box dimension of the infinite spiral.
pub fn known_dimension(spec: &SpiralSpec) -> f64 {
    match spec.alpha() {
        Some(alpha) if alpha < 1.0 => 2.0 / (1.0 + alpha),
        _ => 1.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric;
    use approx::assert_relative_eq;

    #[test]
    fn power_spiral_first_sample() {
        let s = SpiralSpec::power(0.5, 2.0 * PI, 100.0 * PI).unwrap();
        let c = generate(&s, PI / 32.0).unwrap();
        assert_eq!(c.phi()[0], 2.0 * PI);
        assert_relative_eq!(c.f()[0], (2.0 * PI).powf(-0.5), max_relative = 1e-15);
        assert_eq!(c.phi_span().1, 100.0 * PI);
        assert!(c.monotone_certified() && c.open_tail());
        assert!(c.phi().windows(2).all(|w| w[1] - w[0] <= PI / 32.0 * (1.0 + 1e-9)));
        assert_eq!(c.len(), 3137);
    }

    #[test]
    fn known_dimensions() {
        let p = |a| SpiralSpec::power(a, 2.0 * PI, 10.0).unwrap();
        assert_relative_eq!(known_dimension(&p(0.5)), 4.0 / 3.0);
        assert_eq!(known_dimension(&p(1.0)), 1.0);
        let e = SpiralSpec::new(SpiralKind::ExpSpiral { rate: 0.1 }, 1.0, 50.0).unwrap();
        assert_eq!(known_dimension(&e), 1.0);
        for scale in [0.01, 1.0, 7.5] {
            let s = SpiralSpec::new(SpiralKind::ScaledPowerSpiral { scale, alpha: 0.3 }, 1.0, 9.0).unwrap();
            assert_eq!(known_dimension(&s), known_dimension(&p(0.3)));
        }
    }

    #[test]
    fn exp_spiral_length_matches_quadrature() {
        let spec = SpiralSpec::new(SpiralKind::ExpSpiral { rate: 0.1 }, 1.0, 150.0).unwrap();
        let c = generate(&spec, PI / 256.0).unwrap();
        let rate: f64 = 0.1;
        let exact = numeric::integrate(
            |p: f64| (-rate * p).exp() * (1.0 + rate * rate).sqrt(),
            1.0,
            150.0,
            1e-13,
            0.0,
        );
        assert!((c.total_length() - exact).abs() < 1e-4 * exact);
    }

    #[test]
    fn invalid_specs() {
        assert!(matches!(SpiralSpec::power(1.0, 1.0, 10.0), Err(Error::Spec(_))));
        assert!(matches!(SpiralSpec::power(1.5, 2.0, 10.0), Err(Error::Spec(_))));
        assert!(matches!(SpiralSpec::power(0.5, 2.0, 1.0), Err(Error::Spec(_))));
        let s = SpiralSpec::power(0.5, 2.0, 10.0).unwrap();
        assert!(matches!(generate(&s, 0.5), Err(Error::Spec(_))));
    }
}

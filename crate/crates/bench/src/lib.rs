//! Shared fixtures for the benchmarks.

use std::f64::consts::PI;

use spiraldim::ode_sim::DEFAULT_MAX_ANGLE_STEP;
use spiraldim::{
    generate, integrate, to_polar, DampingSpec, PolarCurve, Sample, SpiralSpec, SystemSpec,
    Tolerances, Trajectory,
};

/// `φ^-α` sampled from `2π` over `turns` turns.
pub fn power_spiral(alpha: f64, turns: f64) -> PolarCurve {
    let spec = SpiralSpec::power(alpha, 2.0 * PI, 2.0 * PI * (1.0 + turns)).expect("valid spiral");
    generate(&spec, PI / 32.0).expect("valid grid")
}

pub fn damped_system(lambda: f64) -> SystemSpec {
    SystemSpec::DampedOscillator(DampingSpec::power_law(lambda, 1.0, 1.0).expect("valid damping"))
}

/// Solution of `x'' + (λ/t) x' + x = 0` from `(1, 0)` at `t = 1`.
pub fn damped_trajectory(lambda: f64, t_end: f64) -> Trajectory {
    let start = Sample { t: 1.0, x: 1.0, y: 0.0 };
    integrate(&damped_system(lambda), start, t_end, Tolerances::default(), DEFAULT_MAX_ANGLE_STEP)
        .expect("integration succeeds")
}

pub fn damped_curve(lambda: f64, t_end: f64) -> PolarCurve {
    to_polar(&damped_trajectory(lambda, t_end), true).expect("spiral")
}

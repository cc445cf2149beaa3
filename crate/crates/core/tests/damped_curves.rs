use std::f64::consts::PI;

use spiraldim::pipeline::{simulate, AnalysisConfig};
use spiraldim::theorems::{
    check_derivative_criterion, check_spiral_criterion, validate_lemma_f_bound, Status,
};
use spiraldim::{
    build_profile, fit_dimension_with, generate, to_polar, DampingSpec, FitModel, Method,
    PolarCurve, SpiralSpec, SystemSpec, WindowPolicy,
};

fn damped_curve(lambda: f64, t_end: f64) -> (DampingSpec, PolarCurve) {
    let spec = DampingSpec::power_law(lambda, 1.0, 1.0).unwrap();
    let cfg = AnalysisConfig { t_end, ..AnalysisConfig::default() };
    let traj = simulate(&SystemSpec::DampedOscillator(spec.clone()), &cfg).unwrap();
    (spec, to_polar(&traj, true).unwrap())
}

#[test]
fn damped_curve_meets_spiral_criterion() {
    let (spec, curve) = damped_curve(1.0, 2e4);
    let alpha = spec.fit_alpha((20.0, 2e4), 64).unwrap().alpha;
    let r = check_spiral_criterion(&curve, alpha).unwrap();
    assert!(r.all_pass(), "{r:?}");
    assert!((r.predicted_dimension().unwrap() - 4.0 / 3.0).abs() < 1e-9);
    let a_bar = r.hypothesis("decrement_bound").unwrap().witness.unwrap();
    let (_, holds) = validate_lemma_f_bound(&curve, alpha, a_bar);
    assert!(holds);
    let d = check_derivative_criterion(&curve, alpha).unwrap();
    assert!(d.all_pass(), "{d:?}");
}

#[test]
fn ode_and_grid_derivatives_agree() {
    let (spec, curve) = damped_curve(4.0 / 3.0, 3e3);
    let exact = curve.ode_derivative(&spec).unwrap().unwrap();
    let grid = curve.grid_derivative();
    let scale = exact.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let n = exact.len();
    let worst = (1..n - 1).map(|i| (exact[i] - grid[i]).abs()).fold(0.0, f64::max);
    assert!(worst < 0.05 * scale, "{worst} vs {scale}");
}

#[test]
fn overstated_exponent_inflates_decrement_constant() {
    let (_, curve) = damped_curve(1.0, 2e4);
    // f decays like φ^(-1/2), so with α = 0.9 the scaled decrement grows like
    // φ^0.4 across the window instead of levelling off
    let good = check_spiral_criterion(&curve, 0.5).unwrap();
    let bad = check_spiral_criterion(&curve, 0.9).unwrap();
    let a = |r: &spiraldim::CriterionReport| r.hypothesis("decrement_bound").unwrap().witness.unwrap();
    assert!(a(&bad) > 10.0 * a(&good), "{} vs {}", a(&bad), a(&good));
    assert_eq!(bad.hypothesis("positive_decrement").unwrap().status, Status::Pass);
}

#[test]
fn passing_generator_spirals_estimate_close_to_prediction() {
    for alpha in [0.4, 0.6] {
        let c = generate(&SpiralSpec::power(alpha, 2.0 * PI, 8000.0 * PI).unwrap(), PI / 32.0).unwrap();
        let r = check_spiral_criterion(&c, alpha).unwrap();
        assert!(r.all_pass());
        let p = build_profile(&c, 0.1, 2e-4, Method::SausageGrid).unwrap();
        let fit = fit_dimension_with(&p, WindowPolicy::AutoPlateau, FitModel::HeadCorrected).unwrap();
        let want = r.predicted_dimension().unwrap();
        assert!((fit.dim_estimate - want).abs() <= 0.05, "α={alpha}: {} vs {want}", fit.dim_estimate);
    }
}

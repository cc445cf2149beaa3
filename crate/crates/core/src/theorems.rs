//! The analytic results as executable checks: dimension predictions from the
//! damping, a rectifiability classifier, and hypothesis checkers over
//! reconstructed spirals `r = f(φ)`.
//!
//! Every checker reports its hypotheses with a status and a fitted witness
//! constant. A conclusion is attached only when all hypotheses pass.

use std::collections::{BTreeMap, VecDeque};
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::damping::{integrate_from, tail_verdict, AsymptoticFit, DampingSpec};
use crate::error::{Error, Result};
use crate::numeric::{fit_line, log_space};
use crate::ode_sim::{rk4_propagate, SystemSpec, Trajectory};
use crate::polar_curve::PolarCurve;

/// Largest `sup |H - 2α log t - c|` accepted as a bounded remainder.
pub const DEFAULT_RESIDUAL_THRESHOLD: f64 = 0.5;
/// Fitted exponents this close to 1 take the dimension-one branch.
pub const ALPHA_ONE_TOL: f64 = 1e-3;
/// Largest log-log slope of `t h(t)` still read as bounded.
pub const TREND_LIMIT: f64 = 0.02;
/// Allowed positive excursion of `f'`, relative to `max f`.
pub const DERIVATIVE_SLACK: f64 = 1e-12;
/// A turn on which `max |f'|` stays below this fraction of `max f` counts as flat.
pub const FLAT_TURN_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// Rectifiability of every nontrivial solution via `∫ e^{-H/2}`.
    Rectifiability,
    /// `H = 2α log t + O(1)` with `0 < α < 1` gives dimension `2/(1+α)`.
    LogDampingDimension,
    /// `H = 2 log t + O(1)` gives dimension 1.
    CriticalDampingDimension,
    /// Bounds on `f`, its turn decrement and the arc length.
    SpiralCriterion,
    /// Bounds on `f` and `f'`.
    DerivativeCriterion,
    /// The `α = 1` version of the spiral criterion.
    DimensionOneCriterion,
    /// The `α = 1` version of the derivative criterion.
    DimensionOneDerivative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Status {
    Pass,
    Fail,
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub name: String,
    pub status: Status,
    pub witness: Option<f64>,
}

impl Hypothesis {
    fn new(name: &str, status: Status, witness: f64) -> Self {
        Hypothesis {
            name: name.to_string(),
            status,
            witness: witness.is_finite().then_some(witness),
        }
    }

    fn check(name: &str, ok: bool, witness: f64) -> Self {
        Self::new(name, if ok { Status::Pass } else { Status::Fail }, witness)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Rectifiability {
    Rectifiable,
    NonRectifiable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Conclusion {
    Dimension(f64),
    Rectifiability(Rectifiability),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub criterion: Criterion,
    pub hypotheses: Vec<Hypothesis>,
    pub conclusion: Option<Conclusion>,
    /// First winding angle used by curve checkers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analysis_start: Option<f64>,
    /// Auxiliary quantities that are not hypotheses.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub measured: BTreeMap<String, f64>,
}

impl CriterionReport {
    fn build(criterion: Criterion, hypotheses: Vec<Hypothesis>, conclusion: Conclusion) -> Self {
        let pass = hypotheses.iter().all(|h| h.status == Status::Pass);
        CriterionReport {
            criterion,
            hypotheses,
            conclusion: pass.then_some(conclusion),
            analysis_start: None,
            measured: BTreeMap::new(),
        }
    }

    fn measure(mut self, name: &str, value: f64) -> Self {
        if value.is_finite() {
            self.measured.insert(name.to_string(), value);
        }
        self
    }

    pub fn all_pass(&self) -> bool {
        self.hypotheses.iter().all(|h| h.status == Status::Pass)
    }

    pub fn hypothesis(&self, name: &str) -> Option<&Hypothesis> {
        self.hypotheses.iter().find(|h| h.name == name)
    }

    pub fn predicted_dimension(&self) -> Option<f64> {
        match self.conclusion {
            Some(Conclusion::Dimension(d)) => Some(d),
            _ => None,
        }
    }

    pub fn rectifiability(&self) -> Option<Rectifiability> {
        match self.conclusion {
            Some(Conclusion::Rectifiability(r)) => Some(r),
            _ => None,
        }
    }

    /// The conclusion as display text, `UNDETERMINED` when absent.
    pub fn outcome(&self) -> String {
        match self.conclusion {
            Some(Conclusion::Dimension(d)) => format!("{d}"),
            Some(Conclusion::Rectifiability(Rectifiability::Rectifiable)) => "RECTIFIABLE".into(),
            Some(Conclusion::Rectifiability(Rectifiability::NonRectifiable)) => {
                "NON_RECTIFIABLE".into()
            }
            None => "UNDETERMINED".into(),
        }
    }
}

fn hw_hypothesis(spec: &DampingSpec, t_max: f64) -> Hypothesis {
    match spec.check_hw_condition(t_max) {
        Ok(c) => Hypothesis::check("hw_integral_finite", c.converged, c.value),
        Err(_) => Hypothesis::new("hw_integral_finite", Status::Undetermined, f64::NAN),
    }
}

/// Dimension predicted from the asymptotics of `H`. The fit must come from
/// `spec.fit_alpha`.
pub fn predict_dimension(
    spec: &DampingSpec,
    fit: &AsymptoticFit,
    residual_threshold: f64,
) -> CriterionReport {
    let alpha = fit.alpha;
    let hi = fit.window.1;
    let critical = (alpha - 1.0).abs() <= ALPHA_ONE_TOL;
    let mut hyps = vec![hw_hypothesis(spec, hi)];
    let bounded = fit.residual_sup <= residual_threshold;
    hyps.push(Hypothesis::new(
        "log_asymptotics",
        if bounded { Status::Pass } else { Status::Undetermined },
        fit.residual_sup,
    ));
    if critical {
        hyps.push(Hypothesis::check("alpha_in_range", true, alpha));
        return CriterionReport::build(Criterion::CriticalDampingDimension, hyps, Conclusion::Dimension(1.0))
            .measure("alpha", alpha);
    }
    hyps.push(Hypothesis::check("alpha_in_range", alpha > 0.0 && alpha < 1.0, alpha));
    hyps.push(bounded_t_h(spec, hi));
    CriterionReport::build(
        Criterion::LogDampingDimension,
        hyps,
        Conclusion::Dimension(2.0 / (1.0 + alpha)),
    )
    .measure("alpha", alpha)
}

/// Probes `t h(t)` over the last two decades before `t_max` and accepts it as
/// bounded when its log-log trend is flat. The witness is the largest probe.
fn bounded_t_h(spec: &DampingSpec, t_max: f64) -> Hypothesis {
    let lo = (t_max / 100.0).max(spec.t0()).max(f64::MIN_POSITIVE);
    let probes: Option<Vec<(f64, f64)>> = log_space(lo, t_max, 32)
        .into_iter()
        .map(|t| spec.eval_h(t).ok().map(|h| (t, t * h)))
        .collect();
    let Some(probes) = probes.filter(|p| p.iter().all(|q| q.1 > 0.0) && t_max > lo) else {
        return Hypothesis::new("bounded_t_h", Status::Undetermined, f64::NAN);
    };
    let xs: Vec<f64> = probes.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = probes.iter().map(|p| p.1.ln()).collect();
    let peak = probes.iter().map(|p| p.1).fold(0.0, f64::max);
    match fit_line(&xs, &ys) {
        Some(line) => Hypothesis::check("bounded_t_h", line.slope <= TREND_LIMIT, peak),
        None => Hypothesis::new("bounded_t_h", Status::Undetermined, peak),
    }
}

/// Decides whether solutions have finite length from the convergence of
/// `∫ e^{-H/2}`, judged by the decay exponent of the integrand over the last
/// decade before `t_max`.
pub fn classify_rectifiability(spec: &DampingSpec, t_max: f64) -> CriterionReport {
    let t0 = spec.t0();
    if !(t_max > t0) || spec.eval_h(t_max).is_err() {
        let hyps = vec![
            Hypothesis::new("divergent_integral_h", Status::Undetermined, f64::NAN),
            Hypothesis::new("hw_integral_finite", Status::Undetermined, f64::NAN),
        ];
        return CriterionReport::build(
            Criterion::Rectifiability,
            hyps,
            Conclusion::Rectifiability(Rectifiability::NonRectifiable),
        );
    }
    let (p_h, h_converges) = tail_verdict(t0, t_max, |t| {
        let h = spec.h_unchecked(t);
        (h > 0.0).then(|| h.ln())
    });
    let hyps = vec![
        Hypothesis::check("divergent_integral_h", !h_converges, p_h),
        hw_hypothesis(spec, t_max),
    ];
    let big_h = |t: f64| spec.eval_H(t).unwrap_or(f64::INFINITY);
    let integral = integrate_from(t0, t_max, |t| (-0.5 * big_h(t)).exp());
    let (p, converges) = tail_verdict(t0, t_max, |t| Some(-0.5 * big_h(t)));
    let verdict = if converges {
        Rectifiability::Rectifiable
    } else {
        Rectifiability::NonRectifiable
    };
    CriterionReport::build(Criterion::Rectifiability, hyps, Conclusion::Rectifiability(verdict))
        .measure("integral_exp_half_h", integral)
        .measure("tail_exponent", p)
}

/// Index of the first sample at or beyond `max(φ_start, 2π)`, with a check
/// that at least three turns follow it.
fn analysis_window(curve: &PolarCurve) -> Result<usize> {
    let phi = curve.phi();
    let start = phi[0].max(2.0 * PI);
    let i = phi.partition_point(|&p| p < start);
    let end = curve.phi_span().1;
    if i >= phi.len() || end - phi[i] < 6.0 * PI {
        return Err(Error::Range(format!(
            "need three turns after phi = {start}, curve ends at {end}"
        )));
    }
    Ok(i)
}

struct CurveWitnesses {
    start: f64,
    min_decrement: f64,
    max_scaled_decrement: f64,
    max_length_ratio: f64,
}

/// Decrement and arc-length witnesses shared by the two spiral criteria.
/// `decrement_scale` and `length_scale` map `φ` to the normalising power.
fn curve_witnesses(
    curve: &PolarCurve,
    i0: usize,
    decrement_scale: impl Fn(f64) -> f64,
    length_scale: impl Fn(f64) -> f64,
) -> CurveWitnesses {
    let phi = curve.phi();
    let f = curve.f();
    let start = phi[i0];
    let end = curve.phi_span().1;
    let mut min_decrement = f64::INFINITY;
    let mut max_scaled = 0.0_f64;
    for i in i0..phi.len() {
        if phi[i] + 2.0 * PI > end {
            break;
        }
        let d = f[i] - curve.value_unchecked(phi[i] + 2.0 * PI);
        min_decrement = min_decrement.min(d);
        max_scaled = max_scaled.max(decrement_scale(phi[i]) * d);
    }
    let base = curve.arc_length(start, start).unwrap_or(0.0);
    let mut max_ratio = 0.0_f64;
    for &p in &phi[i0 + 1..] {
        let len = curve.arc_length(start, p).map(|l| l - base).unwrap_or(f64::NAN);
        max_ratio = max_ratio.max(len / length_scale(p));
    }
    CurveWitnesses {
        start,
        min_decrement,
        max_scaled_decrement: max_scaled,
        max_length_ratio: max_ratio,
    }
}

fn positive(x: f64) -> bool {
    x > 0.0 && x.is_finite()
}

fn check_alpha(alpha: f64, allow_one: bool) -> Result<()> {
    let ok = alpha > 0.0 && (alpha < 1.0 || (allow_one && alpha == 1.0));
    if ok {
        Ok(())
    } else {
        Err(Error::Spec(format!("alpha = {alpha} outside the admissible range")))
    }
}

/// Checks the three bounds of the spiral criterion for `0 < α < 1`:
/// `m̲ φ^-α ≤ f`, `0 < f(φ) - f(φ+2π) ≤ ā φ^(-α-1)` and
/// `length(φ_1, φ) ≤ M φ^(1-α)`.
pub fn check_spiral_criterion(curve: &PolarCurve, alpha: f64) -> Result<CriterionReport> {
    check_alpha(alpha, false)?;
    let i0 = analysis_window(curve)?;
    let w = curve_witnesses(curve, i0, |p| p.powf(alpha + 1.0), |p| p.powf(1.0 - alpha));
    let m_low = curve.phi()[i0..]
        .iter()
        .zip(&curve.f()[i0..])
        .map(|(p, f)| p.powf(alpha) * f)
        .fold(f64::INFINITY, f64::min);
    let hyps = vec![
        Hypothesis::check("monotone_certified", curve.monotone_certified(), f64::NAN),
        Hypothesis::check("lower_bound_f", positive(m_low), m_low),
        Hypothesis::check("positive_decrement", positive(w.min_decrement), w.min_decrement),
        Hypothesis::check(
            "decrement_bound",
            positive(w.max_scaled_decrement),
            w.max_scaled_decrement,
        ),
        Hypothesis::check("length_bound", positive(w.max_length_ratio), w.max_length_ratio),
    ];
    let mut report = CriterionReport::build(
        Criterion::SpiralCriterion,
        hyps,
        Conclusion::Dimension(2.0 / (1.0 + alpha)),
    );
    report.analysis_start = Some(w.start);
    Ok(report)
}

/// The `α = 1` spiral criterion: `f ≤ m̄ φ^-1`, positive turn decrement and
/// `length(φ_1, φ) ≤ M log φ`, with `φ_1 > 1`.
pub fn check_dimension_one_criterion(curve: &PolarCurve) -> Result<CriterionReport> {
    let i0 = analysis_window(curve)?;
    let w = curve_witnesses(curve, i0, |p| p * p, |p| p.ln());
    let m_high = upper_constant(curve, i0, 1.0);
    let hyps = vec![
        Hypothesis::check("start_exceeds_one", w.start > 1.0, w.start),
        Hypothesis::check("upper_bound_f", positive(m_high), m_high),
        Hypothesis::check("positive_decrement", positive(w.min_decrement), w.min_decrement),
        Hypothesis::check("length_bound", positive(w.max_length_ratio), w.max_length_ratio),
    ];
    let mut report =
        CriterionReport::build(Criterion::DimensionOneCriterion, hyps, Conclusion::Dimension(1.0))
            .measure("decrement_constant", w.max_scaled_decrement);
    report.analysis_start = Some(w.start);
    Ok(report)
}

fn upper_constant(curve: &PolarCurve, i0: usize, alpha: f64) -> f64 {
    curve.phi()[i0..]
        .iter()
        .zip(&curve.f()[i0..])
        .map(|(p, f)| p.powf(alpha) * f)
        .fold(0.0, f64::max)
}

/// Smallest value, over all windows `[φ_i, φ_i + 2π)` inside the curve, of
/// `max |f'|` on the window.
fn min_turn_peak(phi: &[f64], abs_df: &[f64], i0: usize) -> f64 {
    let end = *phi.last().unwrap();
    let mut window: VecDeque<usize> = VecDeque::new();
    let mut j = i0;
    let mut best = f64::INFINITY;
    for i in i0..phi.len() {
        if phi[i] + 2.0 * PI > end {
            break;
        }
        while j < phi.len() && phi[j] < phi[i] + 2.0 * PI {
            while window.back().is_some_and(|&k| abs_df[k] <= abs_df[j]) {
                window.pop_back();
            }
            window.push_back(j);
            j += 1;
        }
        while window.front().is_some_and(|&k| k < i) {
            window.pop_front();
        }
        if let Some(&k) = window.front() {
            best = best.min(abs_df[k]);
        }
    }
    best
}

/// Checks the derivative form of the criteria with `f'` from grid
/// differences. `α < 1` uses the lower bound `m̲ φ^-α ≤ f`, `α = 1` the
/// upper bound `f ≤ m̄ φ^-1`.
pub fn check_derivative_criterion(curve: &PolarCurve, alpha: f64) -> Result<CriterionReport> {
    check_alpha(alpha, true)?;
    let i0 = analysis_window(curve)?;
    let phi = curve.phi();
    let f = curve.f();
    let df = curve.grid_derivative();
    let f_max = f[i0..].iter().copied().fold(0.0, f64::max);
    let one = alpha == 1.0;

    let max_df = df[i0..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let abs_df: Vec<f64> = df.iter().map(|d| d.abs()).collect();
    let turn_peak = min_turn_peak(phi, &abs_df, i0);
    let k = phi[i0..]
        .iter()
        .zip(&df[i0..])
        .map(|(p, d)| -p.powf(alpha + 1.0) * d)
        .fold(f64::NEG_INFINITY, f64::max);

    let mut hyps = vec![
        Hypothesis::check("nonpositive_derivative", max_df <= DERIVATIVE_SLACK * f_max, max_df),
        Hypothesis::check(
            "derivative_nonzero_each_turn",
            turn_peak > FLAT_TURN_THRESHOLD * f_max,
            turn_peak,
        ),
        Hypothesis::check("derivative_bound", positive(k), k),
    ];
    let start = phi[i0];
    let (criterion, dim) = if one {
        let m_high = upper_constant(curve, i0, 1.0);
        hyps.insert(0, Hypothesis::check("start_exceeds_one", start > 1.0, start));
        hyps.push(Hypothesis::check("upper_bound_f", positive(m_high), m_high));
        (Criterion::DimensionOneDerivative, 1.0)
    } else {
        let m_low = phi[i0..]
            .iter()
            .zip(&f[i0..])
            .map(|(p, f)| p.powf(alpha) * f)
            .fold(f64::INFINITY, f64::min);
        hyps.push(Hypothesis::check("lower_bound_f", positive(m_low), m_low));
        (Criterion::DerivativeCriterion, 2.0 / (1.0 + alpha))
    };
    let mut report = CriterionReport::build(criterion, hyps, Conclusion::Dimension(dim));
    report.analysis_start = Some(start);
    Ok(report)
}

/// The explicit upper constant `m̄ = ā M_1 / (2πα)`, `M_1 = (1 + 2π/φ_1)^(α+1)`,
/// that follows from a decrement bound with constant `a_bar`, and whether
/// `f(φ) ≤ m̄ φ^-α` holds at every sample past the analysis start.
pub fn validate_lemma_f_bound(curve: &PolarCurve, alpha: f64, a_bar: f64) -> (f64, bool) {
    let phi = curve.phi();
    let start = phi[0].max(2.0 * PI);
    let i0 = phi.partition_point(|&p| p < start).min(phi.len() - 1);
    let phi1 = phi[i0];
    let m1 = (1.0 + 2.0 * PI / phi1).powf(alpha + 1.0);
    let m_bar = a_bar * m1 / (2.0 * PI * alpha);
    let holds = phi[i0..]
        .iter()
        .zip(&curve.f()[i0..])
        .all(|(p, f)| *f <= m_bar * p.powf(-alpha) * (1.0 + 1e-12));
    (m_bar, holds)
}

/// Step of the local finite-difference stencil.
const PROBE_STEP: f64 = 1e-2;

/// Compares `r'` and `θ'` from a fourth-order difference stencil against
/// `r' = -h r sin²θ` and `θ' = -1 - h sin(2θ)/2` at `n_probes` random
/// interior samples. The stencil values come from short RK4 runs started at
/// the sample state. Errors in `r'` are relative to `max(|r'|, h r)`, since
/// `r'` vanishes twice per turn. Returns `(max_rel_err_r, max_rel_err_theta)`.
pub fn validate_polar_odes(
    traj: &Trajectory,
    damping: &DampingSpec,
    n_probes: usize,
    seed: u64,
) -> (f64, f64) {
    let sys = SystemSpec::DampedOscillator(damping.clone());
    let samples = traj.samples();
    let (t_lo, t_hi) = traj.t_span();
    let lo = t_lo.max(damping.t0()) + 2.0 * PROBE_STEP;
    let hi = t_hi - 2.0 * PROBE_STEP;
    let candidates: Vec<usize> =
        (0..samples.len()).filter(|&i| samples[i].t >= lo && samples[i].t <= hi).collect();
    if candidates.is_empty() || n_probes == 0 {
        return (0.0, 0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut err_r = 0.0_f64;
    let mut err_theta = 0.0_f64;
    for _ in 0..n_probes {
        let s = samples[candidates[rng.gen_range(0..candidates.len())]];
        let state = [s.x, s.y];
        let theta0 = s.y.atan2(s.x);
        let at = |k: f64| {
            let p = rk4_propagate(&sys, s.t, state, k * PROBE_STEP, 8);
            let dtheta = (p[1] * s.x - p[0] * s.y).atan2(p[0] * s.x + p[1] * s.y);
            (p[0].hypot(p[1]), theta0 + dtheta)
        };
        let (r_m2, th_m2) = at(-2.0);
        let (r_m1, th_m1) = at(-1.0);
        let (r_p1, th_p1) = at(1.0);
        let (r_p2, th_p2) = at(2.0);
        let stencil = |m2: f64, m1: f64, p1: f64, p2: f64| {
            (m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * PROBE_STEP)
        };
        let dr = stencil(r_m2, r_m1, r_p1, r_p2);
        let dtheta = stencil(th_m2, th_m1, th_p1, th_p2);
        let r = s.radius();
        let h = damping.h_unchecked(s.t);
        let sin = theta0.sin();
        let exact_r = -h * r * sin * sin;
        let exact_theta = -1.0 - 0.5 * h * (2.0 * theta0).sin();
        let scale_r = exact_r.abs().max(h * r).max(f64::MIN_POSITIVE);
        err_r = err_r.max((dr - exact_r).abs() / scale_r);
        err_theta = err_theta.max((dtheta - exact_theta).abs() / exact_theta.abs());
    }
    (err_r, err_theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode_sim::{integrate, Sample, Tolerances, DEFAULT_MAX_ANGLE_STEP};
    use crate::spiral_gen::{generate, SpiralKind, SpiralSpec};
    use approx::assert_relative_eq;

    fn pl(l: f64, g: f64) -> DampingSpec {
        DampingSpec::power_law(l, g, 1.0).unwrap()
    }

    fn predict(spec: &DampingSpec) -> CriterionReport {
        let fit = spec.fit_alpha((1e2, 1e6), 64).unwrap();
        predict_dimension(spec, &fit, DEFAULT_RESIDUAL_THRESHOLD)
    }

    fn power(alpha: f64, phi2: f64) -> PolarCurve {
        generate(&SpiralSpec::power(alpha, 2.0 * PI, phi2).unwrap(), PI / 32.0).unwrap()
    }

    #[test]
    fn predicts_six_fifths_for_four_thirds() {
        let r = predict(&pl(4.0 / 3.0, 1.0));
        assert_eq!(r.criterion, Criterion::LogDampingDimension);
        assert!(r.all_pass(), "{r:?}");
        assert_relative_eq!(r.predicted_dimension().unwrap(), 1.2, max_relative = 1e-12);
    }

    #[test]
    fn critical_damping_predicts_one() {
        let r = predict(&pl(2.0, 1.0));
        assert_eq!(r.criterion, Criterion::CriticalDampingDimension);
        assert_eq!(r.predicted_dimension(), Some(1.0));
    }

    #[test]
    fn polynomial_growth_of_h_is_undetermined() {
        let r = predict(&pl(3.0, 0.75));
        assert_eq!(r.conclusion, None);
        assert_eq!(r.hypothesis("log_asymptotics").unwrap().status, Status::Undetermined);
        assert_eq!(r.outcome(), "UNDETERMINED");
    }

    #[test]
    fn prediction_matches_closed_form_across_lambda() {
        for k in 1..40 {
            let lambda = 2.0 * k as f64 / 40.0;
            let r = predict(&pl(lambda, 1.0));
            let d = r.predicted_dimension().unwrap();
            assert!((d - 4.0 / (2.0 + lambda)).abs() < 1e-9, "lambda {lambda}: {d}");
        }
    }

    #[test]
    fn bessel_damping_prediction() {
        for mu in [0.5, 1.0, 1.5] {
            let spec = DampingSpec::bessel_style(mu, 0.0, 1.0).unwrap();
            let d = predict(&spec).predicted_dimension().unwrap();
            assert!((d - 4.0 / (4.0 - mu)).abs() < 1e-9);
        }
    }

    #[test]
    fn rectifiability_examples() {
        let verdict = |l, g| classify_rectifiability(&pl(l, g), 1e6).rectifiability();
        assert_eq!(verdict(3.0, 1.0), Some(Rectifiability::Rectifiable));
        assert_eq!(verdict(3.0, 0.75), Some(Rectifiability::Rectifiable));
        for l in [2.0, 5.0 / 3.0, 4.0 / 3.0, 1.0] {
            assert_eq!(verdict(l, 1.0), Some(Rectifiability::NonRectifiable), "lambda {l}");
        }
    }

    #[test]
    fn summable_damping_fails_divergence_hypothesis() {
        let r = classify_rectifiability(&pl(1.0, 2.0), 1e6);
        assert_eq!(r.hypothesis("divergent_integral_h").unwrap().status, Status::Fail);
        assert_eq!(r.conclusion, None);
    }

    #[test]
    fn rectifiable_and_fractal_never_coexist() {
        for gamma in [0.6, 0.75, 0.9, 1.0] {
            for k in 1..=12 {
                let spec = pl(0.5 * k as f64, gamma);
                let rect = classify_rectifiability(&spec, 1e6).rectifiability();
                let dim = predict(&spec).predicted_dimension();
                assert!(
                    !(rect == Some(Rectifiability::Rectifiable) && dim.is_some_and(|d| d > 1.0)),
                    "gamma {gamma} lambda {}",
                    0.5 * k as f64
                );
            }
        }
    }

    #[test]
    fn report_json_shape() {
        let r = classify_rectifiability(&pl(3.0, 1.0), 1e6);
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        assert_eq!(v["criterion"], "rectifiability");
        assert_eq!(v["conclusion"], "RECTIFIABLE");
        assert_eq!(v["hypotheses"][0]["status"], "PASS");
        let d = serde_json::to_value(predict(&pl(1.0, 1.0))).unwrap();
        assert_relative_eq!(d["conclusion"].as_f64().unwrap(), 4.0 / 3.0, max_relative = 1e-12);
        let back: CriterionReport = serde_json::from_value(v).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn power_spiral_meets_spiral_criterion() {
        let r = check_spiral_criterion(&power(0.5, 2000.0 * PI), 0.5).unwrap();
        assert!(r.all_pass(), "{r:?}");
        assert_relative_eq!(r.hypothesis("lower_bound_f").unwrap().witness.unwrap(), 1.0, max_relative = 1e-9);
        let a_bar = r.hypothesis("decrement_bound").unwrap().witness.unwrap();
        assert!((a_bar - PI).abs() < 0.01 * PI, "{a_bar}");
        assert_relative_eq!(r.predicted_dimension().unwrap(), 4.0 / 3.0);
        assert_eq!(r.analysis_start, Some(2.0 * PI));
    }

    #[test]
    fn circle_has_no_decrement() {
        let phi: Vec<f64> = (0..=640).map(|k| 2.0 * PI + k as f64 * PI / 32.0).collect();
        let c = PolarCurve::new(phi.clone(), vec![1.0; phi.len()], "circle").unwrap();
        let r = check_spiral_criterion(&c, 0.5).unwrap();
        assert_eq!(r.hypothesis("positive_decrement").unwrap().status, Status::Fail);
        assert_eq!(r.conclusion, None);
    }

    #[test]
    fn short_curve_is_a_range_error() {
        let c = power(0.5, 7.0 * PI);
        assert!(matches!(check_spiral_criterion(&c, 0.5), Err(Error::Range(_))));
        assert!(matches!(check_derivative_criterion(&c, 0.5), Err(Error::Range(_))));
        assert!(matches!(check_spiral_criterion(&power(0.5, 100.0), 1.5), Err(Error::Spec(_))));
    }

    #[test]
    fn derivative_criterion_on_power_spirals() {
        let r = check_derivative_criterion(&power(0.5, 400.0 * PI), 0.5).unwrap();
        assert!(r.all_pass(), "{r:?}");
        assert_eq!(r.criterion, Criterion::DerivativeCriterion);
        let k = r.hypothesis("derivative_bound").unwrap().witness.unwrap();
        assert!((k - 0.5).abs() < 1e-3, "{k}");

        let r = check_derivative_criterion(&power(1.0, 400.0 * PI), 1.0).unwrap();
        assert!(r.all_pass(), "{r:?}");
        assert_eq!(r.criterion, Criterion::DimensionOneDerivative);
        assert_eq!(r.predicted_dimension(), Some(1.0));
        let k = r.hypothesis("derivative_bound").unwrap().witness.unwrap();
        assert!((k - 1.0).abs() < 1e-3, "{k}");
        assert_relative_eq!(r.hypothesis("upper_bound_f").unwrap().witness.unwrap(), 1.0, max_relative = 1e-9);
    }

    #[test]
    fn staircase_fails_flat_turn_check() {
        let phi: Vec<f64> = (0..=2000).map(|k| 2.0 * PI + k as f64 * PI / 32.0).collect();
        let f: Vec<f64> = phi
            .iter()
            .map(|&p| if (40.0..50.0).contains(&p) { 40f64.powf(-0.5) } else { p.powf(-0.5) })
            .collect();
        let c = PolarCurve::new(phi, f, "staircase").unwrap();
        let r = check_derivative_criterion(&c, 0.5).unwrap();
        let h = r.hypothesis("derivative_nonzero_each_turn").unwrap();
        assert_eq!(h.status, Status::Fail);
        assert_eq!(r.conclusion, None);
        assert_eq!(r.hypothesis("nonpositive_derivative").unwrap().status, Status::Pass);
    }

    #[test]
    fn derivative_verdict_is_scale_invariant() {
        for alpha in [0.3, 0.5, 0.8, 1.0] {
            let base = check_derivative_criterion(&power(alpha, 300.0), alpha).unwrap();
            for scale in [1e-6, 0.2, 40.0] {
                let kind = SpiralKind::ScaledPowerSpiral { scale, alpha };
                let c = generate(&SpiralSpec::new(kind, 2.0 * PI, 300.0).unwrap(), PI / 32.0).unwrap();
                let r = check_derivative_criterion(&c, alpha).unwrap();
                let st = |r: &CriterionReport| r.hypotheses.iter().map(|h| h.status).collect::<Vec<_>>();
                assert_eq!(st(&base), st(&r));
                let k0 = base.hypothesis("derivative_bound").unwrap().witness.unwrap();
                let k1 = r.hypothesis("derivative_bound").unwrap().witness.unwrap();
                assert_relative_eq!(k1, scale * k0, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn dimension_one_criterion_on_reciprocal_spiral() {
        let r = check_dimension_one_criterion(&power(1.0, 2000.0 * PI)).unwrap();
        assert!(r.all_pass(), "{r:?}");
        assert_eq!(r.predicted_dimension(), Some(1.0));
    }

    #[test]
    fn explicit_upper_constant_holds() {
        let c = power(0.5, 2000.0 * PI);
        let r = check_spiral_criterion(&c, 0.5).unwrap();
        let a_bar = r.hypothesis("decrement_bound").unwrap().witness.unwrap();
        let (m_bar, holds) = validate_lemma_f_bound(&c, 0.5, a_bar);
        assert!(holds);
        assert!(m_bar >= 1.0);
        // M_1 = 2^(3/2) at phi_1 = 2π
        assert_relative_eq!(m_bar, a_bar * 2f64.powf(1.5) / PI, max_relative = 1e-12);
        let (_, tight) = validate_lemma_f_bound(&c, 0.5, 0.1);
        assert!(!tight);
    }

    fn trajectory(spec: &DampingSpec, t_end: f64, tol: Tolerances) -> Trajectory {
        let sys = SystemSpec::DampedOscillator(spec.clone());
        integrate(&sys, Sample { t: 1.0, x: 1.0, y: 0.0 }, t_end, tol, DEFAULT_MAX_ANGLE_STEP).unwrap()
    }

    #[test]
    fn polar_identities_hold() {
        let spec = pl(2.0, 1.0);
        let tr = trajectory(&spec, 2e3, Tolerances::default());
        let (er, et) = validate_polar_odes(&tr, &spec, 1000, 0);
        assert!(er < 1e-5 && et < 1e-5, "{er} {et}");
        assert_eq!(validate_polar_odes(&tr, &spec, 50, 7), validate_polar_odes(&tr, &spec, 50, 7));
    }

    #[test]
    fn weak_damping_rotates_at_unit_speed() {
        let spec = pl(1e-9, 1.0);
        let tr = trajectory(&spec, 200.0, Tolerances::default());
        let (_, et) = validate_polar_odes(&tr, &spec, 200, 1);
        assert!(et < 1e-8, "{et}");
    }

    #[test]
    fn coarse_tolerance_still_close() {
        let spec = pl(1.0, 1.0);
        let tol = Tolerances { rel: 1e-3, abs: 1e-6 };
        let tr = trajectory(&spec, 500.0, tol);
        let (er, et) = validate_polar_odes(&tr, &spec, 300, 2);
        assert!(er < 1e-2 && et < 1e-2, "{er} {et}");
    }
}

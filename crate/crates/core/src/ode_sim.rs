//! Integration of the damped oscillator `x' = y, y' = -x - h(t) y` and of the
//! generalized Bessel system with an embedded Dormand–Prince 5(4) pair.
//!
//! Output samples are emitted from the continuous extension so that the polar
//! angle never moves by more than `max_angle_step` between consecutive
//! samples, independently of how large the accepted steps are.

use std::f64::consts::PI;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::damping::DampingSpec;
use crate::error::{Error, Result};
use crate::format_f64;

pub const DEFAULT_REL_TOL: f64 = 1e-9;
pub const DEFAULT_ABS_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ANGLE_STEP: f64 = PI / 16.0;

#[derive(Debug, Clone, PartialEq)]
pub enum SystemSpec {
    DampedOscillator(DampingSpec),
    /// `x' = y, y' = -(1 - nu²/t²) x - (2 - mu)/t y` on `t >= t0 > 0`.
    BesselSystem { mu: f64, nu: f64, t0: f64 },
}

impl SystemSpec {
    pub fn bessel(mu: f64, nu: f64, t0: f64) -> Result<Self> {
        if !(t0 > 0.0) {
            return Err(Error::Spec(format!("Bessel system needs t0 > 0, got {t0}")));
        }
        Ok(SystemSpec::BesselSystem { mu, nu, t0 })
    }

    pub fn domain_start(&self) -> f64 {
        match self {
            SystemSpec::DampedOscillator(d) => d.t0(),
            SystemSpec::BesselSystem { t0, .. } => *t0,
        }
    }

    /// The damping coefficient of the system viewed as `x'' + h x' + q x = 0`.
    pub fn damping(&self) -> Result<DampingSpec> {
        match self {
            SystemSpec::DampedOscillator(d) => Ok(d.clone()),
            SystemSpec::BesselSystem { mu, nu, t0 } => DampingSpec::bessel_style(*mu, *nu, *t0),
        }
    }

    /// Coefficients `(q, h)` of the companion matrix `[[0, 1], [-q, -h]]`.
    #[inline]
    fn coefficients(&self, t: f64) -> (f64, f64) {
        match self {
            SystemSpec::DampedOscillator(d) => (1.0, d.h_unchecked(t)),
            SystemSpec::BesselSystem { mu, nu, .. } => (1.0 - nu * nu / (t * t), (2.0 - mu) / t),
        }
    }

    #[inline]
    fn rhs(&self, t: f64, s: [f64; 2]) -> [f64; 2] {
        let (q, h) = self.coefficients(t);
        [s[1], -q * s[0] - h * s[1]]
    }

    fn matrix_norm(&self, t: f64) -> f64 {
        let (q, h) = self.coefficients(t);
        (1.0 + q * q + h * h).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub rel: f64,
    pub abs: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rel: DEFAULT_REL_TOL,
            abs: DEFAULT_ABS_TOL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

impl Sample {
    pub fn radius(&self) -> f64 {
        self.x.hypot(self.y)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
}

/// Time-ordered samples of a nontrivial solution.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    samples: Vec<Sample>,
    tolerances: Option<Tolerances>,
    max_angle_step: f64,
    stats: StepStats,
}

impl Trajectory {
    /// Wraps externally produced samples, checking the trajectory invariants.
    /// The angle-step bound is the largest observed one.
    pub fn from_samples(samples: Vec<Sample>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::Spec("trajectory needs at least two samples".into()));
        }
        for w in samples.windows(2) {
            if !(w[1].t > w[0].t) {
                return Err(Error::Spec(format!("time not increasing at t = {}", w[0].t)));
            }
        }
        if samples.iter().any(|s| s.x == 0.0 && s.y == 0.0) {
            return Err(Error::Origin);
        }
        let max_step = samples
            .windows(2)
            .map(|w| angle_diff(&w[0], &w[1]).abs())
            .fold(0.0, f64::max);
        if max_step >= PI / 2.0 {
            return Err(Error::Spec(format!(
                "angle step {max_step} between samples too large to unwrap"
            )));
        }
        Ok(Trajectory {
            samples,
            tolerances: None,
            max_angle_step: max_step,
            stats: StepStats::default(),
        })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn t_span(&self) -> (f64, f64) {
        (self.samples[0].t, self.samples.last().unwrap().t)
    }

    pub fn tolerances(&self) -> Option<Tolerances> {
        self.tolerances
    }

    pub fn max_angle_step(&self) -> f64 {
        self.max_angle_step
    }

    pub fn stats(&self) -> StepStats {
        self.stats
    }

    pub fn final_radius(&self) -> f64 {
        self.samples.last().unwrap().radius()
    }

    /// Polar angle `atan2(y, x)` made continuous along the samples.
    pub fn unwrapped_angles(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.samples.len());
        let mut theta = self.samples[0].y.atan2(self.samples[0].x);
        out.push(theta);
        for w in self.samples.windows(2) {
            theta += angle_diff(&w[0], &w[1]);
            out.push(theta);
        }
        out
    }

    /// Index of the first sample after which the polar angle is observed to
    /// decrease strictly, i.e. clockwise rotation holds to the end.
    pub fn monotone_onset(&self) -> usize {
        let mut onset = 0;
        for (i, w) in self.samples.windows(2).enumerate() {
            if angle_diff(&w[0], &w[1]) >= 0.0 {
                onset = i + 1;
            }
        }
        onset
    }

    /// Polyline length of the sampled curve in the phase plane.
    pub fn arc_length(&self) -> f64 {
        self.samples
            .windows(2)
            .map(|w| (w[1].x - w[0].x).hypot(w[1].y - w[0].y))
            .sum()
    }

    /// Writes `t,x,y` rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["t", "x", "y"])?;
        for s in &self.samples {
            wtr.write_record([format_f64(s.t), format_f64(s.x), format_f64(s.y)])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["t", "x", "y"] {
            return Err(Error::Parse(format!("expected header t,x,y, got {headers:?}")));
        }
        let mut samples = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let v = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::Parse(format!("bad trajectory row {rec:?}")))
            };
            samples.push(Sample {
                t: v(0)?,
                x: v(1)?,
                y: v(2)?,
            });
        }
        Self::from_samples(samples)
    }
}

/// Signed angle from `a` to `b` in `(-π, π]`.
#[inline]
pub(crate) fn angle_diff(a: &Sample, b: &Sample) -> f64 {
    let cross = a.x * b.y - a.y * b.x;
    let dot = a.x * b.x + a.y * b.y;
    cross.atan2(dot)
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[inline]
fn axpy(y: [f64; 2], terms: &[(f64, [f64; 2])], h: f64) -> [f64; 2] {
    let mut out = y;
    for (c, k) in terms {
        out[0] += h * c * k[0];
        out[1] += h * c * k[1];
    }
    out
}

struct Step {
    y1: [f64; 2],
    k7: [f64; 2],
    err: f64,
    dense: [[f64; 2]; 5],
}

fn dopri_step(sys: &SystemSpec, t: f64, y: [f64; 2], k1: [f64; 2], h: f64, tol: Tolerances) -> Step {
    let k2 = sys.rhs(t + C2 * h, axpy(y, &[(A21, k1)], h));
    let k3 = sys.rhs(t + C3 * h, axpy(y, &[(A31, k1), (A32, k2)], h));
    let k4 = sys.rhs(t + C4 * h, axpy(y, &[(A41, k1), (A42, k2), (A43, k3)], h));
    let k5 = sys.rhs(
        t + C5 * h,
        axpy(y, &[(A51, k1), (A52, k2), (A53, k3), (A54, k4)], h),
    );
    let k6 = sys.rhs(
        t + h,
        axpy(y, &[(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)], h),
    );
    let y1 = axpy(y, &[(A71, k1), (A73, k3), (A74, k4), (A75, k5), (A76, k6)], h);
    let k7 = sys.rhs(t + h, y1);
    let mut err = 0.0;
    for i in 0..2 {
        let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        let sc = tol.abs + tol.rel * y[i].abs().max(y1[i].abs());
        err += (e / sc).powi(2);
    }
    let err = (err / 2.0).sqrt();
    let mut dense = [[0.0; 2]; 5];
    for i in 0..2 {
        let dy = y1[i] - y[i];
        let bspl = h * k1[i] - dy;
        dense[0][i] = y[i];
        dense[1][i] = dy;
        dense[2][i] = bspl;
        dense[3][i] = dy - h * k7[i] - bspl;
        dense[4][i] = h
            * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
    }
    Step { y1, k7, err, dense }
}

#[inline]
fn dense_eval(d: &[[f64; 2]; 5], s: f64) -> [f64; 2] {
    let s1 = 1.0 - s;
    let mut out = [0.0; 2];
    for i in 0..2 {
        out[i] = d[0][i] + s * (d[1][i] + s1 * (d[2][i] + s * (d[3][i] + s1 * d[4][i])));
    }
    out
}

/// Integrates `sys` from `init` to `t_end`.
pub fn integrate(
    sys: &SystemSpec,
    init: Sample,
    t_end: f64,
    tol: Tolerances,
    max_angle_step: f64,
) -> Result<Trajectory> {
    if init.x == 0.0 && init.y == 0.0 {
        return Err(Error::Origin);
    }
    if !(init.t >= sys.domain_start()) {
        return Err(Error::Domain(format!(
            "initial time {} precedes domain start {}",
            init.t,
            sys.domain_start()
        )));
    }
    if !(t_end > init.t) {
        return Err(Error::Domain(format!("t_end = {t_end} must exceed t1 = {}", init.t)));
    }
    if let SystemSpec::DampedOscillator(d) = sys {
        if t_end > d.t_sup() {
            return Err(Error::Domain(format!("t_end = {t_end} beyond damping domain")));
        }
        // fail early on non-positive damping
        d.eval_h(init.t)?;
        d.eval_h(t_end)?;
    }
    if !(max_angle_step > 0.0 && max_angle_step < PI / 2.0) {
        return Err(Error::Spec(format!(
            "max_angle_step must lie in (0, π/2), got {max_angle_step}"
        )));
    }
    if !(tol.rel > 0.0 && tol.abs >= 0.0) {
        return Err(Error::Spec("tolerances must be positive".into()));
    }

    let mut t = init.t;
    let mut y = [init.x, init.y];
    let mut k1 = sys.rhs(t, y);
    let mut samples = vec![init];
    let mut stats = StepStats::default();
    let mut h = initial_step(sys, t, y, k1, tol).min(t_end - t);
    let mut last_err: f64 = 1e-4;

    while t < t_end {
        let min_step = 1e-13 * t.abs().max(1.0);
        if h < min_step {
            return Err(Error::Stiffness { t, step: h });
        }
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }
        let step = dopri_step(sys, t, y, k1, h, tol);
        if !step.err.is_finite() || step.err > 1.0 {
            stats.rejected += 1;
            let fac = if step.err.is_finite() {
                (0.9 * step.err.powf(-0.2)).max(0.2)
            } else {
                0.1
            };
            h *= fac;
            continue;
        }
        stats.accepted += 1;
        let t_next = if last { t_end } else { t + h };
        emit(sys, t, t_next, &step.dense, max_angle_step, &mut samples);
        t = t_next;
        y = step.y1;
        k1 = step.k7;
        if y[0] == 0.0 && y[1] == 0.0 {
            return Err(Error::Origin);
        }
        // PI step-size control
        let err = step.err.max(1e-10);
        let fac = (0.9 * err.powf(-0.7 / 5.0) * last_err.powf(0.4 / 5.0)).clamp(0.2, 10.0);
        last_err = err;
        h *= fac;
        if !last && t + h > t_end {
            h = t_end - t;
        }
    }
    Ok(Trajectory {
        samples,
        tolerances: Some(tol),
        max_angle_step,
        stats,
    })
}

fn initial_step(sys: &SystemSpec, t: f64, y: [f64; 2], f0: [f64; 2], tol: Tolerances) -> f64 {
    let sc = |i: usize| tol.abs + tol.rel * y[i].abs();
    let d0 = ((y[0] / sc(0)).powi(2) + (y[1] / sc(1)).powi(2)).sqrt();
    let d1 = ((f0[0] / sc(0)).powi(2) + (f0[1] / sc(1)).powi(2)).sqrt();
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let y1 = axpy(y, &[(1.0, f0)], h0);
    let f1 = sys.rhs(t + h0, y1);
    let d2 = (((f1[0] - f0[0]) / sc(0)).powi(2) + ((f1[1] - f0[1]) / sc(1)).powi(2)).sqrt() / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(1.0)
}

/// Appends dense-output samples on `(t0, t1]` such that consecutive samples
/// differ in polar angle by at most `max_angle_step`.
fn emit(
    sys: &SystemSpec,
    t0: f64,
    t1: f64,
    dense: &[[f64; 2]; 5],
    max_angle_step: f64,
    samples: &mut Vec<Sample>,
) {
    let h = t1 - t0;
    let rate = sys
        .matrix_norm(t0)
        .max(sys.matrix_norm(t1))
        .max(sys.matrix_norm(0.5 * (t0 + t1)));
    let mut pieces = ((1.25 * rate * h / max_angle_step).ceil() as usize).max(1);
    loop {
        let start = samples.len();
        let mut ok = true;
        for j in 1..=pieces {
            let s = j as f64 / pieces as f64;
            let (t, st) = if j == pieces {
                (t1, dense_eval(dense, 1.0))
            } else {
                (t0 + s * h, dense_eval(dense, s))
            };
            let sample = Sample { t, x: st[0], y: st[1] };
            if angle_diff(samples.last().unwrap(), &sample).abs() > max_angle_step {
                ok = false;
                break;
            }
            samples.push(sample);
        }
        if ok || pieces > 1 << 20 {
            break;
        }
        samples.truncate(start);
        pieces *= 2;
    }
}

/// Estimate of the constant in `r² = e^{-H} (C + δ(t))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyEstimate {
    pub c_estimate: f64,
    pub delta_sup_tail: f64,
}

/// Tracks `e^{H(t)} r(t)²` along the samples; `C` is its final value and the
/// tail deviation is measured over the last quarter of the samples.
pub fn energy_constant(traj: &Trajectory, damping: &DampingSpec) -> Result<EnergyEstimate> {
    let values = traj
        .samples()
        .iter()
        .map(|s| Ok(damping.eval_H(s.t)?.exp() * (s.x * s.x + s.y * s.y)))
        .collect::<Result<Vec<f64>>>()?;
    let c = *values.last().unwrap();
    let tail = &values[values.len() * 3 / 4..];
    let delta = tail.iter().map(|v| (v - c).abs()).fold(0.0, f64::max);
    Ok(EnergyEstimate {
        c_estimate: c,
        delta_sup_tail: delta,
    })
}

/// Classical RK4 propagation used for short local probes.
pub(crate) fn rk4_propagate(sys: &SystemSpec, t: f64, y: [f64; 2], dt: f64, steps: usize) -> [f64; 2] {
    let h = dt / steps as f64;
    let mut y = y;
    let mut t = t;
    for _ in 0..steps {
        let k1 = sys.rhs(t, y);
        let k2 = sys.rhs(t + 0.5 * h, axpy(y, &[(0.5, k1)], h));
        let k3 = sys.rhs(t + 0.5 * h, axpy(y, &[(0.5, k2)], h));
        let k4 = sys.rhs(t + h, axpy(y, &[(1.0, k3)], h));
        y = axpy(y, &[(1.0 / 6.0, k1), (1.0 / 3.0, k2), (1.0 / 3.0, k3), (1.0 / 6.0, k4)], h);
        t += h;
    }
    y
}

//! Spiral normal form `r = f(φ)` of a clockwise-rotating trajectory.
//!
//! The winding angle is `φ = -θ` with `θ` the unwrapped polar angle, so `φ`
//! increases along the curve. Geometry is available in either orientation:
//! the trajectory's own (clockwise) one, or the mirror image
//! `(f cos φ, f sin φ)`, which is congruent and therefore has the same
//! length, diameter and box dimension.

use std::f64::consts::PI;
use std::io::{Read, Write};

use crate::damping::DampingSpec;
use crate::error::{Error, Result};
use crate::format_f64;
use crate::numeric::{self, Pchip};
use crate::ode_sim::Trajectory;

/// Largest grid spacing used by [`to_polar`].
pub const MAX_PHI_STEP: f64 = PI / 16.0;
/// Rotation rate threshold (`θ' < -0.1`) for certified spiral rotation.
pub const ROTATION_THRESHOLD: f64 = -0.1;
/// Full turns of certified rotation required before accepting a spiral.
pub const CERTIFIED_TURNS: f64 = 4.0;

pub type Point = [f64; 2];

#[derive(Debug, Clone, PartialEq)]
pub struct PolarCurve {
    phi: Vec<f64>,
    f: Vec<f64>,
    cum_len: Vec<f64>,
    times: Option<Vec<f64>>,
    source: String,
    monotone_certified: bool,
    clockwise: bool,
    open_tail: bool,
}

impl PolarCurve {
    /// Builds a curve from samples; `phi` strictly increasing, `f > 0`.
    ///
    /// The result is a closed-off piece: no tail is assumed beyond the last
    /// sample (see [`PolarCurve::with_open_tail`]).
    pub fn new(phi: Vec<f64>, f: Vec<f64>, source: impl Into<String>) -> Result<Self> {
        if phi.len() < 2 || phi.len() != f.len() {
            return Err(Error::Spec("polar curve needs at least two (phi, f) samples".into()));
        }
        if phi.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Spec("phi must be strictly increasing".into()));
        }
        if let Some(v) = f.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::Spec(format!("f must be positive and finite, found {v}")));
        }
        let f_max = f.iter().cloned().fold(0.0, f64::max);
        let slack = 1e-12 * f_max.max(1.0);
        let monotone_certified = f.windows(2).all(|w| w[1] <= w[0] + slack);
        let mut curve = PolarCurve {
            phi,
            f,
            cum_len: Vec::new(),
            times: None,
            source: source.into(),
            monotone_certified,
            clockwise: false,
            open_tail: false,
        };
        curve.cum_len = curve.cumulative_length();
        Ok(curve)
    }

    /// Marks whether the curve continues spiralling into the origin past its
    /// last sample (true for generated spirals and converted trajectories).
    pub fn with_open_tail(mut self, open: bool) -> Self {
        self.open_tail = open;
        self
    }

    fn with_orientation(mut self, clockwise: bool) -> Self {
        self.clockwise = clockwise;
        self
    }

    fn cumulative_length(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.phi.len());
        let mut acc = 0.0;
        out.push(0.0);
        for i in 1..self.phi.len() {
            let (a, b) = (self.point(i - 1), self.point(i));
            acc += (b[0] - a[0]).hypot(b[1] - a[1]);
            out.push(acc);
        }
        out
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn f(&self) -> &[f64] {
        &self.f
    }

    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    pub fn phi_span(&self) -> (f64, f64) {
        (self.phi[0], *self.phi.last().unwrap())
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn monotone_certified(&self) -> bool {
        self.monotone_certified
    }

    /// True when the points follow the trajectory's own clockwise orientation.
    pub fn clockwise(&self) -> bool {
        self.clockwise
    }

    pub fn open_tail(&self) -> bool {
        self.open_tail
    }

    /// Trajectory times of the samples, when converted from a trajectory.
    pub fn times(&self) -> Option<&[f64]> {
        self.times.as_deref()
    }

    pub fn f_end(&self) -> f64 {
        *self.f.last().unwrap()
    }

    /// Number of full turns covered.
    pub fn turns(&self) -> f64 {
        let (a, b) = self.phi_span();
        (b - a) / (2.0 * PI)
    }

    #[inline]
    pub fn point(&self, i: usize) -> Point {
        let (s, c) = self.phi[i].sin_cos();
        let sign = if self.clockwise { -1.0 } else { 1.0 };
        [self.f[i] * c, sign * self.f[i] * s]
    }

    pub fn points(&self) -> Vec<Point> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// Polar angle of a point of this curve at winding angle `phi`.
    #[inline]
    pub(crate) fn orientation_sign(&self) -> f64 {
        if self.clockwise {
            -1.0
        } else {
            1.0
        }
    }

    fn check_range(&self, phi: f64) -> Result<()> {
        let (a, b) = self.phi_span();
        let tol = 1e-12 * (1.0 + b.abs());
        if phi < a - tol || phi > b + tol {
            return Err(Error::Range(format!("phi = {phi} outside [{a}, {b}]")));
        }
        Ok(())
    }

    fn segment_index(&self, phi: f64) -> usize {
        let n = self.phi.len();
        self.phi.partition_point(|&p| p <= phi).clamp(1, n - 1) - 1
    }

    /// Monotone cubic interpolation of `f` at `phi`.
    pub fn value_at(&self, phi: f64) -> Result<f64> {
        self.check_range(phi)?;
        Ok(self.value_unchecked(phi))
    }

    pub(crate) fn value_unchecked(&self, phi: f64) -> f64 {
        let i = self.segment_index(phi);
        let n = self.phi.len();
        let slope = |k: usize| -> f64 {
            let (x, y) = (&self.phi, &self.f);
            if n == 2 {
                return (y[1] - y[0]) / (x[1] - x[0]);
            }
            if k == 0 {
                numeric::end_slope(
                    x[1] - x[0],
                    x[2] - x[1],
                    (y[1] - y[0]) / (x[1] - x[0]),
                    (y[2] - y[1]) / (x[2] - x[1]),
                )
            } else if k == n - 1 {
                numeric::end_slope(
                    x[k] - x[k - 1],
                    x[k - 1] - x[k - 2],
                    (y[k] - y[k - 1]) / (x[k] - x[k - 1]),
                    (y[k - 1] - y[k - 2]) / (x[k - 1] - x[k - 2]),
                )
            } else {
                numeric::interior_slope(
                    x[k] - x[k - 1],
                    x[k + 1] - x[k],
                    (y[k] - y[k - 1]) / (x[k] - x[k - 1]),
                    (y[k + 1] - y[k]) / (x[k + 1] - x[k]),
                )
            }
        };
        numeric::hermite(
            self.phi[i],
            self.phi[i + 1],
            self.f[i],
            self.f[i + 1],
            slope(i),
            slope(i + 1),
            phi,
        )
        .0
    }

    /// Point on the polyline at winding angle `phi` (linear along the chord).
    fn polyline_point(&self, phi: f64) -> (usize, f64) {
        let i = self.segment_index(phi);
        let u = ((phi - self.phi[i]) / (self.phi[i + 1] - self.phi[i])).clamp(0.0, 1.0);
        (i, u)
    }

    fn length_to(&self, phi: f64) -> f64 {
        let (i, u) = self.polyline_point(phi);
        let seg = self.cum_len[i + 1] - self.cum_len[i];
        self.cum_len[i] + u * seg
    }

    /// Polyline length of the curve between winding angles `phi_a <= phi_b`.
    pub fn arc_length(&self, phi_a: f64, phi_b: f64) -> Result<f64> {
        self.check_range(phi_a)?;
        self.check_range(phi_b)?;
        if phi_b < phi_a {
            return Err(Error::Range(format!("phi_a = {phi_a} exceeds phi_b = {phi_b}")));
        }
        Ok((self.length_to(phi_b) - self.length_to(phi_a)).max(0.0))
    }

    pub fn total_length(&self) -> f64 {
        *self.cum_len.last().unwrap()
    }

    /// `f(φ) - f(φ + 2π)`.
    pub fn turn_decrement(&self, phi: f64) -> Result<f64> {
        self.check_range(phi)?;
        self.check_range(phi + 2.0 * PI)?;
        Ok(self.value_unchecked(phi) - self.value_unchecked(phi + 2.0 * PI))
    }

    /// Largest distance between two sample points.
    pub fn diameter(&self) -> f64 {
        diameter(&self.points())
    }

    /// `f'` by central differences on the sample grid (one-sided at the ends).
    pub fn grid_derivative(&self) -> Vec<f64> {
        let (x, y) = (&self.phi, &self.f);
        let n = x.len();
        (0..n)
            .map(|i| {
                let (a, b) = match i {
                    0 => (0, 1),
                    i if i == n - 1 => (n - 2, n - 1),
                    i => (i - 1, i + 1),
                };
                (y[b] - y[a]) / (x[b] - x[a])
            })
            .collect()
    }

    /// `f'(φ) = -r'/θ'` evaluated from the damped-oscillator vector field at
    /// each sample; available for curves converted from trajectories.
    pub fn ode_derivative(&self, damping: &DampingSpec) -> Option<Result<Vec<f64>>> {
        let times = self.times.as_ref()?;
        Some(
            times
                .iter()
                .zip(self.phi.iter().zip(&self.f))
                .map(|(&t, (&phi, &r))| {
                    let h = damping.eval_h(t)?;
                    let theta = -phi;
                    let s = theta.sin();
                    let dr = -h * r * s * s;
                    let dtheta = -1.0 - 0.5 * h * (2.0 * theta).sin();
                    Ok(-dr / dtheta)
                })
                .collect(),
        )
    }

    /// Writes `phi,f` rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["phi", "f"])?;
        for (p, v) in self.phi.iter().zip(&self.f) {
            wtr.write_record([format_f64(*p), format_f64(*v)])?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Reads a `phi,f` CSV. Imported curves are treated as spirals that
    /// continue into the origin.
    pub fn read_csv<R: Read>(r: R, source: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["phi", "f"] {
            return Err(Error::Parse(format!("expected header phi,f, got {headers:?}")));
        }
        let (mut phi, mut f) = (Vec::new(), Vec::new());
        for rec in rdr.records() {
            let rec = rec?;
            let v = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::Parse(format!("bad curve row {rec:?}")))
            };
            phi.push(v(0)?);
            f.push(v(1)?);
        }
        Ok(Self::new(phi, f, source)?.with_open_tail(true))
    }
}

/// Converts a trajectory into its spiral normal form.
///
/// The leading part of the trajectory before certified clockwise rotation is
/// dropped; `f` is resampled on a uniform `φ` grid of spacing at most
/// [`MAX_PHI_STEP`]. With `mirror` the points are `(f cos φ, f sin φ)`, the
/// reflection `(x, -y)` of the trajectory; otherwise they follow the
/// trajectory itself.
pub fn to_polar(traj: &Trajectory, mirror: bool) -> Result<PolarCurve> {
    to_polar_with_step(traj, mirror, MAX_PHI_STEP)
}

pub fn to_polar_with_step(traj: &Trajectory, mirror: bool, max_step: f64) -> Result<PolarCurve> {
    if !(max_step > 0.0 && max_step <= MAX_PHI_STEP) {
        return Err(Error::Spec(format!("phi grid step must lie in (0, π/16], got {max_step}")));
    }
    if traj.max_angle_step() >= PI / 2.0 {
        return Err(Error::Spec("trajectory angle step too large to unwrap".into()));
    }
    let samples = traj.samples();
    let theta = traj.unwrapped_angles();
    let onset = certified_onset(traj, &theta);
    let turns = (theta[onset] - theta.last().unwrap()) / (2.0 * PI);
    if turns < CERTIFIED_TURNS {
        return Err(Error::NotSpiral(format!(
            "only {turns:.2} turns of certified clockwise rotation (need {CERTIFIED_TURNS})"
        )));
    }
    let phi_raw: Vec<f64> = theta[onset..].iter().map(|t| -t).collect();
    let r_raw: Vec<f64> = samples[onset..].iter().map(|s| s.radius()).collect();
    let t_raw: Vec<f64> = samples[onset..].iter().map(|s| s.t).collect();
    let (p0, p1) = (phi_raw[0], *phi_raw.last().unwrap());
    let n = ((p1 - p0) / max_step).ceil().max(1.0) as usize;
    let step = (p1 - p0) / n as f64;
    let grid: Vec<f64> = (0..=n)
        .map(|k| if k == n { p1 } else { p0 + step * k as f64 })
        .collect();
    let f_interp = Pchip::new(phi_raw.clone(), r_raw);
    let t_interp = Pchip::new(phi_raw, t_raw);
    let f: Vec<f64> = grid.iter().map(|&p| f_interp.eval(p)).collect();
    let times: Vec<f64> = grid.iter().map(|&p| t_interp.eval(p)).collect();
    let source = format!("trajectory t=[{}, {}]", samples[onset].t, samples.last().unwrap().t);
    let mut curve = PolarCurve::new(grid, f, source)?
        .with_open_tail(true)
        .with_orientation(!mirror);
    curve.cum_len = curve.cumulative_length();
    curve.times = Some(times);
    Ok(curve)
}

/// First sample index after which every difference quotient of `θ` stays
/// below the rotation threshold.
fn certified_onset(traj: &Trajectory, theta: &[f64]) -> usize {
    let s = traj.samples();
    let mut onset = 0;
    for i in 0..s.len() - 1 {
        let rate = (theta[i + 1] - theta[i]) / (s[i + 1].t - s[i].t);
        if !(rate < ROTATION_THRESHOLD) {
            onset = i + 1;
        }
    }
    onset
}

/// Exact diameter of a point set: brute force for small inputs, rotating
/// calipers on the convex hull otherwise.
pub fn diameter(points: &[Point]) -> f64 {
    if points.len() <= 10_000 {
        let mut best: f64 = 0.0;
        for (i, a) in points.iter().enumerate() {
            for b in &points[i + 1..] {
                best = best.max((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2));
            }
        }
        return best.sqrt();
    }
    let hull = convex_hull(points);
    rotating_calipers(&hull)
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Andrew's monotone chain; counterclockwise, no repeated endpoint.
pub(crate) fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Point> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

fn rotating_calipers(hull: &[Point]) -> f64 {
    let d2 = |a: Point, b: Point| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
    match hull.len() {
        0 | 1 => return 0.0,
        2 => return d2(hull[0], hull[1]).sqrt(),
        _ => {}
    }
    let n = hull.len();
    let mut j = 1;
    let mut best: f64 = 0.0;
    for i in 0..n {
        let ni = (i + 1) % n;
        while cross(hull[i], hull[ni], hull[(j + 1) % n]).abs()
            > cross(hull[i], hull[ni], hull[j]).abs()
        {
            j = (j + 1) % n;
        }
        best = best.max(d2(hull[i], hull[j])).max(d2(hull[ni], hull[j]));
    }
    best.sqrt()
}

//! Box-dimension estimation from ε-neighbourhood areas and box counts.
//!
//! Curves that spiral into the origin are measured as infinite objects. For a
//! given ε the innermost stretch of the tracked curve where consecutive turns
//! are at most ε/2 apart radially is replaced by the filled region bounded by
//! its first turn: every point of that region lies within ε/4 of the curve,
//! and every point of the untracked tail lies inside it. A disk of radius
//! `max(f_end, ε) + ε` around the origin is added on top.

use std::f64::consts::PI;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format_f64;
use crate::numeric::fit_line;
use crate::polar_curve::{PolarCurve, Point};

/// Grid spacing for area rasterization, as a fraction of ε.
pub const DEFAULT_GRID_FACTOR: f64 = 1.0 / 8.0;
/// Upper limit on individually tested grid cells per measurement.
pub const MAX_CELLS: u64 = 400_000_000;
/// Minimum number of ladder rungs in a fit window.
pub const MIN_FIT_POINTS: usize = 5;
/// Largest accepted ratio between `eps_min` and the last power-of-two rung
/// for `eps_min` to be appended as an extra rung.
const TERMINAL_RUNG_RATIO: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    SausageGrid,
    BoxCount,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::SausageGrid => "SausageGrid",
            Method::BoxCount => "BoxCount",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "sausagegrid" | "sausage" => Ok(Method::SausageGrid),
            "boxcount" | "box" => Ok(Method::BoxCount),
            _ => Err(Error::Parse(format!("unknown method {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WindowPolicy {
    FullRange,
    AutoPlateau,
}

impl FromStr for WindowPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "fullrange" | "full" => Ok(WindowPolicy::FullRange),
            "autoplateau" | "auto" => Ok(WindowPolicy::AutoPlateau),
            _ => Err(Error::Parse(format!("unknown window policy {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileEntry {
    pub epsilon: f64,
    /// Neighbourhood area, or the box count for [`Method::BoxCount`].
    pub area: f64,
    pub method: Method,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SausageProfile {
    pub entries: Vec<ProfileEntry>,
    pub curve_ref: String,
    pub nucleus_radius: f64,
}

impl SausageProfile {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["epsilon", "area", "method"])?;
        for e in &self.entries {
            wtr.write_record([format_f64(e.epsilon), format_f64(e.area), e.method.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R, curve_ref: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let mut entries = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let bad = || Error::Parse(format!("bad profile row {rec:?}"));
            let num = |i: usize| rec.get(i).and_then(|s| s.parse::<f64>().ok()).ok_or_else(bad);
            entries.push(ProfileEntry {
                epsilon: num(0)?,
                area: num(1)?,
                method: rec.get(2).ok_or_else(bad)?.parse()?,
            });
        }
        Ok(SausageProfile { entries, curve_ref: curve_ref.into(), nucleus_radius: 0.0 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Match,
    Mismatch,
    NoPrediction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionReport {
    pub dim_estimate: f64,
    /// Unclamped estimate from the regression slope.
    pub raw_estimate: f64,
    pub stderr: f64,
    pub fit_window: (f64, f64),
    pub n_points: usize,
    pub r_squared: f64,
    pub method: Method,
    pub model: FitModel,
    pub window_policy: WindowPolicy,
    pub predicted: Option<f64>,
    pub verdict: Option<Verdict>,
}

impl DimensionReport {
    /// Attaches an analytic prediction and a verdict at the given tolerance.
    pub fn with_prediction(mut self, predicted: Option<f64>, tol: f64) -> Self {
        self.predicted = predicted;
        self.verdict = Some(match predicted {
            None => Verdict::NoPrediction,
            Some(p) if (self.dim_estimate - p).abs() <= tol => Verdict::Match,
            Some(_) => Verdict::Mismatch,
        });
        self
    }
}

/// Per-curve precomputation shared by all ε rungs.
struct Prepared<'a> {
    curve: &'a PolarCurve,
    points: Vec<Point>,
    /// `suffix[i] = max_{j >= i} (f(φ_j) - f(φ_j + 2π))` over samples with a
    /// full turn after them.
    suffix: Vec<f64>,
}

/// Filled innermost turn `{ρ <= f(φ')}` for `φ'` in one turn `[φ_c, φ_c + 2π)`.
struct FilledTurn<'a> {
    phi: &'a [f64],
    f: &'a [f64],
    phi_c: f64,
    f_max2: f64,
    sign: f64,
}

impl FilledTurn<'_> {
    fn contains(&self, p: Point) -> bool {
        let r2 = p[0] * p[0] + p[1] * p[1];
        if r2 > self.f_max2 {
            return false;
        }
        let a = self.sign * p[1].atan2(p[0]);
        let phi = self.phi_c + (a - self.phi_c).rem_euclid(2.0 * PI);
        let k = self.phi.partition_point(|&v| v <= phi).clamp(1, self.phi.len() - 1) - 1;
        let u = ((phi - self.phi[k]) / (self.phi[k + 1] - self.phi[k])).clamp(0.0, 1.0);
        let fv = self.f[k] + u * (self.f[k + 1] - self.f[k]);
        r2 <= fv * fv
    }
}

/// What to measure at one ε.
struct View<'a> {
    /// Polyline points in use (a prefix of the curve).
    points: &'a [Point],
    filled: Option<FilledTurn<'a>>,
    /// Index of the first sample of the filled turn.
    turn_start: usize,
    /// Smallest radius over the filled turn; zero without one.
    inner_radius: f64,
    /// Radius of the appended disk; zero for closed curves.
    disk_radius: f64,
}

impl<'a> Prepared<'a> {
    fn new(curve: &'a PolarCurve) -> Self {
        let points = curve.points();
        let mut suffix = Vec::new();
        if curve.open_tail() {
            let phi = curve.phi();
            let end = phi[phi.len() - 1];
            let n = phi.partition_point(|&p| p + 2.0 * PI <= end);
            suffix = (0..n)
                .map(|i| curve.f()[i] - curve.value_unchecked(phi[i] + 2.0 * PI))
                .collect();
            for i in (0..n.saturating_sub(1)).rev() {
                suffix[i] = suffix[i].max(suffix[i + 1]);
            }
        }
        Prepared { curve, points, suffix }
    }

    fn final_decrement(&self) -> Option<f64> {
        self.suffix.last().copied()
    }

    /// Geometry at one ε; the filled turn starts where all later turn gaps
    /// are at most `max_gap`.
    fn view(&self, eps: f64, max_gap: f64) -> View<'_> {
        let c = self.curve;
        let n = self.points.len();
        if !c.open_tail() {
            return View {
                points: &self.points,
                filled: None,
                turn_start: n,
                inner_radius: 0.0,
                disk_radius: 0.0,
            };
        }
        let disk_radius = c.f_end().max(eps) + eps;
        let ic = self.suffix.partition_point(|&d| d > max_gap);
        if ic >= self.suffix.len() {
            return View { points: &self.points, filled: None, turn_start: n, inner_radius: 0.0, disk_radius };
        }
        let phi = c.phi();
        let phi_c = phi[ic];
        let ie = phi.partition_point(|&p| p < phi_c + 2.0 * PI).min(phi.len() - 1);
        let f = &c.f()[ic..=ie];
        let f_max = f.iter().cloned().fold(0.0, f64::max);
        let inner = f.iter().cloned().fold(f64::INFINITY, f64::min);
        View {
            points: &self.points[..=ie],
            filled: Some(FilledTurn {
                phi: &phi[ic..=ie],
                f,
                phi_c,
                f_max2: f_max * f_max,
                sign: c.orientation_sign(),
            }),
            turn_start: ic,
            inner_radius: inner,
            disk_radius,
        }
    }
}

fn check_eps(curve: &PolarCurve, eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Range(format!("epsilon must be positive, got {eps}")));
    }
    let diam = curve.diameter();
    if eps >= diam {
        return Err(Error::Range(format!("epsilon {eps} is not below the curve diameter {diam}")));
    }
    Ok(())
}

#[inline]
fn seg_dist2(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let (px, py) = (p[0] - a[0], p[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 { ((px * dx + py * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
    let (ex, ey) = (px - t * dx, py - t * dy);
    ex * ex + ey * ey
}

/// Column range `[lo, hi]` of cells of side `s` in row `j` whose centers lie
/// in the closed disk of radius `r`; empty when `lo > hi`.
#[inline]
fn disk_row_centers(j: i64, s: f64, r: f64) -> (i64, i64) {
    let y = (j as f64 + 0.5) * s;
    let w2 = r * r - y * y;
    if w2 < 0.0 {
        return (1, 0);
    }
    let w = w2.sqrt();
    ((-w / s - 0.5).ceil() as i64, (w / s - 0.5).floor() as i64)
}

/// Column range of cells `[i s, (i+1) s) x [j s, (j+1) s)` in row `j` meeting
/// the closed disk of radius `r`.
#[inline]
fn disk_row_touching(j: i64, s: f64, r: f64) -> (i64, i64) {
    let dy = if j >= 1 {
        j as f64 * s
    } else if j <= -2 {
        -(j + 1) as f64 * s
    } else {
        0.0
    };
    let w2 = r * r - dy * dy;
    if w2 < 0.0 {
        return (1, 0);
    }
    let w = w2.sqrt();
    ((-w / s).floor() as i64, ((w / s).ceil() as i64 - 1).max((-w / s).floor() as i64))
}

fn overlap(a: (i64, i64), b: (i64, i64)) -> u64 {
    let lo = a.0.max(b.0);
    let hi = a.1.min(b.1);
    if hi >= lo {
        (hi - lo + 1) as u64
    } else {
        0
    }
}

fn row_span(r: f64, s: f64) -> std::ops::RangeInclusive<i64> {
    (-r / s - 1.0).floor() as i64..=(r / s).ceil() as i64
}

/// Area of the ε-neighbourhood of the curve, measured on a square grid of
/// spacing `grid_factor · ε` by cell-center membership.
pub fn sausage_area(curve: &PolarCurve, epsilon: f64, grid_factor: f64) -> Result<f64> {
    check_eps(curve, epsilon)?;
    let prep = Prepared::new(curve);
    sausage_area_prepared(&prep, epsilon, grid_factor)
}

fn sausage_area_prepared(prep: &Prepared<'_>, eps: f64, grid_factor: f64) -> Result<f64> {
    if !(grid_factor > 0.0 && grid_factor <= DEFAULT_GRID_FACTOR) {
        return Err(Error::Spec(format!("grid_factor must lie in (0, 1/8], got {grid_factor}")));
    }
    // a radial gap of 2ε between turns is covered by their neighbourhoods
    let view = prep.view(eps, 2.0 * eps);
    let s = grid_factor * eps;
    let m = (2.0 / grid_factor).ceil() as i64;
    let b = m as f64 * s;
    let disk_r = view.disk_radius.max(view.inner_radius);
    let pts = view.points;
    let turn_start = view.turn_start;

    // bucket -> segments whose ε-neighbourhood may reach it
    let mut entries: Vec<(i64, i64, u32)> = (0..pts.len().saturating_sub(1))
        .into_par_iter()
        .flat_map_iter(|k| {
            let (a, c) = (pts[k], pts[k + 1]);
            // the filled turn may lie up to 2ε inside its boundary segments
            let reach = if k >= turn_start { 2.0 * eps } else { eps };
            let len = (c[0] - a[0]).hypot(c[1] - a[1]);
            let pieces = ((len / b).ceil() as usize).max(1);
            let mut out = Vec::with_capacity(9 * pieces);
            for p in 0..pieces {
                let (u0, u1) = (p as f64 / pieces as f64, (p + 1) as f64 / pieces as f64);
                let x0 = a[0] + u0 * (c[0] - a[0]);
                let x1 = a[0] + u1 * (c[0] - a[0]);
                let y0 = a[1] + u0 * (c[1] - a[1]);
                let y1 = a[1] + u1 * (c[1] - a[1]);
                let bx0 = ((x0.min(x1) - reach) / b).floor() as i64;
                let bx1 = ((x0.max(x1) + reach) / b).floor() as i64;
                let by0 = ((y0.min(y1) - reach) / b).floor() as i64;
                let by1 = ((y0.max(y1) + reach) / b).floor() as i64;
                for bj in by0..=by1 {
                    for bi in bx0..=bx1 {
                        out.push((bj, bi, k as u32));
                    }
                }
            }
            out
        })
        .collect();
    entries.par_sort_unstable();
    entries.dedup();

    let mut groups: Vec<(i64, i64, usize, usize)> = Vec::new();
    let mut start = 0;
    for k in 1..=entries.len() {
        if k == entries.len() || (entries[k].0, entries[k].1) != (entries[start].0, entries[start].1) {
            groups.push((entries[start].0, entries[start].1, start, k));
            start = k;
        }
    }
    let tested = groups.len() as u64 * (m * m) as u64;
    if tested > MAX_CELLS {
        return Err(Error::Resolution { cells: tested, limit: MAX_CELLS });
    }

    let eps2 = eps * eps;
    let (marked, disk_in_marked): (u64, u64) = groups
        .par_iter()
        .map(|&(bj, bi, lo, hi)| {
            let segs = &entries[lo..hi];
            let cols = (bi * m, bi * m + m - 1);
            let mut count = 0u64;
            let mut disk_count = 0u64;
            for j in bj * m..bj * m + m {
                let disk = if disk_r > 0.0 { disk_row_centers(j, s, disk_r) } else { (1, 0) };
                disk_count += overlap(disk, cols);
                let y = (j as f64 + 0.5) * s;
                for i in cols.0..=cols.1 {
                    if i >= disk.0 && i <= disk.1 {
                        count += 1;
                        continue;
                    }
                    let p = [(i as f64 + 0.5) * s, y];
                    let hit = view.filled.as_ref().is_some_and(|t| t.contains(p))
                        || segs.iter().any(|e| {
                            let k = e.2 as usize;
                            seg_dist2(p, pts[k], pts[k + 1]) <= eps2
                        });
                    if hit {
                        count += 1;
                    }
                }
            }
            (count, disk_count)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));

    let disk_total: u64 = if disk_r > 0.0 {
        row_span(disk_r, s)
            .map(|j| {
                let (lo, hi) = disk_row_centers(j, s, disk_r);
                if hi >= lo {
                    (hi - lo + 1) as u64
                } else {
                    0
                }
            })
            .sum()
    } else {
        0
    };
    let cells = marked + disk_total - disk_in_marked;
    Ok(cells as f64 * s * s)
}

/// Number of half-open cells `[iε, (i+1)ε) x [jε, (j+1)ε)` met by the curve.
///
/// A cell counts when the polyline runs through it with positive length, or
/// when it meets the region standing in for the untracked tail.
pub fn box_count(curve: &PolarCurve, epsilon: f64) -> Result<u64> {
    check_eps(curve, epsilon)?;
    let prep = Prepared::new(curve);
    box_count_prepared(&prep, epsilon)
}

fn polyline_cells(pts: &[Point], eps: f64) -> Vec<(i64, i64)> {
    let mut cells: Vec<(i64, i64)> = (0..pts.len().saturating_sub(1))
        .into_par_iter()
        .flat_map_iter(|k| {
            let (a, c) = (pts[k], pts[k + 1]);
            let mut ts = vec![0.0, 1.0];
            for axis in 0..2 {
                let d = c[axis] - a[axis];
                if d == 0.0 {
                    continue;
                }
                let (lo, hi) = (a[axis].min(c[axis]), a[axis].max(c[axis]));
                for g in (lo / eps).ceil() as i64..=(hi / eps).floor() as i64 {
                    let t = (g as f64 * eps - a[axis]) / d;
                    if t > 0.0 && t < 1.0 {
                        ts.push(t);
                    }
                }
            }
            ts.sort_by(f64::total_cmp);
            let mut out = Vec::with_capacity(ts.len());
            for w in ts.windows(2) {
                if w[1] - w[0] <= 1e-14 {
                    continue;
                }
                let t = 0.5 * (w[0] + w[1]);
                let x = a[0] + t * (c[0] - a[0]);
                let y = a[1] + t * (c[1] - a[1]);
                out.push(((y / eps).floor() as i64, (x / eps).floor() as i64));
            }
            out
        })
        .collect();
    cells.par_sort_unstable();
    cells.dedup();
    cells
}

fn count_in_row(cells: &[(i64, i64)], j: i64, range: (i64, i64)) -> u64 {
    if range.1 < range.0 {
        return 0;
    }
    let lo = cells.partition_point(|&c| c < (j, range.0));
    let hi = cells.partition_point(|&c| c <= (j, range.1));
    (hi - lo) as u64
}

fn box_count_prepared(prep: &Prepared<'_>, eps: f64) -> Result<u64> {
    // a cell with its center in the filled turn meets the curve when turns
    // are at most ε/2 apart
    let view = prep.view(eps, eps / 2.0);
    let pts = view.points;
    let est = prep.curve.total_length() / eps * 2.0 + pts.len() as f64;
    if est > MAX_CELLS as f64 {
        return Err(Error::Resolution { cells: est as u64, limit: MAX_CELLS });
    }
    let cells = polyline_cells(pts, eps);
    let mut total = cells.len() as u64;
    if !prep.curve.open_tail() {
        return Ok(total);
    }
    let disk_r = if view.filled.is_some() { view.inner_radius } else { prep.curve.f_end() };
    let area_cells = (PI * disk_r * disk_r / (eps * eps)) as u64;
    if area_cells > MAX_CELLS {
        return Err(Error::Resolution { cells: area_cells, limit: MAX_CELLS });
    }
    let rows: Vec<i64> = row_span(disk_r, eps).collect();
    total += rows
        .par_iter()
        .map(|&j| {
            let range = disk_row_touching(j, eps, disk_r);
            if range.1 < range.0 {
                return 0;
            }
            (range.1 - range.0 + 1) as u64 - count_in_row(&cells, j, range)
        })
        .sum::<u64>();
    if let Some(turn) = &view.filled {
        let f_max = turn.f_max2.sqrt();
        let rows: Vec<i64> = row_span(f_max, eps).collect();
        total += rows
            .par_iter()
            .map(|&j| {
                let outer = disk_row_centers(j, eps, f_max);
                let inner = disk_row_touching(j, eps, disk_r);
                let y = (j as f64 + 0.5) * eps;
                let mut n = 0u64;
                for i in outer.0..=outer.1 {
                    if i >= inner.0 && i <= inner.1 {
                        continue;
                    }
                    let p = [(i as f64 + 0.5) * eps, y];
                    if turn.contains(p) && cells.binary_search(&(j, i)).is_err() {
                        n += 1;
                    }
                }
                n
            })
            .sum::<u64>();
    }
    Ok(total)
}

/// Geometric ladder `eps_max · 2^-k` down to `eps_min`; `eps_min` itself is
/// appended when it sits close enough to half the last rung.
pub fn epsilon_ladder(eps_max: f64, eps_min: f64) -> Vec<f64> {
    let k_max = ((eps_max / eps_min).log2() + 1e-9).floor() as i32;
    let mut ladder: Vec<f64> = (0..=k_max).map(|k| eps_max * 0.5f64.powi(k)).collect();
    let last = *ladder.last().unwrap();
    if eps_min < last && eps_min / last <= TERMINAL_RUNG_RATIO {
        ladder.push(eps_min);
    }
    ladder
}

/// Measures the curve over the ε ladder from `eps_max` down to `eps_min`.
pub fn build_profile(
    curve: &PolarCurve,
    eps_max: f64,
    eps_min: f64,
    method: Method,
) -> Result<SausageProfile> {
    build_profile_with(curve, eps_max, eps_min, method, DEFAULT_GRID_FACTOR)
}

pub fn build_profile_with(
    curve: &PolarCurve,
    eps_max: f64,
    eps_min: f64,
    method: Method,
    grid_factor: f64,
) -> Result<SausageProfile> {
    if !(eps_min > 0.0 && eps_min < eps_max) {
        return Err(Error::Range(format!("need 0 < eps_min < eps_max, got [{eps_min}, {eps_max}]")));
    }
    check_eps(curve, eps_max)?;
    let prep = Prepared::new(curve);
    if curve.open_tail() {
        match prep.final_decrement() {
            Some(d) if d < eps_min / 2.0 => {}
            Some(d) => return Err(Error::Truncation { eps_min, decrement: d }),
            None => {
                return Err(Error::Truncation { eps_min, decrement: curve.f()[0] - curve.f_end() })
            }
        }
    }
    let ladder = epsilon_ladder(eps_max, eps_min);
    let entries = ladder
        .par_iter()
        .map(|&eps| {
            let area = match method {
                Method::SausageGrid => sausage_area_prepared(&prep, eps, grid_factor)?,
                Method::BoxCount => box_count_prepared(&prep, eps)? as f64,
            };
            Ok(ProfileEntry { epsilon: eps, area, method })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SausageProfile {
        entries,
        curve_ref: curve.source().to_string(),
        nucleus_radius: if curve.open_tail() { curve.f_end() } else { 0.0 },
    })
}

/// Regression model behind a dimension estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitModel {
    /// Straight line through `(log ε, log area)`.
    PowerLaw,
    /// `area = A ε^(2-d) + B ε`: the power law plus a term linear in ε for
    /// the rectifiable outer part of the curve. A spiral that starts at a
    /// finite winding angle misses the head it would have if it continued
    /// outward, which shifts the area by a multiple of ε. That shift decays
    /// only like `ε^(d-1)` relative to the leading term and biases the
    /// straight-line slope when `d` is close to 1. Box counts enter as
    /// `N ε²`.
    HeadCorrected,
}

impl FromStr for FitModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "powerlaw" | "ols" => Ok(FitModel::PowerLaw),
            "headcorrected" | "corrected" => Ok(FitModel::HeadCorrected),
            _ => Err(Error::Parse(format!("unknown fit model {s:?}"))),
        }
    }
}

struct WindowFit {
    dim: f64,
    stderr: f64,
    r_squared: f64,
}

fn fit_power_law(eps: &[f64], vals: &[f64], method: Method) -> Option<WindowFit> {
    let xs: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = vals.iter().map(|v| v.ln()).collect();
    let fit = fit_line(&xs, &ys)?;
    let dim = match method {
        Method::SausageGrid => 2.0 - fit.slope,
        Method::BoxCount => -fit.slope,
    };
    Some(WindowFit { dim, stderr: fit.slope_stderr, r_squared: fit.r_squared })
}

/// Least squares of `y ≈ A u^s + B u` in relative error for fixed `s`;
/// returns `(A, B, objective)`.
fn project_linear(u: &[f64], y: &[f64], s: f64) -> Option<(f64, f64, f64)> {
    let (mut saa, mut sab, mut sbb, mut sa, mut sb) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&ui, &yi) in u.iter().zip(y) {
        let a = ui.powf(s) / yi;
        let b = ui / yi;
        saa += a * a;
        sab += a * b;
        sbb += b * b;
        sa += a;
        sb += b;
    }
    let det = saa * sbb - sab * sab;
    if !(det.abs() > 1e-14 * saa * sbb) {
        return None;
    }
    let ca = (sa * sbb - sb * sab) / det;
    let cb = (sb * saa - sa * sab) / det;
    let obj = u
        .iter()
        .zip(y)
        .map(|(&ui, &yi)| ((ca * ui.powf(s) + cb * ui) / yi - 1.0).powi(2))
        .sum();
    Some((ca, cb, obj))
}

fn fit_head_corrected(eps: &[f64], vals: &[f64], method: Method) -> Option<WindowFit> {
    let n = eps.len();
    if n < 4 {
        return None;
    }
    let scale = eps.iter().cloned().fold(0.0, f64::max);
    let u: Vec<f64> = eps.iter().map(|e| e / scale).collect();
    let y: Vec<f64> = match method {
        Method::SausageGrid => vals.to_vec(),
        Method::BoxCount => vals.iter().zip(eps).map(|(v, e)| v * e * e).collect(),
    };
    let obj = |s: f64| project_linear(&u, &y, s).map_or(f64::INFINITY, |r| r.2);
    // coarse scan of the exponent, then golden-section refinement
    let steps = 200;
    let h = 1.0 / steps as f64;
    let mut best = (f64::INFINITY, 0.0);
    for k in 0..steps {
        let s = k as f64 * h;
        let v = obj(s);
        if v < best.0 {
            best = (v, s);
        }
    }
    if !best.0.is_finite() {
        return None;
    }
    let (mut a, mut b) = ((best.1 - h).max(0.0), (best.1 + h).min(1.0 - 1e-9));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut c, mut d) = (b - g * (b - a), a + g * (b - a));
    let (mut fc, mut fd) = (obj(c), obj(d));
    for _ in 0..200 {
        if b - a < 1e-14 {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = obj(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = obj(d);
        }
    }
    let s = 0.5 * (a + b);
    let (ca, cb, _) = project_linear(&u, &y, s)?;

    // residuals and Gauss-Newton covariance in log space
    let mut jtj = [[0.0f64; 3]; 3];
    let mut ssr = 0.0;
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mean = ly.iter().sum::<f64>() / n as f64;
    let sst: f64 = ly.iter().map(|v| (v - mean).powi(2)).sum();
    for (&ui, &lyi) in u.iter().zip(&ly) {
        let us = ui.powf(s);
        let m = ca * us + cb * ui;
        if !(m > 0.0) {
            return None;
        }
        ssr += (m.ln() - lyi).powi(2);
        let j = [ca * us * ui.ln() / m, us / m, ui / m];
        for p in 0..3 {
            for q in 0..3 {
                jtj[p][q] += j[p] * j[q];
            }
        }
    }
    let stderr = if n > 3 {
        let sigma2 = ssr / (n - 3) as f64;
        inverse3_00(&jtj).map_or(f64::NAN, |v| (sigma2 * v).max(0.0).sqrt())
    } else {
        0.0
    };
    let r_squared = if sst > 0.0 { 1.0 - ssr / sst } else { 1.0 };
    Some(WindowFit { dim: 2.0 - s, stderr, r_squared })
}

/// `(M^-1)[0][0]` of a symmetric 3x3 matrix.
fn inverse3_00(m: &[[f64; 3]; 3]) -> Option<f64> {
    let cof = m[1][1] * m[2][2] - m[1][2] * m[2][1];
    let det = m[0][0] * cof - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    if det.abs() > 0.0 && det.is_finite() {
        Some(cof / det)
    } else {
        None
    }
}

/// Regresses the profile on a log-log scale and converts the slope to a
/// dimension estimate, clamped to `[1, 2]`.
pub fn fit_dimension(profile: &SausageProfile, policy: WindowPolicy) -> Result<DimensionReport> {
    fit_dimension_with(profile, policy, FitModel::PowerLaw)
}

pub fn fit_dimension_with(
    profile: &SausageProfile,
    policy: WindowPolicy,
    model: FitModel,
) -> Result<DimensionReport> {
    let e = &profile.entries;
    if e.len() < MIN_FIT_POINTS {
        return Err(Error::FitDegenerate(format!(
            "profile has {} entries, need at least {MIN_FIT_POINTS}",
            e.len()
        )));
    }
    let method = e[0].method;
    if e.iter().any(|x| x.method != method) {
        return Err(Error::FitDegenerate("profile mixes measurement methods".into()));
    }
    if e.iter().any(|x| !(x.epsilon > 0.0 && x.area > 0.0)) {
        return Err(Error::FitDegenerate("profile has non-positive values".into()));
    }
    // sorted by decreasing ε so windows run toward small ε
    let mut sorted = e.clone();
    sorted.sort_by(|a, b| b.epsilon.total_cmp(&a.epsilon));
    let eps: Vec<f64> = sorted.iter().map(|x| x.epsilon).collect();
    let vals: Vec<f64> = sorted.iter().map(|x| x.area).collect();
    let window_fit = |lo: usize, hi: usize| match model {
        FitModel::PowerLaw => fit_power_law(&eps[lo..hi], &vals[lo..hi], method),
        FitModel::HeadCorrected => fit_head_corrected(&eps[lo..hi], &vals[lo..hi], method),
    };
    let n = e.len();
    let (lo, hi, fit) = match policy {
        WindowPolicy::FullRange => (0, n, window_fit(0, n)),
        WindowPolicy::AutoPlateau => {
            let mut best: Option<(usize, usize, WindowFit)> = None;
            for lo in 0..=n - MIN_FIT_POINTS {
                for hi in lo + MIN_FIT_POINTS..=n {
                    let Some(f) = window_fit(lo, hi) else { continue };
                    if !f.stderr.is_finite() {
                        continue;
                    }
                    let better = match &best {
                        None => true,
                        Some((blo, bhi, b)) => {
                            let tie = (f.stderr - b.stderr).abs() <= 1e-12 + 1e-9 * b.stderr;
                            if tie {
                                hi > *bhi || (hi == *bhi && lo < *blo)
                            } else {
                                f.stderr < b.stderr
                            }
                        }
                    };
                    if better {
                        best = Some((lo, hi, f));
                    }
                }
            }
            match best {
                Some((lo, hi, f)) => (lo, hi, Some(f)),
                None => (0, n, None),
            }
        }
    };
    let fit = fit.ok_or_else(|| Error::FitDegenerate("profile does not determine a slope".into()))?;
    Ok(DimensionReport {
        dim_estimate: fit.dim.clamp(1.0, 2.0),
        raw_estimate: fit.dim,
        stderr: fit.stderr,
        fit_window: (eps[hi - 1], eps[lo]),
        n_points: hi - lo,
        r_squared: fit.r_squared,
        method,
        model,
        window_policy: policy,
        predicted: None,
        verdict: None,
    })
}

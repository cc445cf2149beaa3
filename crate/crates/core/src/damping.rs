//! The damping coefficient `h(t)` of `x'' + h(t) x' + x = 0`, its
//! antiderivative `H(t)` and the asymptotic checks built on them.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{self, fit_line, log_space, Pchip};

/// Relative margin by which a fitted tail exponent must exceed 1 before an
/// improper integral is declared convergent.
pub const TAIL_MARGIN: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DampingKind {
    /// `h(t) = lambda * t^(-gamma)`
    PowerLaw { lambda: f64, gamma: f64 },
    /// `h(t) = (2 - mu) / t`, the damping of the generalized Bessel system.
    BesselStyle { mu: f64, nu: f64 },
    /// Monotone cubic interpolation through positive `(t, h)` knots.
    Sampled { knots: Vec<(f64, f64)> },
}

#[derive(Debug, Clone)]
pub struct DampingSpec {
    kind: DampingKind,
    t0: f64,
    sampled: Option<SampledCurve>,
}

#[derive(Debug, Clone)]
struct SampledCurve {
    spline: Pchip,
    // H at each knot
    cumulative: Vec<f64>,
}

impl PartialEq for DampingSpec {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.t0 == other.t0
    }
}

/// Result of fitting `H(t) ≈ 2 α log t + c` over a window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticFit {
    pub alpha: f64,
    pub offset: f64,
    pub residual_sup: f64,
    pub window: (f64, f64),
}

/// Outcome of an improper-integral check on a finite window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailCheck {
    pub value: f64,
    pub converged: bool,
    /// Fitted `p` in `integrand ~ c t^-p` over the last decade; `inf` for an
    /// identically vanishing tail.
    pub tail_exponent: f64,
}

impl DampingSpec {
    pub fn power_law(lambda: f64, gamma: f64, t0: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::Spec(format!("power law needs lambda > 0, got {lambda}")));
        }
        if !gamma.is_finite() || !t0.is_finite() {
            return Err(Error::Spec("power law parameters must be finite".into()));
        }
        if gamma > 0.0 && t0 <= 0.0 {
            return Err(Error::Spec(format!("power law with gamma > 0 needs t0 > 0, got {t0}")));
        }
        if t0 < 0.0 {
            return Err(Error::Spec(format!("power law needs t0 >= 0, got {t0}")));
        }
        Ok(DampingSpec {
            kind: DampingKind::PowerLaw { lambda, gamma },
            t0,
            sampled: None,
        })
    }

    pub fn bessel_style(mu: f64, nu: f64, t0: f64) -> Result<Self> {
        if !(t0 > 0.0) || !mu.is_finite() || !nu.is_finite() {
            return Err(Error::Spec(format!("bessel damping needs t0 > 0, got {t0}")));
        }
        Ok(DampingSpec {
            kind: DampingKind::BesselStyle { mu, nu },
            t0,
            sampled: None,
        })
    }

    pub fn sampled(mut knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::Spec("sampled damping needs at least two knots".into()));
        }
        knots.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in knots.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::Spec(format!("duplicate knot at t = {}", w[0].0)));
            }
        }
        if let Some(&(t, h)) = knots.iter().find(|k| !(k.1 > 0.0) || !k.0.is_finite()) {
            return Err(Error::Positivity { t, h });
        }
        let spline = Pchip::new(
            knots.iter().map(|k| k.0).collect(),
            knots.iter().map(|k| k.1).collect(),
        );
        let mut cumulative = vec![0.0; knots.len()];
        for i in 1..knots.len() {
            let piece = numeric::integrate(
                |s| spline.eval(s),
                knots[i - 1].0,
                knots[i].0,
                1e-13,
                0.0,
            );
            cumulative[i] = cumulative[i - 1] + piece;
        }
        let t0 = knots[0].0;
        Ok(DampingSpec {
            kind: DampingKind::Sampled { knots },
            t0,
            sampled: Some(SampledCurve { spline, cumulative }),
        })
    }

    pub fn kind(&self) -> &DampingKind {
        &self.kind
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    /// Upper end of the domain (`inf` except for sampled specs).
    pub fn t_sup(&self) -> f64 {
        match &self.kind {
            DampingKind::Sampled { knots } => knots.last().unwrap().0,
            _ => f64::INFINITY,
        }
    }

    /// A copy with a different domain start (ignored for sampled specs).
    pub fn with_t0(&self, t0: f64) -> Result<Self> {
        match self.kind {
            DampingKind::PowerLaw { lambda, gamma } => Self::power_law(lambda, gamma, t0),
            DampingKind::BesselStyle { mu, nu } => Self::bessel_style(mu, nu, t0),
            DampingKind::Sampled { .. } => Ok(self.clone()),
        }
    }

    fn check_domain(&self, t: f64) -> Result<()> {
        if !(t >= self.t0) {
            return Err(Error::Domain(format!("t = {t} precedes t0 = {}", self.t0)));
        }
        if t > self.t_sup() {
            return Err(Error::Domain(format!(
                "t = {t} beyond last knot {}",
                self.t_sup()
            )));
        }
        Ok(())
    }

    /// `h(t)` without domain checks; used in integrator inner loops.
    pub(crate) fn h_unchecked(&self, t: f64) -> f64 {
        match &self.kind {
            DampingKind::PowerLaw { lambda, gamma } => lambda * t.powf(-gamma),
            DampingKind::BesselStyle { mu, .. } => (2.0 - mu) / t,
            DampingKind::Sampled { .. } => self.sampled.as_ref().unwrap().spline.eval(t),
        }
    }

    pub fn eval_h(&self, t: f64) -> Result<f64> {
        self.check_domain(t)?;
        let h = self.h_unchecked(t);
        if !(h > 0.0) {
            return Err(Error::Positivity { t, h });
        }
        Ok(h)
    }

    /// `h'(t)`; analytic for the closed-form kinds, spline derivative for sampled.
    pub fn eval_dh(&self, t: f64) -> Result<f64> {
        self.check_domain(t)?;
        Ok(self.dh_unchecked(t))
    }

    fn dh_unchecked(&self, t: f64) -> f64 {
        match &self.kind {
            DampingKind::PowerLaw { lambda, gamma } => -gamma * lambda * t.powf(-gamma - 1.0),
            DampingKind::BesselStyle { mu, .. } => -(2.0 - mu) / (t * t),
            DampingKind::Sampled { .. } => self.sampled.as_ref().unwrap().spline.derivative(t),
        }
    }

    /// `H(t) = ∫_{t0}^t h(s) ds`.
    #[allow(non_snake_case)]
    pub fn eval_H(&self, t: f64) -> Result<f64> {
        self.check_domain(t)?;
        Ok(self.big_h_unchecked(t))
    }

    #[allow(non_snake_case)]
    fn big_h_unchecked(&self, t: f64) -> f64 {
        let t0 = self.t0;
        match &self.kind {
            DampingKind::PowerLaw { lambda, gamma } => {
                if *gamma == 1.0 {
                    lambda * (t / t0).ln()
                } else {
                    let e = 1.0 - gamma;
                    lambda / e * (t.powf(e) - t0.powf(e))
                }
            }
            DampingKind::BesselStyle { mu, .. } => (2.0 - mu) * (t / t0).ln(),
            DampingKind::Sampled { knots } => {
                let s = self.sampled.as_ref().unwrap();
                let i = knots.partition_point(|k| k.0 <= t).saturating_sub(1);
                let i = i.min(knots.len() - 2);
                s.cumulative[i]
                    + numeric::integrate(|u| s.spline.eval(u), knots[i].0, t, 1e-13, 0.0)
            }
        }
    }

    /// Least-squares fit of `H(t)` against `2 log t` on log-spaced abscissae.
    pub fn fit_alpha(&self, window: (f64, f64), n_samples: usize) -> Result<AsymptoticFit> {
        let (lo, hi) = window;
        if n_samples < 8 {
            return Err(Error::FitDegenerate(format!(
                "need at least 8 samples, got {n_samples}"
            )));
        }
        self.check_domain(lo)?;
        self.check_domain(hi)?;
        if !(lo > 0.0) || hi < 10.0 * lo {
            return Err(Error::FitDegenerate(format!(
                "window ({lo}, {hi}) spans less than one decade"
            )));
        }
        let ts = log_space(lo, hi, n_samples);
        let xs: Vec<f64> = ts.iter().map(|t| 2.0 * t.ln()).collect();
        let ys: Vec<f64> = ts.iter().map(|&t| self.big_h_unchecked(t)).collect();
        let fit = fit_line(&xs, &ys)
            .ok_or_else(|| Error::FitDegenerate("singular regression".into()))?;
        Ok(AsymptoticFit {
            alpha: fit.slope,
            offset: fit.intercept,
            residual_sup: fit.max_abs_residual,
            window,
        })
    }

    /// `∫_{t0}^{t_max} |2h' + h²| dt` together with a tail-decay verdict on
    /// whether the improper integral converges.
    pub fn check_hw_condition(&self, t_max: f64) -> Result<TailCheck> {
        if !(t_max > self.t0) {
            return Err(Error::Domain(format!("t_max = {t_max} must exceed t0 = {}", self.t0)));
        }
        self.check_domain(t_max)?;
        let g = |t: f64| (2.0 * self.dh_unchecked(t) + self.h_unchecked(t).powi(2)).abs();
        let value = integrate_from(self.t0, t_max, g);
        let scale = |t: f64| 2.0 * self.dh_unchecked(t).abs() + self.h_unchecked(t).powi(2);
        let (p, converged) = tail_verdict(self.t0, t_max, |t| {
            let v = g(t);
            if v <= 1e-10 * scale(t) {
                None
            } else {
                Some(v.ln())
            }
        });
        Ok(TailCheck {
            value,
            converged,
            tail_exponent: p,
        })
    }

    /// Parses the key-value form: `kind=powerlaw|bessel|sampled`, `lambda=`,
    /// `gamma=`, `mu=`, `nu=`, `t0=`, `knots=` (CSV path, resolved against `base`).
    pub fn from_config(map: &BTreeMap<String, String>, base: Option<&Path>) -> Result<Self> {
        let get = |k: &str| -> Result<Option<f64>> {
            map.get(k)
                .map(|v| {
                    parse_real(v).ok_or_else(|| Error::Parse(format!("{k}: not a number: {v}")))
                })
                .transpose()
        };
        let need = |k: &str| -> Result<f64> {
            get(k)?.ok_or_else(|| Error::Parse(format!("missing key '{k}'")))
        };
        let kind = map
            .get("kind")
            .ok_or_else(|| Error::Parse("missing key 'kind'".into()))?;
        match kind.trim().to_ascii_lowercase().as_str() {
            "powerlaw" | "power_law" | "power-law" => {
                Self::power_law(need("lambda")?, need("gamma")?, get("t0")?.unwrap_or(1.0))
            }
            "bessel" | "bessel_style" => Self::bessel_style(
                need("mu")?,
                get("nu")?.unwrap_or(0.0),
                get("t0")?.unwrap_or(1.0),
            ),
            "sampled" => {
                let path = map
                    .get("knots")
                    .ok_or_else(|| Error::Parse("sampled damping needs 'knots'".into()))?;
                let path = match base {
                    Some(b) if Path::new(path).is_relative() => b.join(path),
                    _ => Path::new(path).to_path_buf(),
                };
                Self::sampled(read_knots(&path)?)
            }
            other => Err(Error::Parse(format!("unknown damping kind '{other}'"))),
        }
    }

    pub fn describe(&self) -> String {
        match &self.kind {
            DampingKind::PowerLaw { lambda, gamma } => {
                format!("h(t) = {} t^-{}", fmt_num(*lambda), fmt_num(*gamma))
            }
            DampingKind::BesselStyle { mu, .. } => format!("h(t) = {}/t", fmt_num(2.0 - mu)),
            DampingKind::Sampled { knots } => format!("sampled h ({} knots)", knots.len()),
        }
    }
}

fn fmt_num(v: f64) -> String {
    for den in [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 8.0] {
        let num = v * den;
        if (num - num.round()).abs() < 1e-9 {
            return if den == 1.0 {
                format!("{}", num.round())
            } else {
                format!("({}/{})", num.round(), den)
            };
        }
    }
    format!("{v}")
}

/// Accepts plain decimals and simple fractions like `4/3`.
pub fn parse_real(s: &str) -> Option<f64> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once('/') {
        let (a, b): (f64, f64) = (a.trim().parse().ok()?, b.trim().parse().ok()?);
        return (b != 0.0).then(|| a / b);
    }
    s.parse().ok()
}

/// Reads a two-column `t,h` CSV; the header row is optional.
pub fn read_knots(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() < 2 {
            return Err(Error::Parse(format!("knots row {} has fewer than 2 columns", i + 1)));
        }
        match (rec[0].parse::<f64>(), rec[1].parse::<f64>()) {
            (Ok(t), Ok(h)) => out.push((t, h)),
            _ if i == 0 => continue,
            _ => return Err(Error::Parse(format!("knots row {}: bad number", i + 1))),
        }
    }
    Ok(out)
}

/// `∫_{t0}^{t1} g`, switching to a logarithmic variable away from zero.
pub(crate) fn integrate_from<F: Fn(f64) -> f64>(t0: f64, t1: f64, g: F) -> f64 {
    if t0 > 0.0 {
        numeric::integrate_log(&g, t0, t1, 1e-10, 1e-300)
    } else {
        let mid = t1.min(1.0);
        let head = numeric::integrate(&g, t0, mid, 1e-10, 1e-300);
        if t1 > mid {
            head + numeric::integrate_log(&g, mid, t1, 1e-10, 1e-300)
        } else {
            head
        }
    }
}

/// Fits `log g ~ -p log t` over the last decade before `t_max`. `log_g`
/// returns `None` where the integrand vanishes; an entirely vanishing tail
/// counts as convergent. Verdict: convergent iff `p > 1 + TAIL_MARGIN`.
pub(crate) fn tail_verdict<F: Fn(f64) -> Option<f64>>(t0: f64, t_max: f64, log_g: F) -> (f64, bool) {
    let lo = (t_max / 10.0).max(t0).max(t_max * 1e-12);
    let ts = log_space(lo, t_max, 24);
    let pts: Vec<(f64, f64)> = ts
        .iter()
        .filter_map(|&t| log_g(t).map(|lg| (t.ln(), lg)))
        .collect();
    if pts.len() < 2 {
        return (f64::INFINITY, true);
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    match fit_line(&xs, &ys) {
        Some(fit) => {
            let p = -fit.slope;
            (p, p > 1.0 + TAIL_MARGIN)
        }
        None => (f64::INFINITY, true),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pl(l: f64, g: f64) -> DampingSpec {
        DampingSpec::power_law(l, g, 1.0).unwrap()
    }

    #[test]
    fn eval_h_examples() {
        assert_relative_eq!(DampingSpec::power_law(3.0, 1.0, 1.0).unwrap().eval_h(3.0).unwrap(), 1.0);
        // mu = 2 - lambda with lambda = 1
        let b = DampingSpec::bessel_style(1.0, 0.0, 1.0).unwrap();
        assert_relative_eq!(b.eval_h(2.0).unwrap(), 0.5);
        let s = DampingSpec::sampled(vec![(1.0, 2.0), (2.0, 1.0)]).unwrap();
        assert_eq!(s.eval_h(1.0).unwrap(), 2.0);
    }

    #[test]
    fn eval_h_errors() {
        let s = DampingSpec::sampled(vec![(1.0, 2.0), (2.0, 1.0)]).unwrap();
        assert!(matches!(s.eval_h(0.5), Err(Error::Domain(_))));
        assert!(matches!(s.eval_h(2.5), Err(Error::Domain(_))));
        assert!(matches!(pl(1.0, 1.0).eval_h(0.5), Err(Error::Domain(_))));
        let b = DampingSpec::bessel_style(2.5, 0.0, 1.0).unwrap();
        assert!(matches!(b.eval_h(2.0), Err(Error::Positivity { .. })));
        assert!(DampingSpec::sampled(vec![(1.0, 2.0), (2.0, -1.0)]).is_err());
        assert!(DampingSpec::power_law(1.0, 0.5, 0.0).is_err());
        assert!(DampingSpec::power_law(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn eval_big_h_examples() {
        assert_relative_eq!(pl(2.0, 1.0).eval_H(std::f64::consts::E).unwrap(), 2.0, epsilon = 1e-15);
        assert_eq!(pl(3.0, 0.75).eval_H(1.0).unwrap(), 0.0);
        assert_relative_eq!(pl(3.0, 0.75).eval_H(16.0).unwrap(), 12.0, epsilon = 1e-13);
    }

    #[test]
    fn sampled_positive_between_knots_and_h_matches_quadrature() {
        let s = DampingSpec::sampled(vec![(1.0, 2.0), (2.0, 0.01), (3.0, 5.0), (4.0, 0.02)]).unwrap();
        for k in 0..=3000 {
            let t = 1.0 + k as f64 / 1000.0;
            assert!(s.eval_h(t).unwrap() > 0.0);
        }
        // piecewise cubics integrate exactly under Simpson's rule
        let mut simpson = 0.0;
        let n = 3000;
        let dt = 3.0 / n as f64;
        for k in 0..n {
            let a = 1.0 + k as f64 * dt;
            let b = a + dt;
            let h = |t| s.eval_h(t).unwrap();
            simpson += dt / 6.0 * (h(a) + 4.0 * h(0.5 * (a + b)) + h(b));
        }
        assert_relative_eq!(s.eval_H(4.0).unwrap(), simpson, max_relative = 1e-10);
    }

    #[test]
    fn big_h_nondecreasing_and_derivative_is_h() {
        let specs = [
            pl(1.0, 1.0),
            pl(3.0, 0.75),
            pl(0.5, 0.25),
            DampingSpec::bessel_style(0.5, 1.0, 2.0).unwrap(),
            DampingSpec::sampled(vec![(1.0, 1.0), (5.0, 0.2), (9.0, 0.4), (20.0, 0.1)]).unwrap(),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for s in &specs {
            let t_hi = s.t_sup().min(1e4);
            let mut prev = s.eval_H(s.t0()).unwrap();
            for k in 1..200 {
                let t = s.t0() + (t_hi - s.t0()) * k as f64 / 200.0;
                let v = s.eval_H(t).unwrap();
                assert!(v >= prev);
                prev = v;
            }
            for _ in 0..100 {
                let t = rng.gen_range(s.t0() + 0.01..t_hi - 0.01);
                let d = 1e-5 * t;
                let fd = (s.eval_H(t + d).unwrap() - s.eval_H(t - d).unwrap()) / (2.0 * d);
                assert_relative_eq!(fd, s.eval_h(t).unwrap(), max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn fit_alpha_examples() {
        let f = pl(4.0 / 3.0, 1.0).fit_alpha((10.0, 1e5), 32).unwrap();
        assert!((f.alpha - 2.0 / 3.0).abs() < 1e-9);
        assert!(f.residual_sup < 1e-9);
        let f = pl(2.0, 1.0).fit_alpha((10.0, 1e5), 16).unwrap();
        assert!((f.alpha - 1.0).abs() < 1e-12 && f.residual_sup < 1e-10);
        // polynomial growth of H: the oracle is the closed form itself
        let s = pl(3.0, 0.75);
        let narrow = s.fit_alpha((10.0, 1e3), 32).unwrap();
        let wide = s.fit_alpha((10.0, 1e5), 32).unwrap();
        assert!(wide.alpha > narrow.alpha);
        assert!(wide.residual_sup > 0.5);
        let max_dev = log_space(10.0, 1e5, 32)
            .iter()
            .map(|&t| (s.eval_H(t).unwrap() - 2.0 * wide.alpha * t.ln() - wide.offset).abs())
            .fold(0.0, f64::max);
        assert_relative_eq!(max_dev, wide.residual_sup, max_relative = 1e-12);
    }

    #[test]
    fn fit_alpha_errors() {
        assert!(matches!(pl(1.0, 1.0).fit_alpha((10.0, 50.0), 16), Err(Error::FitDegenerate(_))));
        assert!(matches!(pl(1.0, 1.0).fit_alpha((10.0, 1e3), 4), Err(Error::FitDegenerate(_))));
        assert!(matches!(pl(1.0, 1.0).fit_alpha((0.5, 1e3), 16), Err(Error::Domain(_))));
    }

    #[test]
    fn fit_alpha_t0_invariance() {
        for t0 in [0.5, 1.0, 3.0, 8.0] {
            let s = DampingSpec::power_law(1.3, 1.0, t0).unwrap();
            let f = s.fit_alpha((10.0, 1e5), 24).unwrap();
            assert!((f.alpha - 0.65).abs() < 1e-6);
            let s = DampingSpec::power_law(0.8, 0.9, t0).unwrap();
            let base = DampingSpec::power_law(0.8, 0.9, 1.0).unwrap().fit_alpha((10.0, 1e5), 24).unwrap();
            let f = s.fit_alpha((10.0, 1e5), 24).unwrap();
            assert!((f.alpha - base.alpha).abs() < 1e-6);
        }
    }

    #[test]
    fn hw_condition_examples() {
        let c = pl(2.0, 1.0).check_hw_condition(1e6).unwrap();
        assert!(c.value < 1e-12 && c.converged);
        // closed form: ∫_1^T t^-2 dt = 1 - 1/T
        let c = pl(1.0, 1.0).check_hw_condition(1e6).unwrap();
        assert_relative_eq!(c.value, 1.0 - 1e-6, max_relative = 1e-8);
        assert!(c.converged);
        assert!((c.tail_exponent - 2.0).abs() < 1e-6);
        let c = pl(1.0, 0.25).check_hw_condition(1e6).unwrap();
        assert!(!c.converged);
        assert!((c.tail_exponent - 0.5).abs() < 0.02);
    }

    #[test]
    fn config_parsing() {
        let mut m = BTreeMap::new();
        m.insert("kind".to_string(), "powerlaw".to_string());
        m.insert("lambda".to_string(), "4/3".to_string());
        m.insert("gamma".to_string(), "1".to_string());
        let s = DampingSpec::from_config(&m, None).unwrap();
        assert_eq!(s, DampingSpec::power_law(4.0 / 3.0, 1.0, 1.0).unwrap());
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("k.csv");
        std::fs::write(&p, "t,h\n1,2\n2,1\n4,0.5\n").unwrap();
        let mut m = BTreeMap::new();
        m.insert("kind".to_string(), "sampled".to_string());
        m.insert("knots".to_string(), "k.csv".to_string());
        let s = DampingSpec::from_config(&m, Some(dir.path())).unwrap();
        assert_eq!(s.eval_h(2.0).unwrap(), 1.0);
        std::fs::write(&p, "1,2\n2,1\n").unwrap();
        assert!(DampingSpec::from_config(&m, Some(dir.path())).is_ok());
        m.insert("kind".to_string(), "cubic".to_string());
        assert!(matches!(DampingSpec::from_config(&m, None), Err(Error::Parse(_))));
    }
}

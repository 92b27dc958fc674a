use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::GridFunction;
use crate::mollify::Mollified;

/// A C² function with its first two derivatives.
pub trait Smooth: Sync {
    fn value(&self, t: f64) -> f64;
    fn d1(&self, t: f64) -> f64;
    fn d2(&self, t: f64) -> f64;
    /// Interval outside which the function vanishes, when there is one.
    fn support(&self) -> Option<(f64, f64)>;
}

/// Analytic test profiles, serializable for instance replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    Constant { c: f64 },
    /// `sin²(ωt)`.
    SinSquared { omega: f64 },
    /// `1 − cos(ω(t − shift))`.
    OneMinusCos { omega: f64, shift: f64 },
    /// `height · (3u² − 2u³)`, `u = (t − start)/width` clamped to [0, 1].
    Smoothstep { start: f64, width: f64, height: f64 },
    /// `height · (10u³ − 15u⁴ + 6u⁵)`, flat to second order at both ends.
    Smootherstep { start: f64, width: f64, height: f64 },
    /// `height · e · exp(−1/(1 − u²))`, `u = (t − center)/width`; peak value `height`.
    Bump { center: f64, width: f64, height: f64 },
    /// `Σ c_k t^k`.
    Polynomial { coeffs: Vec<f64> },
    Spline(CubicSpline),
    Sum { terms: Vec<Profile> },
}

fn bump_parts(u: f64) -> (f64, f64, f64) {
    if u <= -1.0 || u >= 1.0 {
        return (0.0, 0.0, 0.0);
    }
    let q = (1.0 - u) * (1.0 + u);
    let phi = (1.0 - 1.0 / q).exp();
    let q2 = q * q;
    let d1 = phi * (-2.0 * u / q2);
    let d2 = phi * (4.0 * u * u / (q2 * q2) - 2.0 / q2 - 8.0 * u * u / (q2 * q));
    (phi, d1, d2)
}

fn step_parts(t: f64, start: f64, width: f64, quintic: bool) -> (f64, f64, f64) {
    let u = (t - start) / width;
    if u <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    if u >= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    let w = width;
    if quintic {
        let v = u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
        let d1 = 30.0 * u * u * (1.0 - u) * (1.0 - u) / w;
        let d2 = 60.0 * u * (1.0 - u) * (1.0 - 2.0 * u) / (w * w);
        (v, d1, d2)
    } else {
        (u * u * (3.0 - 2.0 * u), 6.0 * u * (1.0 - u) / w, 6.0 * (1.0 - 2.0 * u) / (w * w))
    }
}

impl Profile {
    /// `(F, F′, F″)` at `t`.
    pub fn jet(&self, t: f64) -> (f64, f64, f64) {
        match self {
            Profile::Constant { c } => (*c, 0.0, 0.0),
            Profile::SinSquared { omega } => {
                let (s, c) = (omega * t).sin_cos();
                (s * s, 2.0 * omega * s * c, 2.0 * omega * omega * (c * c - s * s))
            }
            Profile::OneMinusCos { omega, shift } => {
                let (s, c) = (omega * (t - shift)).sin_cos();
                (1.0 - c, omega * s, omega * omega * c)
            }
            Profile::Smoothstep { start, width, height } => {
                let (v, d1, d2) = step_parts(t, *start, *width, false);
                (height * v, height * d1, height * d2)
            }
            Profile::Smootherstep { start, width, height } => {
                let (v, d1, d2) = step_parts(t, *start, *width, true);
                (height * v, height * d1, height * d2)
            }
            Profile::Bump { center, width, height } => {
                let (v, d1, d2) = bump_parts((t - center) / width);
                (height * v, height * d1 / width, height * d2 / (width * width))
            }
            Profile::Polynomial { coeffs } => {
                let (mut v, mut d1, mut d2) = (0.0, 0.0, 0.0);
                for &c in coeffs.iter().rev() {
                    d2 = d2 * t + 2.0 * d1;
                    d1 = d1 * t + v;
                    v = v * t + c;
                }
                (v, d1, d2)
            }
            Profile::Spline(s) => s.jet(t),
            Profile::Sum { terms } => terms.iter().fold((0.0, 0.0, 0.0), |acc, p| {
                let j = p.jet(t);
                (acc.0 + j.0, acc.1 + j.1, acc.2 + j.2)
            }),
        }
    }

    fn compact_support(&self) -> Option<Option<(f64, f64)>> {
        // Some(None) marks the zero function
        match self {
            Profile::Constant { c } if *c == 0.0 => Some(None),
            Profile::Bump { center, width, height } => {
                if *height == 0.0 {
                    Some(None)
                } else {
                    Some(Some((center - width, center + width)))
                }
            }
            Profile::Spline(s) => Some(Some((s.a(), s.b()))),
            Profile::Sum { terms } => {
                let mut hull: Option<(f64, f64)> = None;
                for p in terms {
                    match p.compact_support()? {
                        None => {}
                        Some((lo, hi)) => {
                            hull = Some(match hull {
                                None => (lo, hi),
                                Some((a, b)) => (a.min(lo), b.max(hi)),
                            })
                        }
                    }
                }
                Some(hull)
            }
            _ => None,
        }
    }
}

impl Smooth for Profile {
    fn value(&self, t: f64) -> f64 {
        self.jet(t).0
    }
    fn d1(&self, t: f64) -> f64 {
        self.jet(t).1
    }
    fn d2(&self, t: f64) -> f64 {
        self.jet(t).2
    }
    fn support(&self) -> Option<(f64, f64)> {
        self.compact_support().flatten()
    }
}

impl Smooth for Mollified<'_> {
    fn value(&self, t: f64) -> f64 {
        Mollified::value(self, t)
    }
    fn d1(&self, t: f64) -> f64 {
        Mollified::d1(self, t)
    }
    fn d2(&self, t: f64) -> f64 {
        Mollified::d2(self, t)
    }
    fn support(&self) -> Option<(f64, f64)> {
        Some(Mollified::support(self))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SplineData {
    a: f64,
    b: f64,
    values: Vec<f64>,
}

/// Natural cubic spline through uniform samples; C² on `[a, b]` and zero
/// outside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SplineData", into = "SplineData")]
pub struct CubicSpline {
    data: SplineData,
    /// Second derivatives at the nodes.
    moments: Vec<f64>,
}

impl TryFrom<SplineData> for CubicSpline {
    type Error = Error;
    fn try_from(d: SplineData) -> Result<Self> {
        CubicSpline::new(d.a, d.b, d.values)
    }
}

impl From<CubicSpline> for SplineData {
    fn from(s: CubicSpline) -> Self {
        s.data
    }
}

impl CubicSpline {
    pub fn new(a: f64, b: f64, values: Vec<f64>) -> Result<Self> {
        let g = GridFunction::new(a, b, values)?;
        Ok(Self::from_grid(&g))
    }

    pub fn from_grid(f: &GridFunction) -> Self {
        let y = f.values();
        let n = y.len();
        let h = f.h();
        let mut m = vec![0.0; n];
        if n > 2 {
            // Thomas algorithm for M[i-1] + 4M[i] + M[i+1] = 6Δ²y/h², natural ends
            let k = n - 2;
            let mut c = vec![0.0; k];
            let mut d = vec![0.0; k];
            for i in 0..k {
                let rhs = 6.0 * (y[i] - 2.0 * y[i + 1] + y[i + 2]) / (h * h);
                let (cp, dp) = if i == 0 { (0.0, 0.0) } else { (c[i - 1], d[i - 1]) };
                let denom = 4.0 - cp;
                c[i] = 1.0 / denom;
                d[i] = (rhs - dp) / denom;
            }
            for i in (0..k).rev() {
                let next = if i + 1 < k { m[i + 2] } else { 0.0 };
                m[i + 1] = d[i] - c[i] * next;
            }
        }
        Self { data: SplineData { a: f.a(), b: f.b(), values: y.to_vec() }, moments: m }
    }

    pub fn a(&self) -> f64 {
        self.data.a
    }

    pub fn b(&self) -> f64 {
        self.data.b
    }

    pub fn jet(&self, t: f64) -> (f64, f64, f64) {
        let (a, b) = (self.data.a, self.data.b);
        if !(t >= a && t <= b) {
            return (0.0, 0.0, 0.0);
        }
        let y = &self.data.values;
        let n = y.len();
        let h = (b - a) / (n - 1) as f64;
        let i = (((t - a) / h).floor() as usize).min(n - 2);
        let x0 = a + i as f64 * h;
        let s = (t - x0) / h;
        let r = 1.0 - s;
        let (m0, m1) = (self.moments[i], self.moments[i + 1]);
        let v = r * y[i] + s * y[i + 1] + h * h / 6.0 * ((r * r * r - r) * m0 + (s * s * s - s) * m1);
        let d1 = (y[i + 1] - y[i]) / h + h / 6.0 * (-(3.0 * r * r - 1.0) * m0 + (3.0 * s * s - 1.0) * m1);
        let d2 = r * m0 + s * m1;
        (v, d1, d2)
    }
}

/// A C² function on `[alpha, beta]`, the object of the cancellation lemmas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub alpha: f64,
    pub beta: f64,
    pub profile: Profile,
}

/// Endpoint and extremum flags found by a dense scan of a test function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HypothesisScan {
    pub alpha_value: f64,
    pub beta_value: f64,
    pub alpha_slope: f64,
    pub beta_slope: f64,
    pub min: f64,
    pub max: f64,
    pub alpha_critical: bool,
    pub beta_critical: bool,
    pub alpha_is_min: bool,
    pub alpha_is_max: bool,
    pub beta_is_min: bool,
    pub beta_is_max: bool,
    pub equal_ends: bool,
    /// Whether `F′ ≥ 0` at every probe.
    pub increasing: bool,
}

/// Endpoints count as critical when `|F′| ≤ 1e-10`.
pub const CRITICAL_ENDPOINT_TOL: f64 = 1e-10;

const SCAN_POINTS: usize = 4001;

impl TestFunction {
    pub fn new(alpha: f64, beta: f64, profile: Profile) -> Result<Self> {
        if !(alpha.is_finite() && beta.is_finite() && alpha < beta) {
            return Err(Error::Precondition(format!("test interval needs alpha < beta, got [{alpha}, {beta}]")));
        }
        Ok(Self { alpha, beta, profile })
    }

    pub fn gamma(&self) -> f64 {
        self.beta - self.alpha
    }

    pub fn scan(&self) -> HypothesisScan {
        let (a, b) = (self.alpha, self.beta);
        let (fa, da, _) = self.profile.jet(a);
        let (fb, db, _) = self.profile.jet(b);
        let mut min = fa.min(fb);
        let mut max = fa.max(fb);
        let mut slope_min = da.min(db);
        let mut scale = fa.abs().max(fb.abs());
        let mut slope_scale = da.abs().max(db.abs());
        for i in 1..SCAN_POINTS - 1 {
            let t = a + (b - a) * i as f64 / (SCAN_POINTS - 1) as f64;
            let (v, d, _) = self.profile.jet(t);
            min = min.min(v);
            max = max.max(v);
            slope_min = slope_min.min(d);
            scale = scale.max(v.abs());
            slope_scale = slope_scale.max(d.abs());
        }
        let tol = 1e-12 * (1.0 + scale);
        HypothesisScan {
            alpha_value: fa,
            beta_value: fb,
            alpha_slope: da,
            beta_slope: db,
            min,
            max,
            alpha_critical: da.abs() <= CRITICAL_ENDPOINT_TOL,
            beta_critical: db.abs() <= CRITICAL_ENDPOINT_TOL,
            alpha_is_min: fa <= min + tol,
            alpha_is_max: fa >= max - tol,
            beta_is_min: fb <= min + tol,
            beta_is_max: fb >= max - tol,
            equal_ends: (fa - fb).abs() <= tol,
            increasing: slope_min >= -1e-12 * (1.0 + slope_scale),
        }
    }
}

impl Smooth for TestFunction {
    fn value(&self, t: f64) -> f64 {
        self.profile.value(t)
    }
    fn d1(&self, t: f64) -> f64 {
        self.profile.d1(t)
    }
    fn d2(&self, t: f64) -> f64 {
        self.profile.d2(t)
    }
    fn support(&self) -> Option<(f64, f64)> {
        self.profile.support()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(p: &Profile, ts: &[f64]) {
        for &t in ts {
            let h = 1e-5;
            let (_, d1, d2) = p.jet(t);
            let fd1 = (p.value(t + h) - p.value(t - h)) / (2.0 * h);
            let fd2 = (p.d1(t + h) - p.d1(t - h)) / (2.0 * h);
            assert!((d1 - fd1).abs() < 1e-5 * (1.0 + d1.abs()), "{p:?} d1 at {t}: {d1} vs {fd1}");
            assert!((d2 - fd2).abs() < 1e-5 * (1.0 + d2.abs()), "{p:?} d2 at {t}: {d2} vs {fd2}");
        }
    }

    #[test]
    fn derivatives_match_differences() {
        let ts = [-0.7, -0.31, 0.05, 0.2, 0.44, 0.9];
        fd_check(&Profile::SinSquared { omega: 3.0 }, &ts);
        fd_check(&Profile::OneMinusCos { omega: 5.0, shift: 0.1 }, &ts);
        fd_check(&Profile::Smoothstep { start: -0.5, width: 1.2, height: 2.0 }, &ts);
        fd_check(&Profile::Smootherstep { start: -0.5, width: 1.2, height: -1.0 }, &ts);
        fd_check(&Profile::Bump { center: 0.1, width: 0.6, height: 1.5 }, &ts);
        fd_check(&Profile::Polynomial { coeffs: vec![1.0, -2.0, 0.5, 3.0] }, &ts);
    }

    #[test]
    fn bump_peak_and_support() {
        let p = Profile::Bump { center: 0.3, width: 0.2, height: 2.0 };
        assert!((p.value(0.3) - 2.0).abs() < 1e-15);
        assert_eq!(p.value(0.5), 0.0);
        let (lo, hi) = p.support().unwrap();
        assert!((lo - 0.1).abs() < 1e-15 && hi == 0.5);
        let s = Profile::Sum { terms: vec![p, Profile::Bump { center: -1.0, width: 0.5, height: 1.0 }] };
        assert_eq!(s.support(), Some((-1.5, 0.5)));
        let t = Profile::Sum { terms: vec![Profile::Constant { c: 1.0 }] };
        assert_eq!(t.support(), None);
    }

    #[test]
    fn spline_interpolates_and_is_c2() {
        let g = GridFunction::from_fn(0.0, 1.0, 41, |x| (3.0 * x).sin()).unwrap();
        let s = CubicSpline::from_grid(&g);
        for i in 0..41 {
            assert!((s.jet(g.x(i)).0 - g.values()[i]).abs() < 1e-14);
        }
        let knot = g.x(20);
        let l = s.jet(knot - 1e-12);
        let r = s.jet(knot + 1e-12);
        assert!((l.1 - r.1).abs() < 1e-8 && (l.2 - r.2).abs() < 1e-8);
        assert!((s.jet(0.37).0 - (1.11f64).sin()).abs() < 1e-5);
        let json = serde_json::to_string(&Profile::Spline(s.clone())).unwrap();
        let back: Profile = serde_json::from_str(&json).unwrap();
        assert_eq!(back, Profile::Spline(s));
    }

    #[test]
    fn scan_flags() {
        let f = TestFunction::new(0.0, 0.5, Profile::SinSquared { omega: 2.0 * std::f64::consts::PI }).unwrap();
        let s = f.scan();
        assert!(s.alpha_critical && s.beta_critical && s.alpha_is_min && s.beta_is_min && s.equal_ends);
        assert!(!s.alpha_is_max && !s.increasing);
        let g = TestFunction::new(0.0, 0.5, Profile::Smoothstep { start: 0.0, width: 0.5, height: 1.0 }).unwrap();
        let s = g.scan();
        assert!(s.alpha_is_min && s.beta_is_max && s.increasing && s.alpha_critical && s.beta_critical);
    }
}

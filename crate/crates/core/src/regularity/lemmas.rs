//! The three cancellation inequalities on a window `[α, β]` with `β − α < r`,
//! the point-and-sign split that follows from the third, and the
//! change-of-variables identity behind their proofs.

use serde::{Deserialize, Serialize};

use super::profile::{HypothesisScan, Smooth, TestFunction};
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::quad::{self, Estimate, Tolerance};

/// Values below `−VIOLATION_TOL` count as violations.
pub const VIOLATION_TOL: f64 = 1e-8;

fn tol() -> Tolerance {
    Tolerance { abs: 1e-12, rel: 1e-13, max_panels: 4000 }
}

/// `∫_a^b h` treating each listed point inside or at the ends of `[a, b]`
/// as a possible integrable singularity.
pub(crate) fn integrate_with<F: Fn(f64) -> f64>(h: F, a: f64, b: f64, singular: &[f64]) -> Estimate {
    let pts: Vec<f64> = singular.iter().copied().filter(|&s| s >= a && s <= b).collect();
    if pts.is_empty() {
        quad::integrate(h, a, b, tol())
    } else {
        quad::integrate_breakpoints(h, a, b, &pts, tol())
    }
}

/// Like [`integrate_with`] but over panels whose width grows geometrically
/// away from `singular ∪ focus`, from `min_width` up to a quarter of the
/// distance. Suited to mollified grid data, which varies on the mollifier
/// scale near rough points of the source.
pub(crate) fn integrate_graded<F: Fn(f64) -> f64 + Sync>(
    h: F,
    a: f64,
    b: f64,
    singular: &[f64],
    focus: &[f64],
    min_width: f64,
) -> Estimate {
    use rayon::prelude::*;
    if !(b > a) {
        return Estimate::default();
    }
    let pts: Vec<f64> = singular.iter().copied().filter(|&s| s >= a && s <= b).collect();
    let mut cuts = vec![a, b];
    cuts.extend(pts.iter().copied());
    cuts.extend(focus.iter().copied().filter(|&s| s > a && s < b));
    cuts.sort_by(|x, y| x.total_cmp(y));
    cuts.dedup();
    let anchors: Vec<f64> = pts.iter().chain(focus).copied().collect();
    let width = |t: f64| {
        let d = anchors.iter().map(|&p| (t - p).abs()).fold(f64::INFINITY, f64::min);
        (0.25 * d).max(min_width)
    };
    let mut nodes = Vec::new();
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        // march from both ends toward the middle so both ends are graded
        let mid = 0.5 * (lo + hi);
        let mut left = vec![lo];
        let mut t = lo;
        while t < mid {
            t = (t + width(t)).min(mid);
            left.push(t);
        }
        let mut right = Vec::new();
        let mut t = hi;
        while t > mid {
            t = (t - width(t)).max(mid);
            if t > mid {
                right.push(t);
            }
        }
        nodes.extend(left);
        nodes.extend(right.into_iter().rev());
    }
    nodes.push(b);
    nodes.dedup();
    let local = Tolerance { abs: 0.0, rel: 1e-10, max_panels: 16 };
    nodes
        .par_windows(2)
        .map(|w| {
            let (lo, hi) = (w[0], w[1]);
            let sing: Vec<f64> = [lo, hi].into_iter().filter(|p| pts.contains(p)).collect();
            if sing.is_empty() {
                quad::integrate(&h, lo, hi, local)
            } else {
                quad::integrate_breakpoints(&h, lo, hi, &sing, local)
            }
        })
        .reduce(Estimate::default, |x, y| x + y)
}

fn require(cond: bool, clause: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Hypothesis(clause.to_string()))
    }
}

fn require_window(k: &Kernel, f: &TestFunction) -> Result<()> {
    require(f.gamma() < k.r(), &format!("beta - alpha = {} must be below r = {}", f.gamma(), k.r()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvexClause {
    /// `F′(β) = 0`, `x ≥ β`, `x − α < r`: `∫ F′(t) g′(x − t) dt ≥ 0`.
    Right,
    /// `F′(α) = 0`, `x ≤ α`, `β − x < r`: `∫ −F′(t) g′(t − x) dt ≥ 0`.
    Left,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvexCancellation {
    pub clause: ConvexClause,
    pub x: f64,
    pub value: f64,
    pub error: f64,
    pub holds: bool,
    pub scan: HypothesisScan,
}

/// Equal-endpoint minima: the integral against `g′` from a point beyond the
/// critical endpoint is nonnegative.
pub fn check_convex_cancellation(k: &Kernel, f: &TestFunction, x: f64) -> Result<ConvexCancellation> {
    require_window(k, f)?;
    let s = f.scan();
    require(s.equal_ends, "F(alpha) = F(beta)")?;
    require(s.alpha_is_min && s.beta_is_min, "alpha and beta are absolute minima on [alpha, beta]")?;
    let (a, b) = (f.alpha, f.beta);
    let (clause, est) = if x >= b {
        require(s.beta_critical, "F'(beta) = 0")?;
        require(x - a < k.r(), "x - alpha < r")?;
        (ConvexClause::Right, integrate_with(|t| f.d1(t) * k.dg(x - t), a, b, &[x]))
    } else if x <= a {
        require(s.alpha_critical, "F'(alpha) = 0")?;
        require(b - x < k.r(), "beta - x < r")?;
        (ConvexClause::Left, integrate_with(|t| -f.d1(t) * k.dg(t - x), a, b, &[x]))
    } else {
        return Err(Error::Hypothesis(format!("x = {x} must lie outside (alpha, beta)")));
    };
    Ok(ConvexCancellation {
        clause,
        x,
        value: est.value,
        error: est.error,
        holds: est.value >= -VIOLATION_TOL,
        scan: s,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConcaveCancellation {
    pub x: f64,
    pub y: f64,
    pub value: f64,
    pub error: f64,
    pub holds: bool,
    pub scan: HypothesisScan,
}

/// Critical minimum at α: `∫ F′(t)(g′(t − x) − g′(t − y)) dt ≥ 0` for `x ≤ y ≤ α`.
pub fn check_concave_cancellation(k: &Kernel, f: &TestFunction, x: f64, y: f64) -> Result<ConcaveCancellation> {
    require_window(k, f)?;
    let s = f.scan();
    require(s.alpha_is_min, "alpha is an absolute minimum on [alpha, beta]")?;
    require(s.alpha_critical, "F'(alpha) = 0")?;
    require(x <= y && y <= f.alpha, "x <= y <= alpha")?;
    require(f.beta - x < k.r(), "beta - x < r")?;
    let est = integrate_with(|t| f.d1(t) * (k.dg(t - x) - k.dg(t - y)), f.alpha, f.beta, &[x, y]);
    Ok(ConcaveCancellation { x, y, value: est.value, error: est.error, holds: est.value >= -VIOLATION_TOL, scan: s })
}

/// The point `p ∈ {α, β}` and sign for which
/// `±∫ F′(t) d/dt g(|t − p|) dt ≥ |F(β) − F(α)|/2 · (|g′(γ)| + |g′(γ/2)|)`,
/// with `+` when `p` is the maximum point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Basecase {
    pub p: f64,
    pub p_is_max: bool,
    pub sign: i8,
    pub value: f64,
    pub bound: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// α minimum, β maximum: LHS ≥ RHS.
    Increasing,
    /// α maximum, β minimum: LHS ≤ RHS.
    Decreasing,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Rearrangement {
    pub orientation: Orientation,
    pub gamma: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub error: f64,
    pub holds: bool,
    pub basecase: Basecase,
    pub scan: Option<HypothesisScan>,
}

/// `LHS = ∫ F′(t)(|g′(t − α)| + |g′(β − t)|) dt` against
/// `RHS = (F(β) − F(α))(|g′(γ)| + |g′(γ/2)|)`, plus the point-and-sign split.
/// Either endpoint may carry the maximum; the inequality flips with it.
pub fn check_rearrangement_inequality(k: &Kernel, f: &TestFunction) -> Result<Rearrangement> {
    require_window(k, f)?;
    let s = f.scan();
    require(s.alpha_critical && s.beta_critical, "F'(alpha) = F'(beta) = 0")?;
    let orientation = if s.alpha_is_min && s.beta_is_max {
        Orientation::Increasing
    } else if s.alpha_is_max && s.beta_is_min {
        Orientation::Decreasing
    } else {
        return Err(Error::Hypothesis("one endpoint is the absolute minimum and the other the absolute maximum".into()));
    };
    let mut out = rearrangement_on(k, f, f.alpha, f.beta, orientation);
    out.scan = Some(s);
    Ok(out)
}

/// Unchecked core of the rearrangement comparison on `[a, b]` for any smooth `F`.
pub(crate) fn rearrangement_on(k: &Kernel, f: &dyn Smooth, a: f64, b: f64, orientation: Orientation) -> Rearrangement {
    let gamma = b - a;
    let fa = f.value(a);
    let fb = f.value(b);
    let weight = k.dg(gamma).abs() + k.dg(0.5 * gamma).abs();
    let lhs = integrate_with(|t| f.d1(t) * (k.dg(t - a).abs() + k.dg(b - t).abs()), a, b, &[a, b]);
    let rhs = (fb - fa) * weight;
    let holds = match orientation {
        Orientation::Increasing => lhs.value >= rhs - VIOLATION_TOL,
        Orientation::Decreasing => lhs.value <= rhs + VIOLATION_TOL,
    };
    let bound = 0.5 * (fb - fa).abs() * weight;
    let candidate = |p: f64, p_is_max: bool| {
        let sign: i8 = if p_is_max { 1 } else { -1 };
        let est = integrate_with(|t| f.d1(t) * k.dg((t - p).abs()) * (t - p).signum(), a, b, &[p]);
        let value = sign as f64 * est.value;
        (Basecase { p, p_is_max, sign, value, bound, holds: value >= bound - VIOLATION_TOL }, est.error)
    };
    let alpha_is_max = orientation == Orientation::Decreasing;
    let (ca, ea) = candidate(a, alpha_is_max);
    let (cb, eb) = candidate(b, !alpha_is_max);
    let basecase = if ca.value >= cb.value { ca } else { cb };
    Rearrangement {
        orientation,
        gamma,
        lhs: lhs.value,
        rhs,
        error: lhs.error + ea.max(eb),
        holds,
        basecase,
        scan: None,
    }
}

/// The two half-interval estimates for increasing `F`:
/// `∫F′|g′(t−α)| ≥ ΔF₁|g′(γ/2)| + ΔF₂|g′(γ)|` and
/// `∫F′|g′(β−t)| ≥ ΔF₁|g′(γ)| + ΔF₂|g′(γ/2)|`, where ΔF₁, ΔF₂ are the
/// increments over the two halves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfBounds {
    pub from_alpha: (f64, f64),
    pub from_beta: (f64, f64),
    pub holds: bool,
}

pub fn monotone_half_bounds(k: &Kernel, f: &TestFunction) -> Result<HalfBounds> {
    require_window(k, f)?;
    let s = f.scan();
    require(s.increasing, "F is increasing on [alpha, beta]")?;
    let (a, b) = (f.alpha, f.beta);
    let g = f.gamma();
    let m = 0.5 * (a + b);
    let (d1, d2) = (f.value(m) - f.value(a), f.value(b) - f.value(m));
    let (near, far) = (k.dg(0.5 * g).abs(), k.dg(g).abs());
    let la = integrate_with(|t| f.d1(t) * k.dg(t - a).abs(), a, b, &[a]).value;
    let lb = integrate_with(|t| f.d1(t) * k.dg(b - t).abs(), a, b, &[b]).value;
    let ra = d1 * near + d2 * far;
    let rb = d1 * far + d2 * near;
    Ok(HalfBounds {
        from_alpha: (la, ra),
        from_beta: (lb, rb),
        holds: la >= ra - VIOLATION_TOL && lb >= rb - VIOLATION_TOL,
    })
}

/// Maximal subintervals of `[lo, hi]` on which `F′` keeps one sign, split at
/// sign changes located by bisection on `samples` probes.
pub fn monotone_pieces(f: &dyn Smooth, lo: f64, hi: f64, samples: usize) -> Vec<(f64, f64)> {
    let samples = samples.max(2);
    let mut cuts = vec![lo];
    let mut last_sign = 0.0;
    let mut last_t = lo;
    for i in 0..=samples {
        let t = lo + (hi - lo) * i as f64 / samples as f64;
        let d = f.d1(t);
        let sg = if d > 0.0 {
            1.0
        } else if d < 0.0 {
            -1.0
        } else {
            0.0
        };
        if sg != 0.0 {
            if last_sign != 0.0 && sg != last_sign {
                let root = quad::bisect(|u| f.d1(u), last_t, t, 200).unwrap_or(0.5 * (last_t + t));
                cuts.push(root);
            }
            last_sign = sg;
            last_t = t;
        }
    }
    cuts.push(hi);
    cuts.windows(2).filter(|w| w[1] > w[0]).map(|w| (w[0], w[1])).collect()
}

/// Both sides of `∫_lo^hi F′(t) g′(x − t) dt = ∫_{F(lo)}^{F(hi)} g′(x − F⁻¹(z)) dz`
/// on a piece where `F` is monotone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChangeOfVariables {
    pub lo: f64,
    pub hi: f64,
    pub x: f64,
    pub direct: f64,
    pub substituted: f64,
    pub error: f64,
}

pub fn change_of_variables(k: &Kernel, f: &dyn Smooth, lo: f64, hi: f64, x: f64) -> Result<ChangeOfVariables> {
    if x > lo && x < hi {
        return Err(Error::Precondition(format!("x = {x} must lie outside ({lo}, {hi})")));
    }
    let (flo, fhi) = (f.value(lo), f.value(hi));
    let increasing = fhi >= flo;
    let probes = 512;
    for i in 1..probes {
        let t = lo + (hi - lo) * i as f64 / probes as f64;
        let d = f.d1(t);
        if (increasing && d < 0.0) || (!increasing && d > 0.0) {
            return Err(Error::Precondition(format!("F is not monotone on [{lo}, {hi}] (F'({t}) = {d})")));
        }
    }
    let inverse = |z: f64| -> f64 {
        let (mut a, mut b) = (lo, hi);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            if (f.value(m) < z) == increasing {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    };
    let direct = integrate_with(|t| f.d1(t) * k.dg(x - t), lo, hi, &[x]);
    let (zlo, zhi, sign) = if increasing { (flo, fhi, 1.0) } else { (fhi, flo, -1.0) };
    // the inverse has square-root behaviour at critical ends
    let sub = integrate_with(|z| k.dg(x - inverse(z)), zlo, zhi, &[zlo, zhi]);
    Ok(ChangeOfVariables {
        lo,
        hi,
        x,
        direct: direct.value,
        substituted: sign * sub.value,
        error: direct.error + sub.error,
    })
}

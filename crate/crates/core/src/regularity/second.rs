use serde::{Deserialize, Serialize};

use super::lemmas::{integrate_graded, integrate_with};
use super::profile::Smooth;
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::quad::{self, Estimate};

/// `ψ_F″(x)` by the three integral forms valid at a critical point of `F`:
/// `∫F″(t)g(x−t)`, `−∫F′(t) d/dt g(t−x)` and `∫sign(x−t)F′(t)g′(|x−t|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondDerivative {
    pub x: f64,
    pub forms: [f64; 3],
    pub errors: [f64; 3],
    /// `|F′(x)|` and the criticality tolerance it was tested against.
    pub slope: f64,
    pub tol_crit: f64,
    pub max_gap: f64,
    /// Largest pairwise allowance `e_i + e_j + 1e-9·(1 + max|form|)`.
    pub allowance: f64,
    pub agree: bool,
}

const SCAN_POINTS: usize = 4001;

/// `max(1e-10, 1e-6·max|F′|)` over a dense scan of `[lo, hi]`.
pub fn critical_tolerance(f: &dyn Smooth, lo: f64, hi: f64) -> f64 {
    let mut m = 0.0f64;
    for i in 0..SCAN_POINTS {
        let t = lo + (hi - lo) * i as f64 / (SCAN_POINTS - 1) as f64;
        m = m.max(f.d1(t).abs());
    }
    (1e-6 * m).max(1e-10)
}

/// Zeros of `F′` in `[lo, hi]` located by sign changes over `samples`
/// probes and refined by bisection.
pub fn critical_points(f: &dyn Smooth, lo: f64, hi: f64, samples: usize) -> Vec<f64> {
    let samples = samples.max(2);
    let ts: Vec<f64> = (0..=samples).map(|i| lo + (hi - lo) * i as f64 / samples as f64).collect();
    let ds: Vec<f64> = ts.iter().map(|&t| f.d1(t)).collect();
    let mut out = Vec::new();
    for i in 0..samples {
        if ds[i] == 0.0 {
            if i > 0 && ds[i - 1] * ds[i + 1] < 0.0 {
                out.push(ts[i]);
            }
        } else if ds[i] * ds[i + 1] < 0.0 {
            if let Some(r) = quad::bisect(|t| f.d1(t), ts[i], ts[i + 1], 200) {
                out.push(r);
            }
        }
    }
    out
}

pub fn psi_second_derivative_at_critical(k: &Kernel, f: &dyn Smooth, x: f64) -> Result<SecondDerivative> {
    second_derivative(k, f, x, &|h, a, b, s| integrate_with(h, a, b, s))
}

/// Same forms on panels graded toward `x` and the `focus` points, no
/// narrower than `width`; suited to mollified grid data, where the
/// adaptive rule alone cannot see structure on the mollifier scale.
pub fn psi_second_derivative_resolved(
    k: &Kernel,
    f: &dyn Smooth,
    x: f64,
    focus: &[f64],
    width: f64,
) -> Result<SecondDerivative> {
    if !(width > 0.0) {
        return Err(Error::Config(format!("panel width must be positive, got {width}")));
    }
    second_derivative(k, f, x, &|h, a, b, s| integrate_graded(h, a, b, s, focus, width))
}

type Integrator<'a> = dyn Fn(&(dyn Fn(f64) -> f64 + Sync), f64, f64, &[f64]) -> Estimate + 'a;

fn second_derivative(k: &Kernel, f: &dyn Smooth, x: f64, integ: &Integrator<'_>) -> Result<SecondDerivative> {
    let (lo, hi) = f
        .support()
        .ok_or_else(|| Error::Precondition("second derivative needs a compactly supported F".into()))?;
    let tol_crit = critical_tolerance(f, lo, hi);
    let slope = f.d1(x);
    if slope.abs() > tol_crit {
        return Err(Error::NotCritical { slope: slope.abs(), tol: tol_crit });
    }
    let form1 = integ(&|t| f.d2(t) * k.g(x - t), lo, hi, &[x]);
    // the constant part F′(x) of F′ pairs with a principal value taken in
    // closed form; the remainder vanishes linearly at x
    let inside = x > lo && x < hi;
    let pv = if inside { slope * (k.g(x - lo) - k.g(hi - x)) } else { 0.0 };
    let form2 = integ(&|t| -(f.d1(t) - slope) * k.dg(t - x), lo, hi, &[x]);
    let form3 = integ(&|t| (x - t).signum() * (f.d1(t) - slope) * k.dg((x - t).abs()), lo, hi, &[x]);
    let outside = if inside {
        pv
    } else {
        // away from the support the subtraction is not needed
        integ(&|t| -slope * k.dg(t - x), lo, hi, &[x]).value
    };
    let forms = [form1.value, form2.value + outside, form3.value + outside];
    let errors = [form1.error, form2.error, form3.error];
    let scale = forms.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut max_gap = 0.0f64;
    let mut allowance = 0.0f64;
    let mut agree = true;
    for i in 0..3 {
        for j in i + 1..3 {
            let gap = (forms[i] - forms[j]).abs();
            let allow = errors[i] + errors[j] + 1e-9 * (1.0 + scale);
            max_gap = max_gap.max(gap);
            allowance = allowance.max(allow);
            agree &= gap <= allow;
        }
    }
    Ok(SecondDerivative { x, forms, errors, slope: slope.abs(), tol_crit, max_gap, allowance, agree })
}

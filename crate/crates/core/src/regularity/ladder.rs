//! Alternating near-extremal critical points of `f_δ` to the left of a
//! jump point, and the good couple selected among them.
//!
//! Coordinates are relative to the jump point `x̄`, so the ladder lives in
//! `(−η, 0)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::measure::{essential_limits, grid_windows, GridFunction, JumpDiagnostics, WindowEstimate, DEFAULT_DISCARD};
use crate::mollify::{self, Mollified};
use crate::quad;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LadderCase {
    /// `f` even about `x̄` with a left jump.
    SymmetricI,
    /// `f` odd about `x̄`, with a left jump and `l_L⁻ < min{0, l_R⁻}`.
    AntisymmetricII,
}

/// Optional fixed `η` and `δ`, skipping the corresponding search.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LadderHint {
    pub eta: Option<f64>,
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPointLadder {
    pub case: LadderCase,
    pub xbar: f64,
    pub epsilon: f64,
    pub eta: f64,
    pub delta: f64,
    /// One-sided essential liminf/limsup from the left and the jump `h_L`.
    pub l_minus: f64,
    pub l_plus: f64,
    pub h_l: f64,
    pub c_points: Vec<f64>,
    pub p_points: Vec<f64>,
    /// `f_δ(p_i)`.
    pub p_values: Vec<f64>,
    pub q_points: Vec<f64>,
    pub n: usize,
    /// Good-couple index, 1-based as in the construction.
    pub j: usize,
    pub good_couple: (f64, f64),
    pub gamma: f64,
    pub gamma_bar: f64,
    pub c_const: f64,
    /// `ε|g′(γ̄/2)| − C`.
    pub margin: f64,
    pub sample_spacing: f64,
    /// Largest `|f_δ′(p_i)|` after refinement.
    pub max_critical_slope: f64,
}

fn seg_ok(short: f64, long: f64) -> bool {
    short <= 2.0 * long * (1.0 + 1e-12)
}

impl CriticalPointLadder {
    /// `p_i` with the construction's 1-based index.
    pub fn p(&self, i: usize) -> f64 {
        self.p_points[i - 1]
    }

    /// Lengths of the good segment and of its two neighbours.
    pub fn segments(&self) -> (f64, f64, f64) {
        let j = self.j;
        let seg = |i: usize| self.p(i) - self.p(i + 1);
        let q1 = self.q_points[0];
        if self.good_couple == (self.p(1), q1) {
            // [p₂, p₁] on the left and [q₁, q₂] on the right, equal by oddness
            return (q1 - self.p(1), seg(1), self.q_points[1] - q1);
        }
        let right = if j > 1 { seg(j - 1) } else { q1 - self.p(1) };
        (seg(j), seg(j + 1), right)
    }

    /// Names of the violated ladder invariants; empty when all hold.
    pub fn violated_invariants(&self, k: &Kernel) -> Vec<String> {
        let mut bad = Vec::new();
        let p = &self.p_points;
        if self.n < 10 || p.len() != self.n {
            bad.push(format!("N >= 10 (N = {})", self.n));
        }
        if p.windows(2).any(|w| !(w[1] < w[0])) {
            bad.push("p points strictly decreasing".into());
        }
        if p.iter().any(|&x| !(x > -self.eta && x < 0.0)) {
            bad.push("p points inside (-eta, 0)".into());
        }
        if p.len() < 2 {
            return bad;
        }
        if !(p[0] > -self.eta / 16.0 && p[0] < 0.0) {
            bad.push("p1 in (-eta/16, 0)".into());
        }
        if !(p[1] > -self.eta / 8.0 && p[1] < 0.0) {
            bad.push("p2 in (-eta/8, 0)".into());
        }
        for (i, v) in self.p_values.iter().enumerate() {
            let odd = i % 2 == 0;
            if odd && !(*v <= self.l_minus + self.epsilon) {
                bad.push(format!("alternation: f_delta(p{}) <= l_L^- + eps", i + 1));
            }
            if !odd && !(*v >= self.l_plus - self.epsilon) {
                bad.push(format!("alternation: f_delta(p{}) >= l_L^+ - eps", i + 1));
            }
        }
        let j = self.j;
        if j == 0 || j + 2 > p.len() {
            bad.push(format!("good-couple index j = {j} out of range"));
            return bad;
        }
        let seg = |i: usize| self.p(i) - self.p(i + 1);
        if !(seg(j + 1) >= 0.5 * seg(j)) {
            bad.push("left-cond".into());
        }
        if j > 1 && !(seg(j - 1) >= 0.5 * seg(j)) {
            bad.push("right-cond".into());
        }
        let (good, left, right) = self.segments();
        if !(seg_ok(good, left) && seg_ok(good, right)) {
            bad.push("good segment at most twice each neighbouring segment".into());
        }
        if !(self.epsilon * k.dg(0.5 * self.gamma_bar).abs() >= self.c_const) {
            bad.push("eps |g'(gamma_bar/2)| >= C(eta, D, M, g)".into());
        }
        let q = &self.q_points;
        let sym_ok = match self.case {
            LadderCase::SymmetricI => q.len() == 1 && q[0] == -p[1],
            LadderCase::AntisymmetricII => q.len() == 2 && q[0] == -p[0] && q[1] == -p[1],
        };
        if !sym_ok {
            bad.push("q points mirror the p points".into());
        }
        bad
    }
}

fn max_abs_asymmetry(f: &GridFunction, xbar: f64, odd: bool) -> f64 {
    let reach = (xbar - f.a()).min(f.b() - xbar);
    let sign = if odd { -1.0 } else { 1.0 };
    (0..f.n())
        .filter(|&i| (f.x(i) - xbar).abs() < reach)
        .map(|i| (f.values()[i] - sign * f.eval(2.0 * xbar - f.x(i))).abs())
        .fold(0.0, f64::max)
}

/// Whether a per-window quantity stays put as the window shrinks: above
/// `floor` on the finest window and at least 3/4 of its value two windows
/// (4× wider) out. A Lipschitz profile would have dropped to about 1/4.
pub fn persists(values: &[f64], floor: f64) -> bool {
    let n = values.len();
    let Some(&last) = values.last() else { return false };
    if !(last > floor) {
        return false;
    }
    if n < 3 {
        return true;
    }
    last >= 0.75 * values[n - 3]
}

/// Left jumps `l_L⁺ − l_L⁻` per window, coarse to fine.
pub fn left_jumps(d: &JumpDiagnostics) -> Vec<f64> {
    d.windows.iter().map(|w| w.left.1 - w.left.0).collect()
}

pub fn right_jumps(d: &JumpDiagnostics) -> Vec<f64> {
    d.windows.iter().map(|w| w.right.1 - w.right.0).collect()
}

/// `|mid_L − mid_R|` per window, the discrepancy between the two sides.
pub fn side_gaps(d: &JumpDiagnostics) -> Vec<f64> {
    d.windows.iter().map(|w| 0.5 * ((w.left.0 + w.left.1) - (w.right.0 + w.right.1)).abs()).collect()
}

/// `(l_L⁻, l_L⁺, l_R⁻)` for the ladder. When the window scan did not
/// stabilize, the finest window in which the trim removes at least one
/// sample per side stands in for the finest window, whose handful of
/// samples misses the extremes of an oscillating profile.
fn ladder_limits(d: &JumpDiagnostics) -> (f64, f64, f64) {
    if d.stabilized {
        return (d.l_L_minus, d.l_L_plus, d.l_R_minus);
    }
    let active = |w: &&WindowEstimate| (w.left_samples.min(w.right_samples) as f64) * d.discard_fraction >= 1.0;
    match d.windows.iter().rev().find(active) {
        Some(w) => (w.left.0, w.left.1, w.right.0),
        None => (d.l_L_minus, d.l_L_plus, d.l_R_minus),
    }
}

struct Built {
    c: Vec<f64>,
    p: Vec<f64>,
    pv: Vec<f64>,
    max_slope: f64,
}

/// Runs the `C_i`, `p_i` recursion on samples `v[k] = f_δ(−k·s)`.
fn construct(fd: &Mollified<'_>, xbar: f64, s: f64, v: &[f64], lo_thr: f64, hi_thr: f64) -> Built {
    let t = |k: usize| -(k as f64) * s;
    let kk = v.len();
    // leftmost tie-break: among equal extremes keep the largest index
    let argext = |from: usize, to: usize, max: bool| -> usize {
        let mut best = from;
        for k in from..=to {
            let better = if max { v[k] >= v[best] } else { v[k] <= v[best] };
            if better {
                best = k;
            }
        }
        best
    };
    let mut c_idx = Vec::new();
    let mut p_idx = Vec::new();
    let mut runmin = f64::INFINITY;
    for k in 0..kk {
        runmin = runmin.min(v[k]);
        if v[k] >= hi_thr && runmin <= lo_thr {
            c_idx.push(k);
            break;
        }
    }
    if let Some(&c1) = c_idx.first() {
        p_idx.push(argext(0, c1, false));
        loop {
            let i = p_idx.len() + 1;
            let want_max = i % 2 == 0;
            let from = *c_idx.last().unwrap();
            let next = (from..kk).find(|&k| if want_max { v[k] <= lo_thr } else { v[k] >= hi_thr });
            let Some(ci) = next else { break };
            c_idx.push(ci);
            p_idx.push(argext(*p_idx.last().unwrap(), ci, want_max));
        }
    }
    let mut p = Vec::with_capacity(p_idx.len());
    let mut pv = Vec::with_capacity(p_idx.len());
    let mut max_slope = 0.0f64;
    for (i, &k) in p_idx.iter().enumerate() {
        let want_max = i % 2 == 1;
        let mut x = t(k);
        if k > 0 && k + 1 < kk {
            let (lo, hi) = (t(k + 1), t(k - 1));
            if let Some(r) = quad::bisect(|u| fd.d1(xbar + u), lo, hi, 200) {
                let fr = fd.value(xbar + r);
                if (want_max && fr >= v[k]) || (!want_max && fr <= v[k]) {
                    x = r;
                }
            }
        }
        max_slope = max_slope.max(fd.d1(xbar + x).abs());
        p.push(x);
        pv.push(fd.value(xbar + x));
    }
    Built { c: c_idx.iter().map(|&k| t(k)).collect(), p, pv, max_slope }
}

/// Builds the ladder for `f` at `x̄`: jump data from the essential limits,
/// `ε` from the case formula with safety factor 0.9, `η` by halving from
/// `r/8` until the band clause and the `Λ̄` ratio bound hold, then `δ` by
/// halving from `η/2` down to 8 grid spacings until the construction
/// yields `N ≥ 10` points, a good couple and `ε|g′(γ̄/2)| ≥ C(η, D, M, g)`.
pub fn build_ladder(
    k: &Kernel,
    f: &GridFunction,
    xbar: f64,
    case: LadderCase,
    hint: LadderHint,
) -> Result<CriticalPointLadder> {
    let m = f.sup_abs();
    let h = f.h();
    let diag = essential_limits(f, xbar, &grid_windows(f, xbar))?;
    if !persists(&left_jumps(&diag), diag.tolerance + 1e-3 * m) {
        return Err(Error::NoJump);
    }
    let sym_tol = 1e-8 * m.max(1e-300);
    match case {
        LadderCase::SymmetricI => {
            let asym = max_abs_asymmetry(f, xbar, false);
            if asym > sym_tol {
                return Err(Error::Precondition(format!("f is not even about {xbar} (max asymmetry {asym:e})")));
            }
        }
        LadderCase::AntisymmetricII => {
            let asym = max_abs_asymmetry(f, xbar, true);
            if asym > sym_tol {
                return Err(Error::Precondition(format!("f is not odd about {xbar} (max asymmetry {asym:e})")));
            }
        }
    }
    let (l_minus, l_plus, l_r_minus) = ladder_limits(&diag);
    let h_l = l_plus - l_minus;
    if case == LadderCase::AntisymmetricII && !(l_minus < 0.0f64.min(l_r_minus)) {
        return Err(Error::Precondition(format!(
            "case II needs l_L^- < min(0, l_R^-), got l_L^- = {l_minus}, l_R^- = {l_r_minus}"
        )));
    }
    let lb = k.lambda_bar();
    let epsilon = 0.9
        * match case {
            LadderCase::SymmetricI => (lb - 1.0) * h_l / (10.0 * lb + 6.0),
            LadderCase::AntisymmetricII => {
                let c = (h_l / (4.0 * m)).min(2.0);
                let tail = 1.0 - mollify::rho_cdf(1.0 - c);
                ((lb - 1.0) * h_l / (18.0 * lb + 6.0)).min(0.5 * (l_r_minus - l_minus) * tail)
            }
        };
    if !(epsilon > 0.0) {
        return Err(Error::LadderUnresolved(format!("epsilon = {epsilon} is not positive")));
    }

    let reach = (xbar - f.a()).min(f.b() - xbar);
    let band_ok = |eta: f64| -> bool {
        let idx: Vec<usize> = (0..f.n()).filter(|&i| f.x(i) > xbar - 2.0 * eta && f.x(i) < xbar).collect();
        if idx.len() < 8 {
            return false;
        }
        let inside = idx
            .iter()
            .filter(|&&i| {
                let v = f.values()[i];
                v > l_minus - epsilon && v < l_plus + epsilon
            })
            .count();
        inside as f64 >= (1.0 - DEFAULT_DISCARD) * idx.len() as f64
    };
    let eta_ok = |eta: f64| eta < k.r() / 4.0 && 2.0 * eta < reach && band_ok(eta) && k.good_lambda_violation(eta).is_none();
    let eta = match hint.eta {
        Some(eta) => {
            if !eta_ok(eta) {
                return Err(Error::LadderUnresolved(format!("eta = {eta} fails the band clause or the ratio bound")));
            }
            eta
        }
        None => {
            let mut eta = k.r() / 8.0;
            loop {
                if eta_ok(eta) {
                    break eta;
                }
                eta *= 0.5;
                if 2.0 * eta < 8.0 * h {
                    return Err(Error::LadderUnresolved("band clause and ratio bound for eta".into()));
                }
            }
        }
    };

    let c_const = k.ladder_constant(eta, f.b() - f.a(), m)?;
    let floor = 8.0 * h;
    let mut delta = hint.delta.unwrap_or(0.5 * eta);
    let mut last_fail = String::from("delta below 8 grid spacings");
    loop {
        if delta < floor * (1.0 - 1e-12) {
            return Err(Error::LadderUnresolved(last_fail));
        }
        match attempt(k, f, xbar, case, eta, delta, epsilon, (l_minus, l_plus, h_l), c_const, reach) {
            Ok(l) => return Ok(l),
            Err(reason) => {
                log::debug!("ladder at delta = {delta:e}: {reason}");
                if hint.delta.is_some() {
                    return Err(Error::LadderUnresolved(reason));
                }
                last_fail = reason;
            }
        }
        delta *= 0.5;
    }
}

#[allow(clippy::too_many_arguments)]
fn attempt(
    k: &Kernel,
    f: &GridFunction,
    xbar: f64,
    case: LadderCase,
    eta: f64,
    delta: f64,
    epsilon: f64,
    (l_minus, l_plus, h_l): (f64, f64, f64),
    c_const: f64,
    reach: f64,
) -> std::result::Result<CriticalPointLadder, String> {
    if !(delta < 0.25 * reach) {
        return Err("delta < min(|a|, |b|)/4".into());
    }
    let fd = Mollified::new(f, delta).map_err(|e| e.to_string())?;
    let s = f.h().max(delta / 32.0);
    let count = (eta / s).floor() as usize;
    let sample = |r: std::ops::RangeInclusive<usize>| -> Vec<f64> {
        r.into_par_iter().map(|i| fd.value(xbar - i as f64 * s)).collect()
    };
    // p₁ and p₂ reach the thresholds inside (−η/8, 0]; test that prefix first
    let k8 = count / 8;
    let mut v = sample(0..=k8);
    let lo_hit = v[..=(count / 16)].iter().any(|&x| x <= l_minus + epsilon);
    let hi_hit = v.iter().any(|&x| x >= l_plus - epsilon);
    if !(lo_hit && hi_hit) {
        return Err("p1 in (-eta/16, 0) and p2 in (-eta/8, 0)".into());
    }
    v.extend(sample(k8 + 1..=count));
    let built = construct(&fd, xbar, s, &v, l_minus + epsilon, l_plus - epsilon);
    let n = built.p.len();
    if n < 10 {
        return Err(format!("N >= 10 ladder points (found {n})"));
    }
    let p = &built.p;
    if !(p[0] > -eta / 16.0) || !(p[1] > -eta / 8.0) {
        return Err("p1 in (-eta/16, 0) and p2 in (-eta/8, 0)".into());
    }
    let seg = |i: usize| p[i - 1] - p[i];
    let j = (1..n - 1)
        .find(|&j| seg(j + 1) >= 0.5 * seg(j) && (j == 1 || seg(j - 1) >= 0.5 * seg(j)))
        .ok_or_else(|| "good-couple index (left-cond and right-cond)".to_string())?;
    let q_points = match case {
        LadderCase::SymmetricI => vec![-p[1]],
        LadderCase::AntisymmetricII => vec![-p[0], -p[1]],
    };
    let q1 = q_points[0];
    let good_couple = if case == LadderCase::AntisymmetricII && j == 1 && !(p[0] - p[1] < q1 - p[0]) {
        (p[0], q1)
    } else {
        (p[j], p[j - 1])
    };
    let gamma = good_couple.1 - good_couple.0;
    let gamma_bar = (p[0] - p[1]).abs().max((q1 - p[0]).abs());
    let margin = epsilon * k.dg(0.5 * gamma_bar).abs() - c_const;
    if !(margin >= 0.0) {
        return Err(format!("eps |g'(gamma_bar/2)| >= C (short by {:e})", -margin));
    }
    let ladder = CriticalPointLadder {
        case,
        xbar,
        epsilon,
        eta,
        delta,
        l_minus,
        l_plus,
        h_l,
        c_points: built.c,
        p_points: built.p.clone(),
        p_values: built.pv,
        q_points,
        n,
        j,
        good_couple,
        gamma,
        gamma_bar,
        c_const,
        margin,
        sample_spacing: s,
        max_critical_slope: built.max_slope,
    };
    let bad = ladder.violated_invariants(k);
    if let Some(first) = bad.first() {
        return Err(first.clone());
    }
    Ok(ladder)
}

/// Running-minimum scans to either side of the good couple: `Z` collects
/// `t ∈ [−η, p_{j+1}]` with `F(t) < F(s)` for all `s ∈ (t, p_{j+1}]`, `W`
/// collects `t ∈ (p_j, η]` with `F(t) < F(s)` for all `s ∈ (p_j, t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunningMinScan {
    pub z_intervals: Vec<(f64, f64)>,
    /// Spread of `F` over `Z`.
    pub z_value_range: f64,
    pub w_intervals: Vec<(f64, f64)>,
    pub w_value_range: f64,
}

/// Scans `F` sampled at spacing `s` (relative coordinates) between `−η`,
/// the couple `lo < hi`, and `η`.
pub fn running_min_scan(f: impl Fn(f64) -> f64, lo: f64, hi: f64, eta: f64, s: f64) -> RunningMinScan {
    let runs = |ts: Vec<f64>, anchor: Option<f64>| -> (Vec<(f64, f64)>, f64) {
        let mut m = anchor.unwrap_or(f64::INFINITY);
        let mut out: Vec<(f64, f64)> = Vec::new();
        let (mut vmin, mut vmax) = (f64::INFINITY, f64::NEG_INFINITY);
        let mut open: Option<(f64, f64)> = None;
        for t in ts {
            let v = f(t);
            if v < m {
                vmin = vmin.min(v);
                vmax = vmax.max(v);
                open = Some(match open {
                    Some((a, _)) => (a, t),
                    None => (t, t),
                });
            } else if let Some(iv) = open.take() {
                out.push(iv);
            }
            m = m.min(v);
        }
        if let Some(iv) = open {
            out.push(iv);
        }
        (out, if vmax >= vmin { vmax - vmin } else { 0.0 })
    };
    let nz = ((lo + eta) / s).floor().max(0.0) as usize;
    let z_ts: Vec<f64> = (1..=nz).map(|i| lo - i as f64 * s).collect();
    let (mut z, zr) = runs(z_ts, Some(f(lo)));
    for iv in z.iter_mut() {
        *iv = (iv.1, iv.0);
    }
    z.reverse();
    let nw = ((eta - hi) / s).floor().max(0.0) as usize;
    let w_ts: Vec<f64> = (1..=nw).map(|i| hi + i as f64 * s).collect();
    let (w, wr) = runs(w_ts, None);
    RunningMinScan { z_intervals: z, z_value_range: zr, w_intervals: w, w_value_range: wr }
}

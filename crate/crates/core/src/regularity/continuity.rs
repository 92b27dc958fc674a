//! Jump diagnostics for densities with constant potential, and the
//! second-derivative bookkeeping at a good couple when a jump is flagged.

use serde::{Deserialize, Serialize};

use super::ladder::{
    build_ladder, left_jumps, persists, right_jumps, running_min_scan, side_gaps, CriticalPointLadder, LadderCase,
    LadderHint, RunningMinScan,
};
use super::lemmas::{integrate_graded, rearrangement_on, Basecase, Orientation};
use super::profile::Smooth;
use super::second::{psi_second_derivative_resolved, SecondDerivative};
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::measure::{essential_limits, grid_windows, symmetrize, GridDensity, GridFunction};
use crate::mollify::Mollified;
use crate::solver::{verify_el, ELReport};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuityOptions {
    /// EL tolerance for the constant-potential precondition.
    pub el_tol: f64,
    /// Jump threshold relative to `sup f`.
    pub jump_tol: f64,
    /// Attempt a ladder where a jump is flagged.
    pub ladder: bool,
    /// Ladder case; chosen from the symmetric parts when `None`.
    #[serde(default)]
    pub case: Option<LadderCase>,
}

impl Default for ContinuityOptions {
    fn default() -> Self {
        Self { el_tol: 1e-2, jump_tol: 1e-3, ladder: true, case: None }
    }
}

/// `f_δ` shifted so the jump point sits at 0, negated when `sign < 0`.
struct Local<'a> {
    fd: Mollified<'a>,
    xbar: f64,
    sign: f64,
}

impl Smooth for Local<'_> {
    fn value(&self, t: f64) -> f64 {
        self.sign * self.fd.value(self.xbar + t)
    }
    fn d1(&self, t: f64) -> f64 {
        self.sign * self.fd.d1(self.xbar + t)
    }
    fn d2(&self, t: f64) -> f64 {
        self.sign * self.fd.d2(self.xbar + t)
    }
    fn support(&self) -> Option<(f64, f64)> {
        let (a, b) = self.fd.support();
        Some((a - self.xbar, b - self.xbar))
    }
}

/// A term of the second-derivative split with its lower bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundedTerm {
    pub value: f64,
    pub error: f64,
    pub bound: f64,
    pub holds: bool,
}

impl BoundedTerm {
    fn new(value: f64, error: f64, bound: f64) -> Self {
        Self { value, error, bound, holds: value + error >= bound }
    }
}

/// `s·ψ″(p) = I + J + K` at the base point `p` of the good couple, with
/// `s = +1` when `p` is a minimum of `f_δ` and `−1` when it is a maximum.
/// `J` integrates over the good segment, `I` over `(−η, p)` or `(p, η)` on
/// the side away from the segment, `K` over the rest of `(−η, η)`; the part
/// outside `(−η, η)` is `far`, bounded via integration by parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderEvaluation {
    pub ladder: CriticalPointLadder,
    pub base: f64,
    pub base_is_max: bool,
    pub basecase: Basecase,
    pub psi_second: SecondDerivative,
    pub i: BoundedTerm,
    pub j: BoundedTerm,
    pub k: BoundedTerm,
    pub far: BoundedTerm,
    /// Sum of the four lower bounds.
    pub margin: f64,
    pub scan: RunningMinScan,
}

/// Splits `ψ_{f_δ}″` at the good couple of `ladder` built on `f`.
pub fn evaluate_ladder(k: &Kernel, f: &GridFunction, ladder: &CriticalPointLadder) -> Result<LadderEvaluation> {
    let fd = Mollified::new(f, ladder.delta)?;
    let (lo, hi) = ladder.good_couple;
    // p_i with odd i are the near-minima
    let lo_is_min = fd.value(ladder.xbar + lo) <= fd.value(ladder.xbar + hi);
    let sign = if lo_is_min { 1.0 } else { -1.0 };
    let local = Local { fd, xbar: ladder.xbar, sign };
    let rearr = rearrangement_on(k, &local, lo, hi, Orientation::Increasing);
    let base = rearr.basecase.p;
    let base_is_lo = base == lo;
    // the base point is a minimum of s·f_δ exactly when it is lo
    let base_sign = if base_is_lo { sign } else { -sign };
    let width = 0.25 * ladder.delta;
    let psi_second = psi_second_derivative_resolved(k, &local, base, &[0.0, lo, hi], width)?;
    let (a, b) = local.support().expect("mollified support is compact");
    let eta = ladder.eta;
    let integrand = |t: f64| base_sign * sign * (base - t).signum() * local.d1(t) * k.dg((base - t).abs());
    let part = |x: f64, y: f64| integrate_graded(integrand, x.max(a), y.min(b), &[base], &[0.0, lo, hi], width);
    let seg = part(lo, hi);
    let (near, far_side) = if base_is_lo { (part(-eta, lo), part(hi, eta)) } else { (part(hi, eta), part(-eta, lo)) };
    let outer = part(a, -eta) + part(eta, b);

    let eps = ladder.epsilon;
    let h_l = ladder.h_l;
    let gamma = ladder.gamma;
    let (g1, g2) = (k.dg(gamma).abs(), k.dg(0.5 * gamma).abs());
    let m = f.sup_abs();
    let tv = k.gprime_total_variation(0.5 * eta, f.b() - f.a() + 2.0 * ladder.delta)?;
    let sup_dg = k.dg(0.5 * eta).abs().max(k.dg(f.b() - f.a() + 2.0 * ladder.delta).abs());
    let i = BoundedTerm::new(near.value, near.error, -3.0 * eps * g2);
    let j = BoundedTerm::new(seg.value, seg.error, 0.5 * (h_l - 2.0 * eps) * (g1 + g2));
    let kk = BoundedTerm::new(far_side.value, far_side.error, -(h_l + 2.0 * eps) * g1 - eps * g2);
    // each outer piece: |∫F′g′| ≤ M(TV + 2 sup|g′|) after integrating by parts
    let far = BoundedTerm::new(outer.value, outer.error, -2.0 * m * (tv + 2.0 * sup_dg));
    let margin = i.bound + j.bound + kk.bound + far.bound;
    let scan_f = Local { fd, xbar: ladder.xbar, sign: base_sign * sign };
    let scan = running_min_scan(|t| scan_f.value(t), lo, hi, eta, ladder.sample_spacing);
    Ok(LadderEvaluation {
        ladder: ladder.clone(),
        base,
        base_is_max: base_sign * sign < 0.0,
        basecase: rearr.basecase,
        psi_second,
        i,
        j,
        k: kk,
        far,
        margin,
        scan,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum LadderOutcome {
    Built(Box<LadderEvaluation>),
    Failed { case: LadderCase, reason: String },
}

/// Jump estimates at one point on one refinement level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelJump {
    pub n: usize,
    pub h_l: f64,
    pub h_r: f64,
    pub side_gap: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointReport {
    pub x: f64,
    /// Coarse to fine.
    pub levels: Vec<LevelJump>,
    /// `h_L` and `h_R` do not grow under refinement beyond `1e-3·M`.
    pub monotone: bool,
    pub jump_flagged: bool,
    /// Jumps of the even and odd parts about `x` at 0 from the left.
    pub even_jump: f64,
    pub odd_jump: f64,
    pub ladder: Option<LadderOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuityReport {
    pub el: ELReport,
    pub options: ContinuityOptions,
    pub points: Vec<PointReport>,
    pub jumps_detected: usize,
    pub continuous: bool,
}

const AUTO_POINTS: usize = 9;

fn jump_flags(f: &GridFunction, x: f64, jump_tol: f64) -> Result<(LevelJump, bool)> {
    let d = essential_limits(f, x, &grid_windows(f, x))?;
    let floor = jump_tol * f.sup_abs() + d.tolerance;
    let flagged = persists(&left_jumps(&d), floor) || persists(&right_jumps(&d), floor) || persists(&side_gaps(&d), floor);
    let gap = side_gaps(&d).last().copied().unwrap_or(0.0);
    Ok((LevelJump { n: f.n(), h_l: d.h_L, h_r: d.h_R, side_gap: gap, tolerance: d.tolerance }, flagged))
}

fn try_ladder(
    k: &Kernel,
    f: &GridFunction,
    x: f64,
    jump_tol: f64,
    forced: Option<LadderCase>,
) -> Result<(f64, f64, LadderOutcome)> {
    let (even, odd) = symmetrize(f, x)?;
    let m = f.sup_abs();
    let left_jump = |g: &GridFunction| -> Result<(f64, bool)> {
        let d = essential_limits(g, 0.0, &grid_windows(g, 0.0))?;
        Ok((d.h_L, persists(&left_jumps(&d), jump_tol * m + d.tolerance)))
    };
    let (even_jump, even_persists) = left_jump(&even)?;
    let (odd_jump, _) = left_jump(&odd)?;
    let use_even = forced.map(|c| c == LadderCase::SymmetricI).unwrap_or(even_persists);
    let (case, part) = if use_even {
        (LadderCase::SymmetricI, even)
    } else {
        // case II wants the lower left limit below zero; flip if needed
        let d = essential_limits(&odd, 0.0, &grid_windows(&odd, 0.0))?;
        let part = if d.l_L_minus < 0.0f64.min(d.l_R_minus) { odd } else { odd.scaled(-1.0) };
        (LadderCase::AntisymmetricII, part)
    };
    let outcome = match build_ladder(k, &part, 0.0, case, LadderHint::default()).and_then(|l| evaluate_ladder(k, &part, &l)) {
        Ok(ev) => LadderOutcome::Built(Box::new(ev)),
        Err(e) => LadderOutcome::Failed { case, reason: e.to_string() },
    };
    Ok((even_jump, odd_jump, outcome))
}

/// Runs the jump diagnostics on `levels` (the same density at increasing
/// resolution, coarse to fine) at `points`, or at 9 points spread over the
/// interior of the support when `points` is empty. The finest level must
/// pass the EL check.
pub fn continuity_report(
    k: &Kernel,
    levels: &[GridDensity],
    points: &[f64],
    opts: &ContinuityOptions,
) -> Result<ContinuityReport> {
    let finest = levels.last().ok_or_else(|| Error::Config("continuity report needs at least one level".into()))?;
    let el = verify_el(k, finest, opts.el_tol);
    if !el.passed {
        return Err(Error::NotPotentialConstant { residual: el.el_residual, tol: opts.el_tol });
    }
    let (s0, s1) = el.support_interval;
    let pts: Vec<f64> = if points.is_empty() {
        (1..=AUTO_POINTS).map(|i| s0 + (s1 - s0) * i as f64 / (AUTO_POINTS + 1) as f64).collect()
    } else {
        points.to_vec()
    };
    let m = finest.sup();
    let mut reports = Vec::with_capacity(pts.len());
    for &x in &pts {
        let mut lv = Vec::with_capacity(levels.len());
        let mut flagged = false;
        for g in levels {
            let (j, fl) = jump_flags(g, x, opts.jump_tol)?;
            lv.push(j);
            flagged = fl;
        }
        let slack = 1e-3 * m;
        let monotone = lv.windows(2).all(|w| w[1].h_l <= w[0].h_l + slack && w[1].h_r <= w[0].h_r + slack);
        let (even_jump, odd_jump, ladder) = if flagged && opts.ladder {
            let (e, o, l) = try_ladder(k, finest, x, opts.jump_tol, opts.case)?;
            (e, o, Some(l))
        } else {
            let (even, odd) = symmetrize(finest, x)?;
            let hl = |g: &GridFunction| essential_limits(g, 0.0, &grid_windows(g, 0.0)).map(|d| d.h_L);
            (hl(&even)?, hl(&odd)?, None)
        };
        reports.push(PointReport { x, levels: lv, monotone, jump_flagged: flagged, even_jump, odd_jump, ladder });
    }
    let jumps_detected = reports.iter().filter(|p| p.jump_flagged).count();
    Ok(ContinuityReport {
        el,
        options: *opts,
        continuous: jumps_detected == 0,
        points: reports,
        jumps_detected,
    })
}

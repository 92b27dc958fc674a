//! Randomized admissible instances for the cancellation checkers and
//! reproducible sweeps over them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lemmas::{
    check_concave_cancellation, check_convex_cancellation, check_rearrangement_inequality, ConcaveCancellation,
    ConvexCancellation, Rearrangement,
};
use super::profile::{Profile, TestFunction};
use crate::error::{Error, Result};
use crate::kernel::{Kernel, KernelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lemma {
    ConvexCancellation,
    ConcaveCancellation,
    Rearrangement,
}

impl Lemma {
    pub const ALL: [Lemma; 3] = [Lemma::ConvexCancellation, Lemma::ConcaveCancellation, Lemma::Rearrangement];
}

/// One checker call, replayable from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "lemma", rename_all = "snake_case")]
pub enum LemmaInstance {
    ConvexCancellation { kernel: KernelSpec, function: TestFunction, x: f64 },
    ConcaveCancellation { kernel: KernelSpec, function: TestFunction, x: f64, y: f64 },
    Rearrangement { kernel: KernelSpec, function: TestFunction },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "lemma", rename_all = "snake_case")]
pub enum LemmaOutcome {
    ConvexCancellation(ConvexCancellation),
    ConcaveCancellation(ConcaveCancellation),
    Rearrangement(Rearrangement),
}

impl LemmaOutcome {
    /// Whether the inequality (and, for the rearrangement, the point-and-sign
    /// split) holds within the violation tolerance.
    pub fn holds(&self) -> bool {
        match self {
            LemmaOutcome::ConvexCancellation(c) => c.holds,
            LemmaOutcome::ConcaveCancellation(c) => c.holds,
            LemmaOutcome::Rearrangement(r) => r.holds && r.basecase.holds,
        }
    }

    /// Signed slack of the main inequality; negative means violated.
    pub fn margin(&self) -> f64 {
        match self {
            LemmaOutcome::ConvexCancellation(c) => c.value,
            LemmaOutcome::ConcaveCancellation(c) => c.value,
            LemmaOutcome::Rearrangement(r) => match r.orientation {
                super::Orientation::Increasing => r.lhs - r.rhs,
                super::Orientation::Decreasing => r.rhs - r.lhs,
            },
        }
    }
}

impl LemmaInstance {
    pub fn lemma(&self) -> Lemma {
        match self {
            LemmaInstance::ConvexCancellation { .. } => Lemma::ConvexCancellation,
            LemmaInstance::ConcaveCancellation { .. } => Lemma::ConcaveCancellation,
            LemmaInstance::Rearrangement { .. } => Lemma::Rearrangement,
        }
    }

    pub fn kernel_spec(&self) -> &KernelSpec {
        match self {
            LemmaInstance::ConvexCancellation { kernel, .. }
            | LemmaInstance::ConcaveCancellation { kernel, .. }
            | LemmaInstance::Rearrangement { kernel, .. } => kernel,
        }
    }

    pub fn run_with(&self, k: &Kernel) -> Result<LemmaOutcome> {
        Ok(match self {
            LemmaInstance::ConvexCancellation { function, x, .. } => {
                LemmaOutcome::ConvexCancellation(check_convex_cancellation(k, function, *x)?)
            }
            LemmaInstance::ConcaveCancellation { function, x, y, .. } => {
                LemmaOutcome::ConcaveCancellation(check_concave_cancellation(k, function, *x, *y)?)
            }
            LemmaInstance::Rearrangement { function, .. } => {
                LemmaOutcome::Rearrangement(check_rearrangement_inequality(k, function)?)
            }
        })
    }

    /// Builds the kernel from the embedded spec and runs the checker.
    pub fn run(&self) -> Result<LemmaOutcome> {
        let k = Kernel::from_spec(self.kernel_spec(), None)?;
        self.run_with(&k)
    }

    pub fn from_json_file(path: &std::path::Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

fn bump(rng: &mut ChaCha8Rng, lo: f64, hi: f64, height: f64) -> Profile {
    let span = hi - lo;
    let width = span * rng.random_range(0.05..0.5);
    let center = rng.random_range(lo + width..=hi - width);
    Profile::Bump { center, width, height }
}

/// Draws one candidate instance; admissibility is decided by the checker's
/// own hypothesis scan.
pub fn random_instance(lemma: Lemma, k: &Kernel, rng: &mut ChaCha8Rng) -> LemmaInstance {
    let r = k.r();
    let gamma = r * rng.random_range(0.05..0.9);
    let alpha = rng.random_range(-1.0..1.0);
    let beta = alpha + gamma;
    let base = rng.random_range(-1.0..1.0);
    let count = rng.random_range(3..=8);
    let kernel = k.spec().clone();
    let mut terms = vec![Profile::Constant { c: base }];
    match lemma {
        Lemma::ConvexCancellation => {
            for _ in 0..count {
                let h = rng.random_range(0.05..2.0);
                terms.push(bump(rng, alpha, beta, h));
            }
            let right = rng.random_bool(0.5);
            if rng.random_bool(0.4) {
                // noncritical far endpoint: a dip centred beyond it that
                // reaches into the window, matched by a dip at the critical end
                let w = gamma * rng.random_range(0.1..0.4);
                let off = w * rng.random_range(0.2..0.8);
                let depth = rng.random_range(0.1..1.0);
                let phi = (1.0 - 1.0 / (1.0 - (off / w).powi(2))).exp();
                let (outer, inner) = if right { (alpha - off, beta) } else { (beta + off, alpha) };
                terms.push(Profile::Bump { center: outer, width: w, height: -depth });
                terms.push(Profile::Bump { center: inner, width: w, height: -depth * phi });
            }
            let x = if right {
                if rng.random_bool(0.2) {
                    beta
                } else {
                    rng.random_range(beta..alpha + r * (1.0 - 1e-9))
                }
            } else if rng.random_bool(0.2) {
                alpha
            } else {
                rng.random_range(beta - r * (1.0 - 1e-9)..=alpha)
            };
            let function = TestFunction { alpha, beta, profile: Profile::Sum { terms } };
            LemmaInstance::ConvexCancellation { kernel, function, x }
        }
        Lemma::ConcaveCancellation => {
            for _ in 0..count {
                let h = rng.random_range(0.05..2.0);
                // supports may run past β
                terms.push(bump(rng, alpha, beta + 0.5 * gamma, h));
            }
            if rng.random_bool(0.3) {
                let w = gamma * rng.random_range(0.05..0.3);
                terms.push(Profile::Bump { center: alpha, width: w, height: -rng.random_range(0.1..1.0) });
            }
            let reach = beta - r * (1.0 - 1e-9);
            let x = if rng.random_bool(0.1) { alpha } else { rng.random_range(reach..=alpha) };
            let y = match rng.random_range(0..10) {
                0 => x,
                1 => alpha,
                _ => rng.random_range(x..=alpha),
            };
            let function = TestFunction { alpha, beta, profile: Profile::Sum { terms } };
            LemmaInstance::ConcaveCancellation { kernel, function, x, y }
        }
        Lemma::Rearrangement => {
            let height = rng.random_range(0.2..2.0) * if rng.random_bool(0.8) { 1.0 } else { -1.0 };
            let ramp = if rng.random_bool(0.5) {
                Profile::Smoothstep { start: alpha, width: gamma, height }
            } else {
                Profile::Smootherstep { start: alpha, width: gamma, height }
            };
            terms.push(ramp);
            for _ in 0..count {
                // signed wiggles; large ones make the ramp non-monotone
                let h = height * rng.random_range(-0.6..0.6);
                terms.push(bump(rng, alpha, beta, h));
            }
            let function = TestFunction { alpha, beta, profile: Profile::Sum { terms } };
            LemmaInstance::Rearrangement { kernel, function }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub lemma: Lemma,
    pub trials: usize,
    pub seed: u64,
    pub kernels: Vec<KernelSpec>,
    /// Candidates discarded by the hypothesis scan.
    pub rejected: usize,
    pub rejection_rate: f64,
    pub min_margin: f64,
    /// Rearrangement instances whose point-and-sign split was identified.
    pub basecase_identified: usize,
    pub non_monotone: usize,
    pub violations: Vec<LemmaInstance>,
}

impl SweepReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

const MAX_ATTEMPTS: usize = 10_000;

/// `trials` admissible instances, assigned to the kernels round-robin, each
/// drawn from its own ChaCha8 stream of `seed` so results do not depend on
/// scheduling.
pub fn sweep(lemma: Lemma, kernels: &[Kernel], trials: usize, seed: u64) -> Result<SweepReport> {
    if trials == 0 {
        return Err(Error::Config("trials must be positive".into()));
    }
    if kernels.is_empty() {
        return Err(Error::Config("sweep needs at least one kernel".into()));
    }
    let results: Vec<Result<(usize, LemmaInstance, LemmaOutcome)>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let k = &kernels[i % kernels.len()];
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64 + 1);
            for attempt in 0..MAX_ATTEMPTS {
                let inst = random_instance(lemma, k, &mut rng);
                match inst.run_with(k) {
                    Ok(out) => return Ok((attempt, inst, out)),
                    Err(Error::Hypothesis(_)) => continue,
                    Err(e) => return Err(e),
                }
            }
            Err(Error::Config(format!("no admissible instance after {MAX_ATTEMPTS} draws")))
        })
        .collect();
    let mut rejected = 0;
    let mut min_margin = f64::INFINITY;
    let mut basecase_identified = 0;
    let mut non_monotone = 0;
    let mut violations = Vec::new();
    for r in results {
        let (attempts, inst, out) = r?;
        rejected += attempts;
        min_margin = min_margin.min(out.margin());
        if let LemmaOutcome::Rearrangement(rr) = &out {
            if rr.basecase.holds {
                basecase_identified += 1;
            }
            if rr.scan.map(|s| !s.increasing).unwrap_or(false)
                && rr.orientation == super::Orientation::Increasing
            {
                non_monotone += 1;
            }
        }
        if !out.holds() {
            violations.push(inst);
        }
    }
    let rejection_rate = rejected as f64 / (rejected + trials) as f64;
    log::info!("{lemma:?} sweep: {trials} trials, {rejected} rejected ({:.1}%)", 100.0 * rejection_rate);
    Ok(SweepReport {
        lemma,
        trials,
        seed,
        kernels: kernels.iter().map(|k| k.spec().clone()).collect(),
        rejected,
        rejection_rate,
        min_margin,
        basecase_identified,
        non_monotone,
        violations,
    })
}

/// The (α, λ) ∈ {2, 3} × {−0.5, 0, 0.5} family.
pub fn standard_kernels() -> Result<Vec<Kernel>> {
    let mut out = Vec::new();
    for alpha in [2.0, 3.0] {
        for lambda in [-0.5, 0.0, 0.5] {
            out.push(Kernel::power_law(alpha, lambda)?);
        }
    }
    Ok(out)
}

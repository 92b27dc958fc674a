use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{el, kde_bandwidth, Minimizer, Outcome, SolveConfig, SolveTrace, StopReason};
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::measure::{particles_to_grid, ParticleSystem};

const MIN_SEPARATION: f64 = 1e-8;
const DIVERGENCE_RUN: usize = 10;

/// `vᵢ = −(1/N) Σ_{j≠i} g′(Xᵢ − Xⱼ)`.
pub fn particle_velocities(k: &Kernel, xs: &[f64]) -> Vec<f64> {
    let n = xs.len() as f64;
    xs.par_iter()
        .enumerate()
        .map(|(i, &x)| {
            let mut s = 0.0;
            for (j, &y) in xs.iter().enumerate() {
                if j != i {
                    s += k.dg(x - y);
                }
            }
            -s / n
        })
        .collect()
}

/// `(1/N²) Σ_{i≠j} g(Xᵢ − Xⱼ)`.
pub fn particle_energy(k: &Kernel, xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let s: f64 = (0..xs.len())
        .into_par_iter()
        .map(|i| xs[i + 1..].iter().map(|&y| k.g(xs[i] - y)).sum::<f64>())
        .sum();
    2.0 * s / (n * n)
}

/// Largest Gershgorin row sum of the velocity Jacobian.
fn stiffness(k: &Kernel, xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    xs.par_iter()
        .enumerate()
        .map(|(i, &x)| {
            let mut s = 0.0;
            for (j, &y) in xs.iter().enumerate() {
                if j != i {
                    s += k.d2g_or_fd(x - y).abs();
                }
            }
            2.0 * s / n
        })
        .reduce(|| 0.0, f64::max)
}

fn initial_positions(cfg: &SolveConfig) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.particles;
    let len = cfg.grid.b0 - cfg.grid.a0;
    let gap = len / n as f64;
    (0..n)
        .map(|i| cfg.grid.a0 + (i as f64 + 0.5) * gap + rng.random_range(-0.25..0.25) * gap)
        .collect()
}

/// Pushes sorted neighbours closer than the minimal separation apart
/// symmetrically; returns the number of pairs touched.
fn enforce_separation(xs: &mut [f64]) -> usize {
    let mut count = 0;
    for i in 1..xs.len() {
        if xs[i] - xs[i - 1] < MIN_SEPARATION {
            let mid = 0.5 * (xs[i] + xs[i - 1]);
            xs[i - 1] = mid - 0.5 * MIN_SEPARATION;
            xs[i] = mid + 0.5 * MIN_SEPARATION;
            count += 1;
        }
    }
    count
}

/// Flags a run of consecutive energy increases.
struct DivergenceMonitor {
    last: f64,
    rising: usize,
}

impl DivergenceMonitor {
    fn new(e: f64) -> Self {
        Self { last: e, rising: 0 }
    }

    fn observe(&mut self, step: usize, e: f64) -> Result<()> {
        if !e.is_finite() {
            return Err(Error::Diverged(format!("non-finite energy at step {step}")));
        }
        if e > self.last + 1e-12 * self.last.abs() {
            self.rising += 1;
            if self.rising >= DIVERGENCE_RUN {
                return Err(Error::Diverged(format!(
                    "energy increased over {DIVERGENCE_RUN} consecutive steps (step {step}, E = {e})"
                )));
            }
        } else {
            self.rising = 0;
        }
        self.last = e;
        Ok(())
    }
}

pub(super) fn run(k: &Kernel, cfg: &SolveConfig) -> Result<Outcome> {
    let mut p = ParticleSystem::new(initial_positions(cfg))?;
    let separate = k.repulsive_exponent().is_none_or(|l| l > 0.0);
    let cap = 0.25 * (cfg.grid.b0 - cfg.grid.a0) / (cfg.grid.n - 1) as f64;
    let stride = (cfg.max_iters / 1000).max(1);
    let mut trace = SolveTrace::default();
    let mut stop = StopReason::MaxIters;
    let mut e = particle_energy(k, p.positions());
    let mut monitor = DivergenceMonitor::new(e);
    let mut speed = f64::INFINITY;

    for it in 0..cfg.max_iters {
        trace.iterations = it;
        if cfg.snapshot_every > 0 && it % cfg.snapshot_every == 0 {
            trace.snapshots.push((it, p.positions().to_vec()));
        }
        let v = particle_velocities(k, p.positions());
        speed = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if it % stride == 0 {
            trace.energies.push(e);
            trace.residuals.push(speed);
        }
        if speed <= cfg.el_tol {
            stop = StopReason::Converged;
            break;
        }
        if !speed.is_finite() {
            return Err(Error::Diverged(format!("non-finite particle velocity at step {it}")));
        }
        let dt = (cap / speed).min(cfg.step0 / stiffness(k, p.positions()));
        let mut next: Vec<f64> = p.positions().iter().zip(&v).map(|(x, v)| x + dt * v).collect();
        next.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if separate {
            trace.separations_enforced += enforce_separation(&mut next);
        }
        p.update(next);
        e = particle_energy(k, p.positions());
        monitor.observe(it, e)?;
    }
    if stop == StopReason::MaxIters {
        trace.iterations = cfg.max_iters;
    }
    if trace.separations_enforced > 0 {
        log::warn!("{} particle pairs held at minimal separation; minimizer may carry atoms", trace.separations_enforced);
    }
    log::info!("particle flow stopped ({stop:?}) after {} steps, max speed {speed:e}", trace.iterations);

    let density = particles_to_grid(&p, kde_bandwidth(&p), cfg.grid.n)?;
    let report = el::verify_el(k, &density, cfg.el_tol);
    Ok(Outcome { minimizer: Minimizer::Particles(p), report, stop, final_residual: speed, trace })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_particles_settle_at_unit_distance() {
        // g′(d) = d − 1/d vanishes at d = 1
        let k = Kernel::power_law(2.0, 0.0).unwrap();
        let mut cfg = SolveConfig::particle(-0.3, 0.3, 2, 7);
        cfg.el_tol = 1e-10;
        let out = super::super::minimize(&k, &cfg).unwrap();
        let xs = out.particles().unwrap().positions();
        assert!((xs[1] - xs[0] - 1.0).abs() < 1e-8, "{xs:?}");
    }

    #[test]
    fn monitor_trips_after_ten_rises() {
        let mut m = DivergenceMonitor::new(0.0);
        for i in 1..10 {
            m.observe(i, i as f64).unwrap();
        }
        assert!(matches!(m.observe(10, 10.0), Err(Error::Diverged(_))));
        let mut m = DivergenceMonitor::new(0.0);
        for i in 1..30 {
            let e = if i % 5 == 0 { -1.0 } else { i as f64 };
            m.observe(i, e).unwrap();
        }
        assert!(m.observe(30, f64::NAN).is_err());
    }

    #[test]
    fn separation_enforced() {
        let mut xs = vec![0.0, 1e-10, 1.0];
        assert_eq!(enforce_separation(&mut xs), 1);
        assert!(xs[1] - xs[0] >= MIN_SEPARATION * (1.0 - 1e-6));
    }
}

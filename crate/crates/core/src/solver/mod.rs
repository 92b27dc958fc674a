//! Energy minimization over grid densities and particle systems, and the
//! Euler–Lagrange check on candidate densities.

mod el;
mod grid;
mod particles;

pub use el::{verify_el, ELReport, SUPPORT_THRESHOLD};
pub use grid::project_weighted_simplex;
pub use particles::{particle_energy, particle_velocities};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::measure::{GridDensity, ParticleSystem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    GridProjectedGradient,
    ParticleFlow,
}

/// Initial window `[a0, b0]` with `n` points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub a0: f64,
    pub b0: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub method: Method,
    pub max_iters: usize,
    pub step0: f64,
    pub el_tol: f64,
    pub grid: GridSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_particles")]
    pub particles: usize,
    /// Record particle positions every this many steps (0 = never).
    #[serde(default)]
    pub snapshot_every: usize,
}

fn default_particles() -> usize {
    200
}

impl SolveConfig {
    pub fn grid(a0: f64, b0: f64, n: usize) -> Self {
        Self {
            method: Method::GridProjectedGradient,
            max_iters: 200_000,
            step0: 0.05,
            el_tol: 1e-3,
            grid: GridSpec { a0, b0, n },
            seed: 0,
            particles: default_particles(),
            snapshot_every: 0,
        }
    }

    pub fn particle(a0: f64, b0: f64, particles: usize, seed: u64) -> Self {
        Self {
            method: Method::ParticleFlow,
            max_iters: 200_000,
            step0: 1.0,
            el_tol: 1e-4,
            grid: GridSpec { a0, b0, n: 401 },
            seed,
            particles,
            snapshot_every: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let GridSpec { a0, b0, n } = self.grid;
        if !(a0.is_finite() && b0.is_finite() && a0 < b0) {
            return Err(Error::Config(format!("grid window needs a0 < b0, got [{a0}, {b0}]")));
        }
        if n < 51 {
            return Err(Error::Config(format!("grid needs n >= 51 points, got {n}")));
        }
        if !(self.el_tol > 0.0) {
            return Err(Error::Config(format!("el_tol must be positive, got {}", self.el_tol)));
        }
        if !(self.step0 > 0.0 && self.step0.is_finite()) {
            return Err(Error::Config(format!("step0 must be positive, got {}", self.step0)));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be positive".into()));
        }
        if self.method == Method::ParticleFlow && self.particles < 2 {
            return Err(Error::Config("particle flow needs at least 2 particles".into()));
        }
        Ok(())
    }

    pub fn from_json_file(path: &std::path::Path) -> Result<Self> {
        let cfg: Self = serde_json::from_reader(std::fs::File::open(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Minimizer {
    Grid(GridDensity),
    Particles(ParticleSystem),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxIters,
    Stalled,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SolveTrace {
    pub iterations: usize,
    pub energies: Vec<f64>,
    pub residuals: Vec<f64>,
    /// `(step, positions)` for particle runs.
    pub snapshots: Vec<(usize, Vec<f64>)>,
    /// Pairs pushed apart to the minimal separation.
    pub separations_enforced: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Outcome {
    pub minimizer: Minimizer,
    pub report: ELReport,
    pub stop: StopReason,
    /// Residual used by the stopping rule: relative EL residual for grids,
    /// max particle speed for flows.
    pub final_residual: f64,
    pub trace: SolveTrace,
}

impl Outcome {
    pub fn density(&self) -> Option<&GridDensity> {
        match &self.minimizer {
            Minimizer::Grid(d) => Some(d),
            Minimizer::Particles(_) => None,
        }
    }

    pub fn particles(&self) -> Option<&ParticleSystem> {
        match &self.minimizer {
            Minimizer::Particles(p) => Some(p),
            Minimizer::Grid(_) => None,
        }
    }
}

/// Minimizes the interaction energy with the configured method.
pub fn minimize(k: &Kernel, cfg: &SolveConfig) -> Result<Outcome> {
    cfg.validate()?;
    if let Some(l) = k.repulsive_exponent() {
        if l <= -1.0 {
            return Err(Error::Config(format!("kernel not locally integrable (lambda = {l})")));
        }
    }
    warn_if_not_strictly_convex(k, cfg.grid.b0 - cfg.grid.a0);
    match cfg.method {
        Method::GridProjectedGradient => grid::run(k, cfg),
        Method::ParticleFlow => particles::run(k, cfg),
    }
}

fn warn_if_not_strictly_convex(k: &Kernel, span: f64) {
    let bad = (1..=200).map(|i| span * i as f64 / 200.0).find(|&x| !(k.d2g_or_fd(x) > 0.0));
    if let Some(x) = bad {
        log::warn!("kernel is not strictly convex on (0, {span}]: g''({x}) <= 0");
    }
}

/// Bandwidth used to turn a particle system into a density.
pub fn kde_bandwidth(p: &ParticleSystem) -> f64 {
    let xs = p.positions();
    let span = xs[xs.len() - 1] - xs[0];
    (5.0 * span / xs.len() as f64).max(1e-6)
}

//! Grid densities, particle systems and essential one-sided limits.

mod essential;
mod grid;

pub use essential::{essential_limits, essential_limits_with, grid_windows, JumpDiagnostics, WindowEstimate, DEFAULT_DISCARD};
pub use grid::{GridDensity, GridFunction};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mollify;

/// Equal-weight particles, kept sorted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleSystem {
    positions: Vec<f64>,
    weight: f64,
}

impl ParticleSystem {
    pub fn new(mut positions: Vec<f64>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::Precondition("particle system needs at least one particle".into()));
        }
        if positions.iter().any(|x| !x.is_finite()) {
            return Err(Error::Precondition("particle positions must be finite".into()));
        }
        positions.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let weight = 1.0 / positions.len() as f64;
        Ok(Self { positions, weight })
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// Replaces positions and restores the sort order.
    pub fn update(&mut self, positions: Vec<f64>) {
        self.positions = positions;
        self.positions.sort_by(|a, b| a.partial_cmp(b).unwrap());
    }
}

/// Kernel-density estimate with the bump mollifier at scale `bandwidth` on
/// `n` points spanning the particles plus one bandwidth each side; the
/// trapezoid mass is normalized to one.
pub fn particles_to_grid(p: &ParticleSystem, bandwidth: f64, n: usize) -> Result<GridDensity> {
    if !(bandwidth > 0.0) {
        return Err(Error::Precondition(format!("bandwidth must be positive, got {bandwidth}")));
    }
    if n < 3 {
        return Err(Error::Precondition("need at least 3 grid points".into()));
    }
    let xs = p.positions();
    let a = xs[0] - bandwidth;
    let b = xs[xs.len() - 1] + bandwidth;
    let w = p.weight() / bandwidth;
    let f = GridFunction::from_fn(a, b, n, |x| {
        let lo = xs.partition_point(|&y| y < x - bandwidth);
        let hi = xs.partition_point(|&y| y <= x + bandwidth);
        xs[lo..hi].iter().map(|&y| mollify::rho((x - y) / bandwidth)).sum::<f64>() * w
    })?;
    GridDensity::new(f)?.normalized()
}

/// Even and odd parts about `xbar`: `f_S(x) = f(x̄+x) + f(x̄−x)` and
/// `f_A(x) = f(x̄+x) − f(x̄−x)`, sampled with the spacing of `f` on a grid
/// symmetric about 0 that covers `[−S, S]`, `S = max(x̄−a, b−x̄)`, so both
/// parts carry all of `f`. On `(−s, s)`, `s = min(x̄−a, b−x̄)`, both reflected
/// points stay inside `[a, b]`.
pub fn symmetrize(f: &GridFunction, xbar: f64) -> Result<(GridFunction, GridFunction)> {
    if !(xbar > f.a() && xbar < f.b()) {
        return Err(Error::Precondition(format!(
            "symmetrization point {xbar} outside ({}, {})",
            f.a(),
            f.b()
        )));
    }
    let s = (xbar - f.a()).max(f.b() - xbar);
    let h = f.h();
    let m = ((s / h) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let half = m as f64 * h;
    let grid = GridFunction::new(-half, half, vec![0.0; 2 * m + 1])?;
    let mut even = Vec::with_capacity(2 * m + 1);
    let mut odd = Vec::with_capacity(2 * m + 1);
    for i in 0..=2 * m {
        let x = grid.x(i);
        let (p, q) = (f.eval(xbar + x), f.eval(xbar - x));
        even.push(p + q);
        odd.push(p - q);
    }
    Ok((GridFunction::new(-half, half, even)?, GridFunction::new(-half, half, odd)?))
}

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::kernel::Kernel;
use crate::measure::GridDensity;
use crate::potential::{energy, potential_at};

/// Nodes with `f > SUPPORT_THRESHOLD·M` count as support.
pub const SUPPORT_THRESHOLD: f64 = 1e-3;

/// Off-support probes beyond each grid end, out to a quarter diameter.
const OUTER_PROBES: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ELReport {
    pub energy: f64,
    pub psi_mean_on_support: f64,
    pub psi_max_dev_on_support: f64,
    /// +∞ when every probe lies in the support.
    #[serde(with = "crate::ext")]
    pub psi_min_off_support: f64,
    /// `max_dev / |mean|` over support nodes.
    pub el_residual: f64,
    pub support_interval: (f64, f64),
    pub linf_bound: f64,
    pub mass: f64,
    #[serde(with = "crate::ext")]
    pub tol: f64,
    /// Longest run of sub-threshold nodes inside the support, in cells.
    pub support_max_gap: usize,
    /// No interior gap longer than 3 cells.
    pub support_is_interval: bool,
    /// `ψ ≥ mean − tol` off the support.
    pub off_support_ok: bool,
    pub passed: bool,
}

/// Potential on the grid, constancy on the support and the off-support
/// inequality.
pub fn verify_el(k: &Kernel, f: &GridDensity, tol: f64) -> ELReport {
    let n = f.n();
    let m = f.sup();
    let cut = SUPPORT_THRESHOLD * m;
    let v = f.values();
    let first = v.iter().position(|&y| y > cut).unwrap_or(0);
    let last = v.iter().rposition(|&y| y > cut).unwrap_or(n - 1);
    let psi: Vec<f64> = (0..n).into_par_iter().map(|i| potential_at(k, f, f.x(i)).value).collect();

    let on: Vec<f64> = (first..=last).filter(|&i| v[i] > cut).map(|i| psi[i]).collect();
    let mean = on.iter().sum::<f64>() / on.len().max(1) as f64;
    let max_dev = on.iter().fold(0.0f64, |mx, p| mx.max((p - mean).abs()));
    let residual = if mean.abs() > 0.0 { max_dev / mean.abs() } else { max_dev };

    let mut gap = 0usize;
    let mut run = 0usize;
    for &y in &v[first..=last] {
        if y > cut {
            run = 0;
        } else {
            run += 1;
            gap = gap.max(run);
        }
    }

    let d = f.diameter();
    let outer: Vec<f64> = (1..=OUTER_PROBES)
        .flat_map(|j| {
            let s = 0.25 * d * j as f64 / OUTER_PROBES as f64;
            [f.a() - s, f.b() + s]
        })
        .collect();
    let off_nodes = (0..first).chain(last + 1..n).map(|i| psi[i]);
    let off_outer: Vec<f64> = outer.par_iter().map(|&x| potential_at(k, f, x).value).collect();
    let psi_off = off_nodes.chain(off_outer).fold(f64::INFINITY, f64::min);

    let off_ok = psi_off >= mean - tol;
    let support_is_interval = gap <= 3;
    ELReport {
        energy: energy(k, f),
        psi_mean_on_support: mean,
        psi_max_dev_on_support: max_dev,
        psi_min_off_support: psi_off,
        el_residual: residual,
        support_interval: (f.x(first), f.x(last)),
        linf_bound: m,
        mass: f.mass(),
        tol,
        support_max_gap: gap,
        support_is_interval,
        off_support_ok: off_ok,
        passed: residual <= tol && off_ok,
    }
}

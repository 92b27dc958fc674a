use super::{el, Minimizer, Outcome, SolveConfig, SolveTrace, StopReason};
use crate::error::Result;
use crate::kernel::Kernel;
use crate::measure::{GridDensity, GridFunction};
use crate::potential::PotentialOperator;

/// Projection onto `{f ≥ 0, Σ wᵢfᵢ = 1}` in the `w`-weighted Euclidean
/// metric: `fᵢ = max(vᵢ − θ, 0)`.
pub fn project_weighted_simplex(v: &[f64], w: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&i, &j| v[j].partial_cmp(&v[i]).unwrap());
    let (mut sw, mut swv) = (0.0, 0.0);
    let mut theta = f64::NEG_INFINITY;
    for (k, &i) in order.iter().enumerate() {
        sw += w[i];
        swv += w[i] * v[i];
        let t = (swv - 1.0) / sw;
        let next = order.get(k + 1).map_or(f64::NEG_INFINITY, |&j| v[j]);
        if t < v[i] && t >= next {
            theta = t;
            break;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

fn quadratic_energy(w: &[f64], f: &[f64], psi: &[f64]) -> f64 {
    w.iter().zip(f).zip(psi).map(|((w, f), p)| w * f * p).sum()
}

/// Relative spread of ψ over nodes above the support threshold.
fn residual(f: &[f64], psi: &[f64]) -> f64 {
    let m = f.iter().fold(0.0f64, |a, &b| a.max(b));
    let cut = el::SUPPORT_THRESHOLD * m;
    let on: Vec<f64> = f.iter().zip(psi).filter(|(v, _)| **v > cut).map(|(_, p)| *p).collect();
    let mean = on.iter().sum::<f64>() / on.len() as f64;
    let dev = on.iter().fold(0.0f64, |d, p| d.max((p - mean).abs()));
    if mean.abs() > 0.0 {
        dev / mean.abs()
    } else {
        dev
    }
}

pub(super) fn run(k: &Kernel, cfg: &SolveConfig) -> Result<Outcome> {
    let g = cfg.grid;
    let shape = GridFunction::new(g.a0, g.b0, vec![0.0; g.n])?;
    let w: Vec<f64> = (0..g.n).map(|i| shape.weight(i)).collect();
    let op = PotentialOperator::new(k, g.a0, g.b0, g.n)?;

    let mut f = vec![1.0 / (g.b0 - g.a0); g.n];
    let mut psi = op.apply(&f);
    let mut e = quadratic_energy(&w, &f, &psi);
    let mut s = cfg.step0;
    let stride = (cfg.max_iters / 1000).max(1);
    let mut trace = SolveTrace::default();
    let mut stop = StopReason::MaxIters;
    let mut res = residual(&f, &psi);

    for it in 0..cfg.max_iters {
        trace.iterations = it;
        if it % stride == 0 {
            trace.energies.push(e);
            trace.residuals.push(res);
        }
        if res <= cfg.el_tol {
            stop = StopReason::Converged;
            break;
        }
        let accepted = loop {
            let v: Vec<f64> = f.iter().zip(&psi).map(|(f, p)| f - s * p).collect();
            let fnew = project_weighted_simplex(&v, &w);
            let pnew = op.apply(&fnew);
            let enew = quadratic_energy(&w, &fnew, &pnew);
            if enew <= e {
                break Some((fnew, pnew, enew));
            }
            s *= 0.5;
            if s < 1e-14 * cfg.step0 {
                break None;
            }
        };
        match accepted {
            Some((fnew, pnew, enew)) => {
                if fnew == f {
                    stop = StopReason::Stalled;
                    break;
                }
                f = fnew;
                psi = pnew;
                e = enew;
                s *= 1.5;
                res = residual(&f, &psi);
            }
            None => {
                stop = StopReason::Stalled;
                break;
            }
        }
    }
    if stop == StopReason::MaxIters {
        trace.iterations = cfg.max_iters;
    }
    log::info!("grid solver stopped ({stop:?}) after {} iterations, residual {res:e}", trace.iterations);

    let density = GridDensity::new(GridFunction::new(g.a0, g.b0, f)?)?;
    let report = el::verify_el(k, &density, cfg.el_tol);
    Ok(Outcome { minimizer: Minimizer::Grid(density), report, stop, final_residual: res, trace })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_hits_the_constraint() {
        let v = [0.3, -1.0, 2.0, 0.7, 0.1];
        let w = [0.5, 1.0, 1.0, 1.0, 0.5];
        let f = project_weighted_simplex(&v, &w);
        let mass: f64 = f.iter().zip(&w).map(|(a, b)| a * b).sum();
        assert!((mass - 1.0).abs() < 1e-15);
        assert!(f.iter().all(|x| *x >= 0.0));
    }

    #[test]
    fn projection_fixes_feasible_points() {
        let w = [0.25, 0.5, 0.25];
        let v = [1.0, 1.0, 1.0];
        assert_eq!(project_weighted_simplex(&v, &w), vec![1.0, 1.0, 1.0]);
    }
}

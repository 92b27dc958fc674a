//! The bump mollifier `ρ(t) = Z⁻¹ exp(−1/(1−t²))` on (−1, 1) and the exact
//! convolution of piecewise-linear grid functions with `ρ_δ(t) = ρ(t/δ)/δ`.

use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::measure::{GridDensity, GridFunction};
use crate::potential::potential_at;
use crate::quad::{self, Tolerance};

const PANELS: usize = 8192;

struct Tables {
    z: f64,
    /// `∫_{−1}^{t_k} ρ` and `∫_{−1}^{t_k} sρ(s) ds` at the panel nodes.
    r0: Vec<f64>,
    r1: Vec<f64>,
    /// `ρ(t_k)`, the slopes of `r0`.
    d0: Vec<f64>,
}

fn unnormalized(t: f64) -> f64 {
    if t <= -1.0 || t >= 1.0 {
        return 0.0;
    }
    let u = (1.0 - t) * (1.0 + t);
    (-1.0 / u).exp()
}

fn tables() -> &'static Tables {
    static TABLES: OnceLock<Tables> = OnceLock::new();
    TABLES.get_or_init(|| {
        let tol = Tolerance::new(1e-16, 1e-14);
        let z = quad::integrate(unnormalized, -1.0, 0.0, tol).value * 2.0;
        let h = 2.0 / PANELS as f64;
        let mut r0 = vec![0.0; PANELS + 1];
        let mut r1 = vec![0.0; PANELS + 1];
        for k in 0..PANELS {
            let lo = -1.0 + k as f64 * h;
            let hi = lo + h;
            r0[k + 1] = r0[k] + quad::gk15(&|t| unnormalized(t) / z, lo, hi).value;
            r1[k + 1] = r1[k] + quad::gk15(&|t| t * unnormalized(t) / z, lo, hi).value;
        }
        let d0 = (0..=PANELS).map(|k| unnormalized(-1.0 + k as f64 * h) / z).collect();
        Tables { z, r0, r1, d0 }
    })
}

/// Normalizer `Z = ∫ exp(−1/(1−t²)) dt`.
pub fn normalizer() -> f64 {
    tables().z
}

/// ρ(t).
#[inline]
pub fn rho(t: f64) -> f64 {
    unnormalized(t) / tables().z
}

/// ρ′(t).
#[inline]
pub fn rho_d1(t: f64) -> f64 {
    if t <= -1.0 || t >= 1.0 {
        return 0.0;
    }
    let u = (1.0 - t) * (1.0 + t);
    rho(t) * (-2.0 * t / (u * u))
}

/// ρ″(t).
#[inline]
pub fn rho_d2(t: f64) -> f64 {
    if t <= -1.0 || t >= 1.0 {
        return 0.0;
    }
    let u = (1.0 - t) * (1.0 + t);
    let t2 = t * t;
    rho(t) * (4.0 * t2 - 2.0 * u * u - 8.0 * t2 * u) / (u * u * u * u)
}

fn hermite(tab: &[f64], slope: impl Fn(usize, f64) -> f64, u: f64) -> f64 {
    if u <= -1.0 {
        return tab[0];
    }
    if u >= 1.0 {
        return tab[PANELS];
    }
    let h = 2.0 / PANELS as f64;
    let k = (((u + 1.0) / h) as usize).min(PANELS - 1);
    let t0 = -1.0 + k as f64 * h;
    let s = (u - t0) / h;
    let (y0, y1) = (tab[k], tab[k + 1]);
    let (m0, m1) = (slope(k, t0) * h, slope(k + 1, t0 + h) * h);
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * y0 + (s3 - 2.0 * s2 + s) * m0 + (-2.0 * s3 + 3.0 * s2) * y1 + (s3 - s2) * m1
}

/// `∫_{−1}^u ρ`.
pub fn rho_cdf(u: f64) -> f64 {
    let t = tables();
    hermite(&t.r0, |k, _| t.d0[k], u)
}

/// `∫_{−1}^u tρ(t) dt`.
pub fn rho_first_moment(u: f64) -> f64 {
    let t = tables();
    hermite(&t.r1, |k, x| x * t.d0[k], u)
}

/// The properties required of the mollifier, checked numerically.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MollifierProperties {
    pub normalizer: f64,
    /// `∫ρ` by an independent adaptive quadrature.
    pub mass: f64,
    pub sup: f64,
    pub derivative_negative: bool,
    pub passed: bool,
}

/// Startup assertions: unit mass (1e-10), `‖ρ‖∞ = ρ(0) ≤ 1`, `ρ′ < 0` on (0, 1).
pub fn startup_check() -> MollifierProperties {
    let tol = Tolerance::new(1e-15, 1e-14);
    let mass = quad::integrate(rho, -1.0, 1.0, tol).value;
    let probes = 10_000;
    let mut sup = rho(0.0);
    let mut negative = true;
    for i in 1..probes {
        let t = i as f64 / probes as f64;
        sup = sup.max(rho(t)).max(rho(-t));
        // below machine range the derivative underflows to zero
        let d = rho_d1(t);
        if !(d < 0.0) && rho(t) > 1e-300 {
            negative = false;
        }
    }
    let passed = (mass - 1.0).abs() <= 1e-10 && sup <= 1.0 && negative && (rho_cdf(1.0) - 1.0).abs() <= 1e-12;
    MollifierProperties { normalizer: normalizer(), mass, sup, derivative_negative: negative, passed }
}

/// `f_δ = f ∗ ρ_δ` for the piecewise-linear interpolant of `f`, evaluated in
/// closed form against tabulated moments of ρ.
#[derive(Debug, Clone, Copy)]
pub struct Mollified<'a> {
    f: &'a GridFunction,
    delta: f64,
}

impl<'a> Mollified<'a> {
    pub fn new(f: &'a GridFunction, delta: f64) -> Result<Self> {
        let min = 4.0 * f.h();
        if !(delta >= min * (1.0 - 1e-12)) {
            return Err(Error::MollifierUnresolved { delta, min });
        }
        Ok(Self { f, delta })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn source(&self) -> &GridFunction {
        self.f
    }

    /// Support of f_δ.
    pub fn support(&self) -> (f64, f64) {
        (self.f.a() - self.delta, self.f.b() + self.delta)
    }

    fn cells(&self, x: f64) -> std::ops::Range<usize> {
        let f = self.f;
        let h = f.h();
        let lo = ((x - self.delta - f.a()) / h).floor();
        let hi = ((x + self.delta - f.a()) / h).ceil();
        let last = (f.n() - 1) as f64;
        let lo = lo.clamp(0.0, last) as usize;
        let hi = hi.clamp(0.0, last) as usize;
        lo..hi
    }

    /// Sums `kernel(c, s, t0, t1)` over the cells meeting `[x−δ, x+δ]`,
    /// with the cell's linear piece written as `c − sδt` in `t = (x−y)/δ`.
    #[inline]
    fn accumulate(&self, x: f64, kern: impl Fn(f64, f64, f64, f64) -> f64) -> f64 {
        let f = self.f;
        let v = f.values();
        let h = f.h();
        let d = self.delta;
        let mut acc = 0.0;
        for j in self.cells(x) {
            if v[j] == 0.0 && v[j + 1] == 0.0 {
                continue;
            }
            let y0 = f.x(j);
            let y1 = f.x(j + 1);
            let t0 = ((x - y0) / d).clamp(-1.0, 1.0);
            let t1 = ((x - y1) / d).clamp(-1.0, 1.0);
            if t0 == t1 {
                continue;
            }
            let s = (v[j + 1] - v[j]) / h;
            let c = v[j] + s * (x - y0);
            acc += kern(c, s, t0, t1);
        }
        acc
    }

    pub fn value(&self, x: f64) -> f64 {
        // adjacent cells share an endpoint, so each node's moments are
        // evaluated once
        let f = self.f;
        let v = f.values();
        let h = f.h();
        let d = self.delta;
        let cells = self.cells(x);
        if cells.is_empty() {
            return 0.0;
        }
        let moments = |y: f64| {
            let t = ((x - y) / d).clamp(-1.0, 1.0);
            (rho_cdf(t), rho_first_moment(t))
        };
        let mut acc = 0.0;
        let mut prev = moments(f.x(cells.start));
        for j in cells {
            let next = moments(f.x(j + 1));
            if v[j] != 0.0 || v[j + 1] != 0.0 {
                let s = (v[j + 1] - v[j]) / h;
                let c = v[j] + s * (x - f.x(j));
                acc += c * (prev.0 - next.0) - s * d * (prev.1 - next.1);
            }
            prev = next;
        }
        acc
    }

    pub fn d1(&self, x: f64) -> f64 {
        let d = self.delta;
        let m1 = |t: f64| t * rho(t) - rho_cdf(t);
        self.accumulate(x, |c, s, t0, t1| c * (rho(t0) - rho(t1)) - s * d * (m1(t0) - m1(t1))) / d
    }

    pub fn d2(&self, x: f64) -> f64 {
        let d = self.delta;
        let n1 = |t: f64| t * rho_d1(t) - rho(t);
        self.accumulate(x, |c, s, t0, t1| c * (rho_d1(t0) - rho_d1(t1)) - s * d * (n1(t0) - n1(t1))) / (d * d)
    }

    /// Samples on the lattice of `f` extended by `⌈δ/h⌉` nodes each side.
    pub fn sample(&self) -> GridFunction {
        let f = self.f;
        let h = f.h();
        let m = (self.delta / h).ceil() as usize;
        let n = f.n() + 2 * m;
        let a = f.a() - m as f64 * h;
        let b = f.b() + m as f64 * h;
        let grid = GridFunction::new(a, b, vec![0.0; n]).expect("valid grid");
        let values: Vec<f64> = (0..n).into_par_iter().map(|i| self.value(grid.x(i))).collect();
        GridFunction::new(a, b, values).expect("finite samples")
    }
}

/// Samples `f ∗ ρ_δ` on the lattice of `f`, extended to cover `[a−δ, b+δ]`.
pub fn mollify(f: &GridFunction, delta: f64) -> Result<GridFunction> {
    Ok(Mollified::new(f, delta)?.sample())
}

/// `mollify` for densities; roundoff negatives are clamped.
pub fn mollify_density(f: &GridDensity, delta: f64) -> Result<GridDensity> {
    let out = mollify(f, delta)?;
    GridDensity::from_clamped(out, 1e-13 * f.sup().max(1e-300))
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DerivativeBound {
    pub max_abs_derivative: f64,
    /// `2M/δ`.
    pub bound: f64,
    pub holds: bool,
}

/// `max |f_δ′|` over lattice nodes and midpoints, against `2‖f‖∞/δ`.
pub fn derivative_bound_check(f: &GridFunction, delta: f64) -> Result<DerivativeBound> {
    let m = Mollified::new(f, delta)?;
    let (lo, hi) = m.support();
    let h = f.h();
    let count = ((hi - lo) / (0.5 * h)).ceil() as usize + 1;
    let max = (0..count)
        .into_par_iter()
        .map(|i| m.d1(lo + i as f64 * 0.5 * h).abs())
        .reduce(|| 0.0, f64::max);
    let bound = 2.0 * f.sup_abs() / delta;
    Ok(DerivativeBound { max_abs_derivative: max, bound, holds: max <= bound })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CommutationReport {
    pub points: Vec<f64>,
    /// ψ of f_δ by singular quadrature against the exact f_δ.
    pub direct: Vec<f64>,
    /// ψ_f ∗ ρ_δ by quadrature over the mollifier variable.
    pub convolved: Vec<f64>,
    pub max_discrepancy: f64,
    pub error_bound: f64,
}

/// Compares `ψ_{f_δ}(x)` and `(ψ_f ∗ ρ_δ)(x)` computed by independent routes.
pub fn potential_commutation_check(k: &Kernel, f: &GridFunction, delta: f64, xs: &[f64]) -> Result<CommutationReport> {
    let m = Mollified::new(f, delta)?;
    if let Some(x) = xs.iter().find(|&&x| !(x > f.a() + delta && x < f.b() - delta)) {
        return Err(Error::Precondition(format!(
            "query point {x} outside (a + delta, b - delta) = ({}, {})",
            f.a() + delta,
            f.b() - delta
        )));
    }
    let (lo, hi) = m.support();
    let tol = Tolerance::new(1e-11, 1e-11);
    let rows: Vec<(f64, f64, f64)> = xs
        .par_iter()
        .map(|&x| {
            let direct = quad::integrate_singular(|y| k.g(x - y) * m.value(y), lo, hi, x, tol);
            let mut cuts: Vec<f64> = (0..f.n())
                .map(|j| (x - f.x(j)) / delta)
                .filter(|t| *t > -1.0 && *t < 1.0)
                .collect();
            cuts.push(-1.0);
            cuts.push(1.0);
            cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut conv = quad::Estimate::default();
            for w in cuts.windows(2) {
                conv += quad::integrate(|t| potential_at(k, f, x - delta * t).value * rho(t), w[0], w[1], tol);
            }
            (direct.value, conv.value, direct.error + conv.error)
        })
        .collect();
    let max_discrepancy = rows.iter().fold(0.0f64, |mx, r| mx.max((r.0 - r.1).abs()));
    let error_bound = rows.iter().fold(0.0f64, |mx, r| mx.max(r.2));
    Ok(CommutationReport {
        points: xs.to_vec(),
        direct: rows.iter().map(|r| r.0).collect(),
        convolved: rows.iter().map(|r| r.1).collect(),
        max_discrepancy,
        error_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalizer_and_peak() {
        assert!((normalizer() - 0.443_993_816_168_079_3).abs() < 1e-12);
        assert!((rho(0.0) - 0.828_568_839_869_105_5).abs() < 1e-12);
        let p = startup_check();
        assert!(p.passed, "{p:?}");
    }

    #[test]
    fn moments_are_consistent() {
        assert!((rho_cdf(0.0) - 0.5).abs() < 1e-14);
        assert!(rho_first_moment(1.0).abs() < 1e-15);
        let q = quad::integrate(|t| t * rho(t), -1.0, 0.3, Tolerance::default()).value;
        assert!((rho_first_moment(0.3) - q).abs() < 1e-14);
        let q = quad::integrate(rho, 0.75, 1.0, Tolerance::default()).value;
        assert!((1.0 - rho_cdf(0.75) - q).abs() < 1e-14);
    }

    #[test]
    fn derivatives_match_differences() {
        for &t in &[-0.8, -0.3, 0.1, 0.55, 0.9] {
            let e = 1e-6;
            let fd1 = (rho(t + e) - rho(t - e)) / (2.0 * e);
            let fd2 = (rho_d1(t + e) - rho_d1(t - e)) / (2.0 * e);
            assert!((fd1 - rho_d1(t)).abs() < 1e-6 * (1.0 + fd1.abs()));
            assert!((fd2 - rho_d2(t)).abs() < 1e-5 * (1.0 + fd2.abs()));
        }
    }

    #[test]
    fn step_midpoint_and_constants() {
        let f = GridFunction::from_fn(-1.0, 1.0, 2001, |x| {
            if x < 0.0 {
                1.0
            } else if x > 0.0 {
                3.0
            } else {
                2.0
            }
        })
        .unwrap();
        let m = Mollified::new(&f, 0.05).unwrap();
        assert!((m.value(0.0) - 2.0).abs() < 1e-13, "{}", m.value(0.0));
        assert!((m.value(-0.5) - 1.0).abs() < 1e-13);
        assert!((m.value(0.5) - 3.0).abs() < 1e-13);
    }

    #[test]
    fn unresolved_delta_is_rejected() {
        let f = GridFunction::from_fn(0.0, 1.0, 11, |_| 1.0).unwrap();
        assert!(matches!(mollify(&f, 0.39), Err(Error::MollifierUnresolved { .. })));
        assert!(mollify(&f, 0.4).is_ok());
    }
}

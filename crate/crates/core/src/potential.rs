//! Potentials `ψ_f = g ∗ f` and energies of grid functions.
//!
//! A grid function is read as its piecewise-linear interpolant. On each cell
//! the integral of `g(x − y)·(linear)` reduces to differences of the two
//! antiderivatives `∫g` and `∫g·t`, which are continuous through the kernel
//! singularity, so no cell needs special treatment.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::kernel::Kernel;
use crate::measure::GridFunction;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialValue {
    pub value: f64,
    pub error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constancy {
    pub mean: f64,
    pub stdev: f64,
    pub max_dev: f64,
    pub count: usize,
}

impl Constancy {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let max_dev = values.iter().fold(0.0f64, |m, v| m.max((v - mean).abs()));
        Some(Self { mean, stdev: var.sqrt(), max_dev, count: values.len() })
    }

    /// `stdev / |mean|`.
    pub fn relative_stdev(&self) -> f64 {
        self.stdev / self.mean.abs()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PotentialProfile {
    pub query_points: Vec<f64>,
    #[serde(with = "crate::ext::vec")]
    pub values: Vec<f64>,
    pub error_estimates: Vec<f64>,
    /// Statistics over the query points inside the designated interval.
    pub constancy: Option<Constancy>,
    pub interval: (f64, f64),
}

impl PotentialProfile {
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> crate::Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["x", "psi", "err"])?;
        for i in 0..self.values.len() {
            wr.write_record([
                self.query_points[i].to_string(),
                self.values[i].to_string(),
                self.error_estimates[i].to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// ψ_f(x) with an error estimate.
pub fn potential_at(k: &Kernel, f: &GridFunction, x: f64) -> PotentialValue {
    let n = f.n();
    let h = f.h();
    let v = f.values();
    let mut acc = 0.0;
    let mut mag = 0.0;
    let mut cache: Option<(usize, (f64, f64))> = None;
    let anti = |j: usize, cache: &mut Option<(usize, (f64, f64))>| -> (f64, f64) {
        if let Some((i, val)) = *cache {
            if i == j {
                return val;
            }
        }
        let val = k.signed_antiderivatives(x - f.x(j));
        *cache = Some((j, val));
        val
    };
    for j in 0..n - 1 {
        if v[j] == 0.0 && v[j + 1] == 0.0 {
            continue;
        }
        let (g0l, g1l) = anti(j, &mut cache);
        let (g0r, g1r) = anti(j + 1, &mut cache);
        let d0 = g0l - g0r;
        let d1 = g1l - g1r;
        let s = (v[j + 1] - v[j]) / h;
        let c = v[j] + s * (x - f.x(j));
        acc += c * d0 - s * d1;
        mag += (c * d0).abs() + (s * d1).abs();
    }
    PotentialValue { value: acc, error: 8.0 * f64::EPSILON * mag + singular_cell_term(k, f, x) }
}

/// Interpolation remainder near the singularity: local second difference of
/// the samples times `∫_{−2h}^{2h} |g|`.
fn singular_cell_term(k: &Kernel, f: &GridFunction, x: f64) -> f64 {
    if !(x >= f.a() && x <= f.b()) {
        return 0.0;
    }
    let n = f.n();
    let h = f.h();
    let i = (((x - f.a()) / h).round() as usize).min(n - 1);
    let v = f.values();
    let lo = i.saturating_sub(2).max(1);
    let hi = (i + 2).min(n - 2);
    let mut curv = 0.0f64;
    for j in lo..=hi {
        curv = curv.max((v[j - 1] - 2.0 * v[j] + v[j + 1]).abs());
    }
    let mass_near = 2.0 * k.antiderivatives(2.0 * h).0.abs();
    curv / 8.0 * mass_near
}

/// Maps `potential_at` over the query points (in parallel); constancy
/// statistics are taken over points inside `(a, b)` of `f`.
pub fn potential_profile(k: &Kernel, f: &GridFunction, xs: &[f64]) -> PotentialProfile {
    potential_profile_on(k, f, xs, (f.a(), f.b()))
}

/// As `potential_profile`, with constancy statistics over the open interval.
pub fn potential_profile_on(k: &Kernel, f: &GridFunction, xs: &[f64], interval: (f64, f64)) -> PotentialProfile {
    let vals: Vec<PotentialValue> = xs.par_iter().map(|&x| potential_at(k, f, x)).collect();
    let values: Vec<f64> = vals.iter().map(|p| p.value).collect();
    let inside: Vec<f64> = xs
        .iter()
        .zip(&values)
        .filter(|(x, _)| **x > interval.0 && **x < interval.1)
        .map(|(_, v)| *v)
        .collect();
    PotentialProfile {
        query_points: xs.to_vec(),
        error_estimates: vals.iter().map(|p| p.error).collect(),
        values,
        constancy: Constancy::of(&inside),
        interval,
    }
}

const GL5_X: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_664,
];
const GL5_W: [f64; 5] = [
    0.236_926_885_056_189_08,
    0.478_628_670_499_366_47,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_47,
    0.236_926_885_056_189_08,
];

/// `E = ∫ ψ_f f` by five-point Gauss–Legendre on pieces of each cell, graded
/// geometrically toward the nodes where ψ loses smoothness: kinks of `f`
/// give `|t|^{λ+2}`-type terms and the jump of the zero extension at a
/// nonzero grid end gives `|t|^{λ+1}`, which is graded further.
pub fn energy(k: &Kernel, f: &GridFunction) -> f64 {
    let h = f.h();
    let n = f.n();
    let v = f.values();
    (0..n - 1)
        .into_par_iter()
        .map(|j| {
            if v[j] == 0.0 && v[j + 1] == 0.0 {
                return 0.0;
            }
            let x0 = f.x(j);
            let piece = |lo: f64, hi: f64| -> f64 {
                let mut s = 0.0;
                for q in 0..5 {
                    let t = lo + (hi - lo) * 0.5 * (GL5_X[q] + 1.0);
                    let fx = v[j] + (v[j + 1] - v[j]) * t;
                    s += GL5_W[q] * fx * potential_at(k, f, x0 + t * h).value;
                }
                0.5 * (hi - lo) * h * s
            };
            let left = if j == 0 && v[0] != 0.0 { END_LEVELS } else { NODE_LEVELS };
            let right = if j == n - 2 && v[n - 1] != 0.0 { END_LEVELS } else { NODE_LEVELS };
            let mut total = 0.0;
            let mut w = 0.5;
            for _ in 0..left {
                total += piece(0.5 * w, w);
                w *= 0.5;
            }
            total += piece(0.0, w);
            let mut w = 0.5;
            for _ in 0..right {
                total += piece(1.0 - w, 1.0 - 0.5 * w);
                w *= 0.5;
            }
            total + piece(1.0 - w, 1.0)
        })
        .sum()
}

const NODE_LEVELS: usize = 3;
const END_LEVELS: usize = 40;

/// Trapezoid energy `Σ w_i f_i ψ(x_i)` from node potentials.
pub fn energy_trapezoid(f: &GridFunction, psi: &[f64]) -> f64 {
    (0..f.n()).map(|i| f.weight(i) * f.values()[i] * psi[i]).sum()
}

/// Dense matrix `K` with `(K f)_i = ψ_f(x_i)` for grid functions on a fixed
/// grid, exact for the piecewise-linear interpolant.
#[derive(Debug, Clone)]
pub struct PotentialOperator {
    n: usize,
    matrix: Vec<f64>,
}

impl PotentialOperator {
    pub fn new(k: &Kernel, a: f64, b: f64, n: usize) -> crate::Result<Self> {
        let grid = GridFunction::new(a, b, vec![0.0; n])?;
        let h = grid.h();
        let xs = grid.xs();
        let mut matrix = vec![0.0; n * n];
        matrix.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            let x = xs[i];
            let anti: Vec<(f64, f64)> = xs.iter().map(|&y| k.signed_antiderivatives(x - y)).collect();
            for j in 0..n - 1 {
                let d0 = anti[j].0 - anti[j + 1].0;
                let d1 = anti[j].1 - anti[j + 1].1;
                let am = (x - xs[j]) * d0 - d1;
                row[j] += d0 - am / h;
                row[j + 1] += am / h;
            }
        });
        Ok(Self { n, matrix })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        assert_eq!(f.len(), self.n);
        self.matrix
            .par_chunks(self.n)
            .map(|row| row.iter().zip(f).map(|(k, v)| k * v).sum())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(n: usize) -> GridFunction {
        GridFunction::from_fn(-1.0, 1.0, n, |_| 0.5).unwrap()
    }

    #[test]
    fn seven_sixths() {
        let k = Kernel::power_law(2.0, 0.0).unwrap();
        let p = potential_at(&k, &uniform(11), 0.0);
        assert!((p.value - 7.0 / 6.0).abs() < 1e-13, "{}", p.value);
    }

    #[test]
    fn zero_mass_gives_zero() {
        let k = Kernel::power_law(2.0, -0.5).unwrap();
        let f = GridFunction::new(-1.0, 1.0, vec![0.0; 21]).unwrap();
        assert_eq!(potential_at(&k, &f, 0.3).value, 0.0);
        assert_eq!(energy(&k, &f), 0.0);
    }

    #[test]
    fn operator_matches_pointwise() {
        let k = Kernel::power_law(2.0, 0.5).unwrap();
        let f = GridFunction::from_fn(-1.0, 1.0, 31, |x| (1.0 - x * x) * (1.0 + 0.3 * x)).unwrap();
        let op = PotentialOperator::new(&k, -1.0, 1.0, 31).unwrap();
        let psi = op.apply(f.values());
        for i in 0..31 {
            let p = potential_at(&k, &f, f.x(i)).value;
            assert!((psi[i] - p).abs() < 1e-13, "{i}: {} {}", psi[i], p);
        }
    }

    #[test]
    fn constancy_stats() {
        let c = Constancy::of(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(c.max_dev, 0.0);
        assert!(Constancy::of(&[]).is_none());
    }
}

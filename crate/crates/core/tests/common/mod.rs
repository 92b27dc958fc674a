//! Independent oracles and test profiles shared by the integration tests.
#![allow(dead_code)]

use riesz_core::measure::GridFunction;
use riesz_core::Kernel;

/// Gauss–Legendre nodes and weights on [−1, 1] by Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

/// `∫ g(x − y) f(y) dy` cell by cell. On each cell the linear piece `ℓ` is
/// integrated as `I(hi) − I(lo)` with `I(e) = ∫_x^e g(x − y) ℓ(y) dy`, and
/// `y = x ± u⁴` smooths the kernel singularity at `x`.
pub fn psi_oracle(k: &Kernel, f: &GridFunction, x: f64, gl: &[(f64, f64)]) -> f64 {
    let v = f.values();
    let h = f.h();
    let mut total = 0.0;
    for j in 0..f.n() - 1 {
        if v[j] == 0.0 && v[j + 1] == 0.0 {
            continue;
        }
        let xj = f.x(j);
        let slope = (v[j + 1] - v[j]) / h;
        let lin = |y: f64| v[j] + slope * (y - xj);
        let from_x = |e: f64| -> f64 {
            let len = (e - x).abs();
            if len == 0.0 {
                return 0.0;
            }
            let sign = (e - x).signum();
            let s = len.powf(0.25);
            gl.iter()
                .map(|(t, w)| {
                    let u = 0.5 * s * (t + 1.0);
                    let u4 = u * u * u * u;
                    w * 0.5 * s * 4.0 * u * u * u * k.g(u4) * lin(x + sign * u4)
                })
                .sum::<f64>()
                * sign
        };
        total += from_x(f.x(j + 1)) - from_x(xj);
    }
    total
}

/// `∬ g(x − y) f(x) f(y)` with the inner oracle at outer Gauss points; each
/// outer cell is split geometrically toward both ends, where ψ is least
/// regular.
pub fn energy_oracle(k: &Kernel, f: &GridFunction) -> f64 {
    let gl = gauss_legendre(40);
    let outer = gauss_legendre(10);
    let levels = 16;
    let mut e = 0.0;
    for j in 0..f.n() - 1 {
        let (lo, hi) = (f.x(j), f.x(j + 1));
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        let mut pieces = Vec::new();
        for m in 0..levels {
            let (p, q) = (half * 0.5f64.powi(m + 1), half * 0.5f64.powi(m));
            pieces.push((lo + p, lo + q));
            pieces.push((hi - q, hi - p));
        }
        let tail = half * 0.5f64.powi(levels);
        pieces.push((lo, lo + tail));
        pieces.push((hi - tail, hi));
        let _ = mid;
        for (a, b) in pieces {
            for (t, w) in &outer {
                let x = 0.5 * (a + b) + 0.5 * (b - a) * t;
                e += w * 0.5 * (b - a) * f.eval(x) * psi_oracle(k, f, x, &gl);
            }
        }
    }
    e
}

/// `½ + ½ sin(4 ln|x|)`: even about 0, every left window sees the full range.
pub fn even_oscillator() -> GridFunction {
    GridFunction::from_fn(-0.3, 0.3, 3_000_001, |x| if x == 0.0 { 0.5 } else { 0.5 + 0.5 * (4.0 * x.abs().ln()).sin() })
        .unwrap()
}

/// Odd about 0 with left branch `−¼ + ¾ sin(4 ln|x|)`.
pub fn odd_oscillator() -> GridFunction {
    let left = |x: f64| -0.25 + 0.75 * (4.0 * (-x).ln()).sin();
    GridFunction::from_fn(-0.3, 0.3, 6_000_001, |x| {
        if x < 0.0 {
            left(x)
        } else if x > 0.0 {
            -left(-x)
        } else {
            0.0
        }
    })
    .unwrap()
}

/// Equilibrium density of `k = (2, 0)`.
pub fn semicircle(x: f64) -> f64 {
    (2.0 - x * x).max(0.0).sqrt() / std::f64::consts::PI
}

/// Inverse CDF of the semicircle law on [−√2, √2] by bisection on the
/// closed-form distribution function.
pub fn semicircle_quantile(q: f64) -> f64 {
    let cdf = |x: f64| {
        let s = std::f64::consts::SQRT_2;
        let u = (x / s).clamp(-1.0, 1.0);
        0.5 + (u * (1.0 - u * u).sqrt() + u.asin()) / std::f64::consts::PI
    };
    let (mut lo, mut hi) = (-2.0f64, 2.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

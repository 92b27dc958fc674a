use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};

/// Kernel given by samples of g, g′ and optionally g″ on `x ≥ 0`.
///
/// g is the cubic Hermite interpolant of (g, g′); g′ is the Hermite
/// interpolant of (g′, g″) when g″ is present and piecewise linear
/// otherwise. Outside the table the kernel continues linearly. Rows with
/// negative abscissae are kept only for the symmetry check.
#[derive(Debug, Clone)]
pub struct TabulatedKernel {
    xs: Vec<f64>,
    g: Vec<f64>,
    gp: Vec<f64>,
    gpp: Option<Vec<f64>>,
    mirror: Vec<(f64, f64)>,
    cum0: Vec<f64>,
    cum1: Vec<f64>,
}

#[derive(Deserialize)]
struct Row {
    x: f64,
    g: f64,
    gprime: f64,
    #[serde(default)]
    gsecond: Option<f64>,
}

/// Local cubic `c0 + c1 s + c2 s² + c3 s³` on a table segment.
#[derive(Clone, Copy)]
struct Cubic([f64; 4]);

impl Cubic {
    fn hermite(h: f64, y0: f64, y1: f64, m0: f64, m1: f64) -> Self {
        let d = (y1 - y0) / h;
        Cubic([y0, m0, (3.0 * d - 2.0 * m0 - m1) / h, (m0 + m1 - 2.0 * d) / (h * h)])
    }

    fn eval(&self, s: f64) -> f64 {
        let c = &self.0;
        c[0] + s * (c[1] + s * (c[2] + s * c[3]))
    }

    fn deriv(&self, s: f64) -> f64 {
        let c = &self.0;
        c[1] + s * (2.0 * c[2] + s * 3.0 * c[3])
    }

    /// ∫₀^σ p(s) ds and ∫₀^σ p(s)(x0 + s) ds.
    fn moments(&self, x0: f64, sig: f64) -> (f64, f64) {
        let c = &self.0;
        let m0 = sig * (c[0] + sig * (c[1] / 2.0 + sig * (c[2] / 3.0 + sig * c[3] / 4.0)));
        let ms = sig * sig * (c[0] / 2.0 + sig * (c[1] / 3.0 + sig * (c[2] / 4.0 + sig * c[3] / 5.0)));
        (m0, x0 * m0 + ms)
    }
}

impl TabulatedKernel {
    pub fn new(
        xs: Vec<f64>,
        g: Vec<f64>,
        gp: Vec<f64>,
        gpp: Option<Vec<f64>>,
        mirror: Vec<(f64, f64)>,
    ) -> Result<Self> {
        let n = xs.len();
        if n < 4 {
            return Err(Error::InvalidKernel("tabulated kernel needs at least 4 rows with x >= 0".into()));
        }
        if g.len() != n || gp.len() != n || gpp.as_ref().is_some_and(|v| v.len() != n) {
            return Err(Error::InvalidKernel("column lengths differ".into()));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidKernel("abscissae must be strictly increasing".into()));
        }
        if xs.iter().chain(&g).chain(&gp).any(|v| !v.is_finite()) {
            return Err(Error::InvalidKernel("table entries must be finite".into()));
        }
        let mut t = Self { xs, g, gp, gpp, mirror, cum0: vec![], cum1: vec![] };
        t.build_cumulative();
        Ok(t)
    }

    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
        let mut rows: Vec<Row> = Vec::new();
        for rec in rdr.deserialize() {
            rows.push(rec?);
        }
        let has_second = rows.iter().all(|r| r.gsecond.is_some()) && !rows.is_empty();
        let mut mirror = Vec::new();
        let (mut xs, mut g, mut gp, mut gpp) = (vec![], vec![], vec![], vec![]);
        for r in rows {
            if r.x < 0.0 {
                mirror.push((r.x, r.g));
                continue;
            }
            xs.push(r.x);
            g.push(r.g);
            gp.push(r.gprime);
            gpp.push(r.gsecond.unwrap_or(0.0));
        }
        Self::new(xs, g, gp, has_second.then_some(gpp), mirror)
    }

    fn segment(&self, x: f64) -> Option<usize> {
        let n = self.xs.len();
        if x < self.xs[0] || x > self.xs[n - 1] {
            return None;
        }
        let i = self.xs.partition_point(|&v| v <= x);
        Some(i.saturating_sub(1).min(n - 2))
    }

    fn g_cubic(&self, i: usize) -> Cubic {
        let h = self.xs[i + 1] - self.xs[i];
        Cubic::hermite(h, self.g[i], self.g[i + 1], self.gp[i], self.gp[i + 1])
    }

    pub fn value(&self, x: f64) -> f64 {
        let n = self.xs.len();
        match self.segment(x) {
            Some(i) => self.g_cubic(i).eval(x - self.xs[i]),
            None if x < self.xs[0] => self.g[0] + self.gp[0] * (x - self.xs[0]),
            None => self.g[n - 1] + self.gp[n - 1] * (x - self.xs[n - 1]),
        }
    }

    pub fn slope(&self, x: f64) -> f64 {
        let n = self.xs.len();
        match self.segment(x) {
            Some(i) => {
                let h = self.xs[i + 1] - self.xs[i];
                let s = x - self.xs[i];
                match &self.gpp {
                    Some(c) => Cubic::hermite(h, self.gp[i], self.gp[i + 1], c[i], c[i + 1]).eval(s),
                    None => self.gp[i] + (self.gp[i + 1] - self.gp[i]) * s / h,
                }
            }
            None if x < self.xs[0] => self.gp[0],
            None => self.gp[n - 1],
        }
    }

    pub fn curvature(&self, x: f64) -> Option<f64> {
        let c = self.gpp.as_ref()?;
        let n = self.xs.len();
        Some(match self.segment(x) {
            Some(i) => {
                let h = self.xs[i + 1] - self.xs[i];
                Cubic::hermite(h, self.gp[i], self.gp[i + 1], c[i], c[i + 1]).deriv(x - self.xs[i])
            }
            None if x < self.xs[0] => 0.0,
            None => {
                let _ = n;
                0.0
            }
        })
    }

    pub fn has_curvature(&self) -> bool {
        self.gpp.is_some()
    }

    pub fn min_abscissa(&self) -> f64 {
        self.xs.iter().copied().find(|&x| x > 0.0).unwrap_or(self.xs[1])
    }

    pub fn max_abscissa(&self) -> f64 {
        *self.xs.last().unwrap()
    }

    pub fn mirror_rows(&self) -> &[(f64, f64)] {
        &self.mirror
    }

    /// Window up to the first sign change of g′ from negative to
    /// nonnegative; the table extent when g′ never changes sign.
    pub fn window(&self) -> f64 {
        let n = self.xs.len();
        let first_neg = self.gp.iter().position(|&v| v < 0.0);
        let Some(start) = first_neg else {
            return self.max_abscissa();
        };
        for i in start..n - 1 {
            if self.gp[i + 1] >= 0.0 {
                let root = crate::quad::bisect(|x| self.slope(x), self.xs[i], self.xs[i + 1], 200);
                return root.unwrap_or(self.xs[i + 1]);
            }
        }
        self.max_abscissa()
    }

    fn build_cumulative(&mut self) {
        let n = self.xs.len();
        let (x0, g0, m0) = (self.xs[0], self.g[0], self.gp[0]);
        // linear continuation on [0, x0]
        let a = g0 - m0 * x0;
        let mut c0 = vec![a * x0 + 0.5 * m0 * x0 * x0];
        let mut c1 = vec![0.5 * a * x0 * x0 + m0 * x0 * x0 * x0 / 3.0];
        for i in 0..n - 1 {
            let h = self.xs[i + 1] - self.xs[i];
            let (p0, p1) = self.g_cubic(i).moments(self.xs[i], h);
            c0.push(c0[i] + p0);
            c1.push(c1[i] + p1);
        }
        self.cum0 = c0;
        self.cum1 = c1;
    }

    pub fn antiderivatives(&self, u: f64) -> (f64, f64) {
        let n = self.xs.len();
        let (x0, g0, m0) = (self.xs[0], self.g[0], self.gp[0]);
        if u <= x0 {
            let a = g0 - m0 * x0;
            return (a * u + 0.5 * m0 * u * u, 0.5 * a * u * u + m0 * u * u * u / 3.0);
        }
        if u >= self.xs[n - 1] {
            let xe = self.xs[n - 1];
            let (ge, me) = (self.g[n - 1], self.gp[n - 1]);
            let s = u - xe;
            let p0 = ge * s + 0.5 * me * s * s;
            let ps = 0.5 * ge * s * s + me * s * s * s / 3.0;
            return (self.cum0[n - 1] + p0, self.cum1[n - 1] + xe * p0 + ps);
        }
        let i = self.segment(u).unwrap();
        let (p0, p1) = self.g_cubic(i).moments(self.xs[i], u - self.xs[i]);
        (self.cum0[i] + p0, self.cum1[i] + p1)
    }

    /// Total variation of the interpolated g′ on `[lo, hi]`.
    pub fn slope_variation(&self, lo: f64, hi: f64) -> f64 {
        let mut pts = vec![lo];
        pts.extend(self.xs.iter().copied().filter(|&x| x > lo && x < hi));
        pts.push(hi);
        match &self.gpp {
            None => pts.windows(2).map(|w| (self.slope(w[1]) - self.slope(w[0])).abs()).sum(),
            Some(_) => pts
                .windows(2)
                .map(|w| {
                    crate::quad::integrate(
                        |x| self.curvature(x).unwrap_or(0.0).abs(),
                        w[0],
                        w[1],
                        crate::quad::Tolerance::new(1e-14, 1e-12),
                    )
                    .value
                })
                .sum(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table_from(f: impl Fn(f64) -> (f64, f64, f64), lo: f64, hi: f64, n: usize) -> TabulatedKernel {
        let xs: Vec<f64> = (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect();
        let (mut g, mut gp, mut gpp) = (vec![], vec![], vec![]);
        for &x in &xs {
            let (a, b, c) = f(x);
            g.push(a);
            gp.push(b);
            gpp.push(c);
        }
        TabulatedKernel::new(xs, g, gp, Some(gpp), vec![]).unwrap()
    }

    #[test]
    fn reproduces_smooth_kernel() {
        let t = table_from(|x| (x * x / 2.0 - x.ln(), x - 1.0 / x, 1.0 + 1.0 / (x * x)), 1e-3, 5.0, 2000);
        for &x in &[0.01, 0.3, 0.77, 2.5] {
            assert!((t.value(x) - (x * x / 2.0 - x.ln())).abs() < 1e-8);
            assert!((t.slope(x) - (x - 1.0 / x)).abs() < 1e-6);
        }
        assert!((t.window() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn cumulative_moments_match_quadrature() {
        let t = table_from(|x| (x.powi(3) - x, 3.0 * x * x - 1.0, 6.0 * x), 0.1, 2.0, 50);
        let u = 1.37;
        let (p0, p1) = t.antiderivatives(u);
        let q0 = crate::quad::integrate(|x| t.value(x), 0.0, u, Default::default()).value;
        let q1 = crate::quad::integrate(|x| t.value(x) * x, 0.0, u, Default::default()).value;
        assert!((p0 - q0).abs() < 1e-12, "{p0} {q0}");
        assert!((p1 - q1).abs() < 1e-12, "{p1} {q1}");
    }
}

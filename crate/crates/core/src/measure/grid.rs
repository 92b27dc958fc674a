use std::io::{Read, Write};
use std::ops::Deref;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Samples of a (possibly signed) function on a uniform grid over `[a, b]`,
/// read as its piecewise-linear interpolant, extended by zero outside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    a: f64,
    b: f64,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(a: f64, b: f64, values: Vec<f64>) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::Precondition(format!("grid needs a < b, got [{a}, {b}]")));
        }
        if values.len() < 2 {
            return Err(Error::Precondition("grid needs at least 2 points".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Precondition("grid values must be finite".into()));
        }
        Ok(Self { a, b, values })
    }

    pub fn from_fn(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::Precondition("grid needs at least 2 points".into()));
        }
        let values = (0..n).map(|i| f(node(a, b, n, i))).collect();
        Self::new(a, b, values)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn h(&self) -> f64 {
        (self.b - self.a) / (self.n() - 1) as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        node(self.a, self.b, self.n(), i)
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.x(i)).collect()
    }

    /// Trapezoid weight of node `i`.
    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        if i == 0 || i + 1 == self.n() {
            0.5 * self.h()
        } else {
            self.h()
        }
    }

    /// Linear interpolant, zero outside `[a, b]`.
    pub fn eval(&self, x: f64) -> f64 {
        if !(x >= self.a && x <= self.b) {
            return 0.0;
        }
        let h = self.h();
        let u = (x - self.a) / h;
        let i = (u.floor() as usize).min(self.n() - 2);
        let t = u - i as f64;
        self.values[i] * (1.0 - t) + self.values[i + 1] * t
    }

    pub fn integral(&self) -> f64 {
        let v = &self.values;
        let inner: f64 = v[1..v.len() - 1].iter().sum();
        self.h() * (inner + 0.5 * (v[0] + v[v.len() - 1]))
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { a: self.a, b: self.b, values: self.values.iter().map(|v| v * c).collect() }
    }

    /// `∫|self − g|` by trapezoid on this grid, with `g` evaluated at nodes.
    pub fn l1_distance(&self, g: impl Fn(f64) -> f64) -> f64 {
        (0..self.n()).map(|i| self.weight(i) * (self.values[i] - g(self.x(i))).abs()).sum()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["x", "f"])?;
        for (i, v) in self.values.iter().enumerate() {
            wr.write_record([self.x(i).to_string(), v.to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    /// Reads a two-column `x,f` CSV with strictly increasing, uniformly
    /// spaced abscissae (1e-9 tolerance relative to the span).
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let headers = rdr.headers()?.clone();
        if headers.len() < 2 || &headers[0] != "x" || &headers[1] != "f" {
            return Err(Error::Parse(format!("expected header `x,f`, got `{}`", headers.iter().collect::<Vec<_>>().join(","))));
        }
        let mut xs = Vec::new();
        let mut fs = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let parse = |k: usize| -> Result<f64> {
                rec.get(k)
                    .ok_or_else(|| Error::Parse(format!("row {}: missing column", line + 2)))?
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("row {}: {e}", line + 2)))
            };
            xs.push(parse(0)?);
            fs.push(parse(1)?);
        }
        if xs.len() < 2 {
            return Err(Error::Parse("density file needs at least 2 rows".into()));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Parse("abscissae must be strictly increasing".into()));
        }
        let (a, b) = (xs[0], xs[xs.len() - 1]);
        let n = xs.len();
        let h = (b - a) / (n - 1) as f64;
        let tol = 1e-9 * (b - a).abs().max(1.0);
        if let Some(i) = (0..n).find(|&i| (xs[i] - (a + i as f64 * h)).abs() > tol) {
            return Err(Error::Parse(format!("non-uniform spacing at row {} (x = {})", i + 2, xs[i])));
        }
        Self::new(a, b, fs)
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

/// Convex-combination node formula: endpoints exact, and grids symmetric
/// about 0 have exactly antisymmetric nodes.
#[inline]
fn node(a: f64, b: f64, n: usize, i: usize) -> f64 {
    let m = (n - 1) as f64;
    let k = i as f64;
    (a * (m - k) + b * k) / m
}

/// Nonnegative density on a uniform grid with its mass, sup norm and
/// support diameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridFunction")]
pub struct GridDensity {
    #[serde(flatten)]
    inner: GridFunction,
    mass: f64,
    m: f64,
}

impl GridDensity {
    pub fn new(inner: GridFunction) -> Result<Self> {
        if let Some(v) = inner.values.iter().find(|v| **v < 0.0) {
            return Err(Error::Precondition(format!("density has a negative sample {v}")));
        }
        let mass = inner.integral();
        let m = inner.sup_abs();
        Ok(Self { inner, mass, m })
    }

    /// Clamps roundoff-level negatives (≥ −tol) to zero before validating.
    pub fn from_clamped(mut inner: GridFunction, tol: f64) -> Result<Self> {
        for v in inner.values.iter_mut() {
            if *v < 0.0 && *v >= -tol {
                *v = 0.0;
            }
        }
        Self::new(inner)
    }

    pub fn from_fn(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(GridFunction::from_fn(a, b, n, f)?)
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// L∞ bound `M`.
    pub fn sup(&self) -> f64 {
        self.m
    }

    /// Support diameter `D = b − a`.
    pub fn diameter(&self) -> f64 {
        self.inner.b - self.inner.a
    }

    pub fn as_function(&self) -> &GridFunction {
        &self.inner
    }

    pub fn into_function(self) -> GridFunction {
        self.inner
    }

    pub fn normalized(&self) -> Result<Self> {
        if !(self.mass > 0.0) {
            return Err(Error::Precondition("cannot normalize a density of zero mass".into()));
        }
        Self::new(self.inner.scaled(1.0 / self.mass))
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        Self::new(GridFunction::load_csv(path)?)
    }
}

impl TryFrom<GridFunction> for GridDensity {
    type Error = Error;
    fn try_from(f: GridFunction) -> Result<Self> {
        Self::new(f)
    }
}

impl Deref for GridDensity {
    type Target = GridFunction;
    fn deref(&self) -> &GridFunction {
        &self.inner
    }
}

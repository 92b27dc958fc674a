//! Interaction kernels `g`, their derivatives, hypothesis certification and
//! the singularity ratio.

mod certify;
mod tabulated;

pub use certify::{CertificateReport, ClauseResult, ClauseStatus, ConvergenceReport, LambdaEstimate};
pub use tabulated::TabulatedKernel;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{self, Tolerance};

/// JSON kernel specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum KernelSpec {
    PowerLaw { alpha: f64, lambda: f64 },
    Tabulated { file: PathBuf },
}

impl KernelSpec {
    pub fn power_law(alpha: f64, lambda: f64) -> Self {
        KernelSpec::PowerLaw { alpha, lambda }
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[derive(Debug, Clone)]
pub enum KernelForm {
    /// `|x|^α/α − |x|^λ/λ`, with `−log|x|` in place of the second term at λ = 0.
    PowerLaw { alpha: f64, lambda: f64 },
    Tabulated(Arc<TabulatedKernel>),
}

/// An even interaction kernel with its certified window and singularity
/// constants. Immutable once built.
#[derive(Debug, Clone)]
pub struct Kernel {
    form: KernelForm,
    spec: KernelSpec,
    r: f64,
    lambda_ratio: f64,
    lambda_bar: f64,
    lambda_flagged: bool,
}

/// Serializable summary of a constructed kernel.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelSummary {
    pub spec: KernelSpec,
    pub r: f64,
    #[serde(with = "crate::ext")]
    pub lambda: f64,
    pub lambda_bar: f64,
    /// Set when the ratio sequence did not settle and Λ is a running minimum.
    pub lambda_flagged: bool,
}

/// `Λ̄ = min{2, (1+Λ)/2}`.
pub fn lambda_bar_of(lambda: f64) -> f64 {
    if lambda.is_infinite() {
        2.0
    } else {
        (0.5 * (1.0 + lambda)).min(2.0)
    }
}

impl Kernel {
    pub fn power_law(alpha: f64, lambda: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidKernel(format!("alpha must be positive, got {alpha}")));
        }
        if !(lambda.is_finite() && lambda > -1.0 && lambda < alpha.min(1.0)) {
            return Err(Error::InvalidKernel(format!(
                "lambda must lie in (-1, min(1, alpha)) = (-1, {}), got {lambda}",
                alpha.min(1.0)
            )));
        }
        let r = power_law_window(alpha, lambda);
        let ratio = 2f64.powf(1.0 - lambda);
        Ok(Self {
            form: KernelForm::PowerLaw { alpha, lambda },
            spec: KernelSpec::power_law(alpha, lambda),
            r,
            lambda_ratio: ratio,
            lambda_bar: lambda_bar_of(ratio),
            lambda_flagged: false,
        })
    }

    pub fn tabulated(table: TabulatedKernel, file: PathBuf) -> Result<Self> {
        let table = Arc::new(table);
        let r = table.window();
        let mut k = Self {
            form: KernelForm::Tabulated(table.clone()),
            spec: KernelSpec::Tabulated { file },
            r,
            lambda_ratio: f64::NAN,
            lambda_bar: f64::NAN,
            lambda_flagged: false,
        };
        let x0 = 0.5 * r;
        let available = (x0 / table.min_abscissa().max(f64::MIN_POSITIVE)).log2().floor() as i64;
        let levels = available.clamp(10, 40) as usize;
        let (ratio, flagged) = match k.estimate_lambda(x0, levels) {
            Ok(est) => (est.value, false),
            Err(Error::OscillatoryRatio { running_min }) => (running_min, true),
            Err(e) => return Err(e),
        };
        k.lambda_ratio = ratio;
        k.lambda_bar = lambda_bar_of(ratio);
        k.lambda_flagged = flagged;
        Ok(k)
    }

    /// Builds a kernel from its JSON spec; relative table paths resolve
    /// against `base`.
    pub fn from_spec(spec: &KernelSpec, base: Option<&Path>) -> Result<Self> {
        match spec {
            KernelSpec::PowerLaw { alpha, lambda } => Self::power_law(*alpha, *lambda),
            KernelSpec::Tabulated { file } => {
                let path = match base {
                    Some(b) if file.is_relative() => b.join(file),
                    _ => file.clone(),
                };
                let table = TabulatedKernel::from_csv(&path)?;
                Self::tabulated(table, file.clone())
            }
        }
    }

    pub fn form(&self) -> &KernelForm {
        &self.form
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    /// Certified window on which g′ < 0, g″ ≥ 0 and g‴ ≤ 0.
    pub fn r(&self) -> f64 {
        self.r
    }

    /// Singularity ratio Λ (may be +∞).
    pub fn lambda_ratio(&self) -> f64 {
        self.lambda_ratio
    }

    pub fn lambda_bar(&self) -> f64 {
        self.lambda_bar
    }

    pub fn summary(&self) -> KernelSummary {
        KernelSummary {
            spec: self.spec.clone(),
            r: self.r,
            lambda: self.lambda_ratio,
            lambda_bar: self.lambda_bar,
            lambda_flagged: self.lambda_flagged,
        }
    }

    /// Repulsive exponent for power laws; `None` for tabulated kernels.
    pub fn repulsive_exponent(&self) -> Option<f64> {
        match self.form {
            KernelForm::PowerLaw { lambda, .. } => Some(lambda),
            KernelForm::Tabulated(_) => None,
        }
    }

    /// g(x); +∞ at the origin when the kernel is singular there.
    pub fn g(&self, x: f64) -> f64 {
        let x = x.abs();
        match &self.form {
            KernelForm::PowerLaw { alpha, lambda } => {
                if x == 0.0 {
                    return if *lambda <= 0.0 { f64::INFINITY } else { 0.0 };
                }
                let attr = x.powf(*alpha) / alpha;
                if *lambda == 0.0 {
                    attr - x.ln()
                } else {
                    attr - x.powf(*lambda) / lambda
                }
            }
            KernelForm::Tabulated(t) => t.value(x),
        }
    }

    /// g′(x), odd in x; domain error at the origin.
    pub fn gprime(&self, x: f64) -> Result<f64> {
        if x == 0.0 {
            return Err(Error::Domain("g' is not defined at the origin".into()));
        }
        Ok(self.dg(x))
    }

    /// Unchecked g′; NaN at the origin.
    #[inline]
    pub fn dg(&self, x: f64) -> f64 {
        if x == 0.0 {
            return f64::NAN;
        }
        let s = x.signum();
        let x = x.abs();
        s * match &self.form {
            KernelForm::PowerLaw { alpha, lambda } => x.powf(alpha - 1.0) - x.powf(lambda - 1.0),
            KernelForm::Tabulated(t) => t.slope(x),
        }
    }

    /// g″(x), even; `None` for tables without second-derivative data.
    pub fn d2g(&self, x: f64) -> Option<f64> {
        let x = x.abs();
        match &self.form {
            KernelForm::PowerLaw { alpha, lambda } => {
                Some((alpha - 1.0) * x.powf(alpha - 2.0) - (lambda - 1.0) * x.powf(lambda - 2.0))
            }
            KernelForm::Tabulated(t) => t.curvature(x),
        }
    }

    /// g″ with a central-difference fallback on g′ for bare tables.
    pub fn d2g_or_fd(&self, x: f64) -> f64 {
        self.d2g(x).unwrap_or_else(|| {
            let x = x.abs();
            let h = 1e-6 * x.max(1e-8);
            (self.dg(x + h) - self.dg((x - h).max(0.5 * x))) / (x + h - (x - h).max(0.5 * x))
        })
    }

    /// g‴(x), odd; only power laws carry it.
    pub fn d3g(&self, x: f64) -> Option<f64> {
        match &self.form {
            KernelForm::PowerLaw { alpha, lambda } => {
                let s = x.signum();
                let x = x.abs();
                Some(
                    s * ((alpha - 1.0) * (alpha - 2.0) * x.powf(alpha - 3.0)
                        - (lambda - 1.0) * (lambda - 2.0) * x.powf(lambda - 3.0)),
                )
            }
            KernelForm::Tabulated(_) => None,
        }
    }

    /// `(∫₀ᵘ g, ∫₀ᵘ g(t)·t dt)` for u ≥ 0.
    pub fn antiderivatives(&self, u: f64) -> (f64, f64) {
        debug_assert!(u >= 0.0);
        if u == 0.0 {
            return (0.0, 0.0);
        }
        match &self.form {
            KernelForm::PowerLaw { alpha, lambda } => {
                let (a, l) = (*alpha, *lambda);
                let p0a = u.powf(a + 1.0) / (a * (a + 1.0));
                let p1a = u.powf(a + 2.0) / (a * (a + 2.0));
                if l == 0.0 {
                    let lu = u.ln();
                    (p0a - (u * lu - u), p1a - (0.5 * u * u * lu - 0.25 * u * u))
                } else {
                    (
                        p0a - u.powf(l + 1.0) / (l * (l + 1.0)),
                        p1a - u.powf(l + 2.0) / (l * (l + 2.0)),
                    )
                }
            }
            KernelForm::Tabulated(t) => t.antiderivatives(u),
        }
    }

    /// Signed antiderivatives `G0(t) = ∫₀ᵗ g` (odd) and `G1(t) = ∫₀ᵗ g(s)s ds`
    /// (even), continuous through the origin.
    #[inline]
    pub fn signed_antiderivatives(&self, t: f64) -> (f64, f64) {
        let (p0, p1) = self.antiderivatives(t.abs());
        if t < 0.0 {
            (-p0, p1)
        } else {
            (p0, p1)
        }
    }

    /// Total variation of g′ on `[lo, hi]`.
    pub fn gprime_total_variation(&self, lo: f64, hi: f64) -> Result<f64> {
        if !(lo > 0.0) {
            return Err(Error::Domain(format!(
                "total variation of g' needs lo > 0, got {lo}"
            )));
        }
        if hi < lo {
            return Err(Error::Domain(format!("empty interval [{lo}, {hi}]")));
        }
        if hi == lo {
            return Ok(0.0);
        }
        match &self.form {
            KernelForm::PowerLaw { alpha, lambda } => {
                // g′ is monotone between consecutive roots of g″
                let mut cuts = vec![lo];
                if let Some(z) = power_law_curvature_root(*alpha, *lambda) {
                    if z > lo && z < hi {
                        cuts.push(z);
                    }
                }
                cuts.push(hi);
                Ok(cuts.windows(2).map(|w| (self.dg(w[1]) - self.dg(w[0])).abs()).sum())
            }
            KernelForm::Tabulated(t) => Ok(t.slope_variation(lo, hi)),
        }
    }

    /// `C(η, D, M, g) = 20 M { |g″|([η/2, D]) + 2 sup_{[η/2, D]} |g′| }`.
    pub fn ladder_constant(&self, eta: f64, diameter: f64, sup_norm: f64) -> Result<f64> {
        let lo = 0.5 * eta;
        let hi = diameter.max(lo);
        let tv = self.gprime_total_variation(lo, hi)?;
        let probes = 2000;
        let mut sup = self.dg(lo).abs().max(self.dg(hi).abs());
        for i in 1..probes {
            let x = lo * (hi / lo).powf(i as f64 / probes as f64);
            sup = sup.max(self.dg(x).abs());
        }
        Ok(20.0 * sup_norm * (tv + 2.0 * sup))
    }

    /// Whether `|g′(x/2)| > Λ̄ |g′(x)|` on a dense geometric probe of `(0, 2η)`;
    /// returns the first failing probe.
    pub fn good_lambda_violation(&self, eta: f64) -> Option<f64> {
        let top = 2.0 * eta;
        let probes = 400;
        (0..probes)
            .map(|i| top * (1e-12f64).powf(i as f64 / probes as f64) * (1.0 - 1e-9))
            .find(|&x| self.dg(0.5 * x).abs() <= self.lambda_bar * self.dg(x).abs())
    }

    /// Largest `η = r/8 · 2^{-k}` for which the ratio bound holds.
    pub fn good_lambda_eta(&self) -> Option<f64> {
        let mut eta = self.r / 8.0;
        for _ in 0..60 {
            if self.good_lambda_violation(eta).is_none() {
                return Some(eta);
            }
            eta *= 0.5;
        }
        None
    }

    /// Plain adaptive integral helper used by the checks below.
    pub(crate) fn shell_integral<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> quad::Estimate {
        quad::integrate(f, lo, hi, Tolerance::new(1e-15, 1e-13))
    }
}

/// Window `min(1, x*)` where g′ has its root at 1 and `x*` is the root of g‴
/// when it falls inside (0, 1) (only possible for α > 2).
pub fn power_law_window(alpha: f64, lambda: f64) -> f64 {
    match power_law_third_root(alpha, lambda) {
        Some(z) if z < 1.0 => z,
        _ => 1.0,
    }
}

fn power_law_third_root(alpha: f64, lambda: f64) -> Option<f64> {
    let ca = (alpha - 1.0) * (alpha - 2.0);
    let cl = (lambda - 1.0) * (lambda - 2.0);
    if ca <= 0.0 {
        return None;
    }
    Some((cl / ca).powf(1.0 / (alpha - lambda)))
}

fn power_law_curvature_root(alpha: f64, lambda: f64) -> Option<f64> {
    // (α−1) x^{α−2} = (λ−1) x^{λ−2}
    let ca = alpha - 1.0;
    let cl = lambda - 1.0;
    if ca >= 0.0 {
        return None;
    }
    Some((cl / ca).powf(1.0 / (alpha - lambda)))
}

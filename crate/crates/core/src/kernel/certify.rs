use serde::{Deserialize, Serialize};

use super::{Kernel, KernelForm};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClauseStatus {
    Pass,
    Fail,
    Unchecked,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClauseResult {
    pub clause: String,
    pub status: ClauseStatus,
    /// First probe at which the clause failed.
    pub first_violation: Option<f64>,
    pub detail: String,
}

impl ClauseResult {
    fn new(clause: &str, status: ClauseStatus, first_violation: Option<f64>, detail: impl Into<String>) -> Self {
        Self { clause: clause.into(), status, first_violation, detail: detail.into() }
    }

    fn from_probe(clause: &str, violation: Option<f64>, what: &str) -> Self {
        match violation {
            None => Self::new(clause, ClauseStatus::Pass, None, what),
            Some(x) => Self::new(clause, ClauseStatus::Fail, Some(x), format!("{what} violated at x = {x:e}")),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificateReport {
    pub r: f64,
    /// Positive root of g′, when known.
    pub gprime_root: Option<f64>,
    pub probe_count: usize,
    pub clauses: Vec<ClauseResult>,
    /// Closed-form verification of the clauses (power laws only).
    pub analytic: Option<bool>,
    pub passed: bool,
}

/// Partial sums of an improper integral over dyadic shells toward 0.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub r: f64,
    pub partial_sums: Vec<f64>,
    pub cauchy: bool,
    /// Asymptotic ratio of successive increments.
    pub ratio: f64,
    /// Partial sum plus geometric tail.
    pub limit: f64,
    pub closed_form: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LambdaEstimate {
    #[serde(with = "crate::ext")]
    pub value: f64,
    pub probes: Vec<f64>,
    #[serde(with = "crate::ext::vec")]
    pub ratios: Vec<f64>,
    pub running_min: f64,
    pub analytic: Option<f64>,
    /// Whether extrapolated and analytic values agree within 1e-3.
    pub agrees: Option<bool>,
}

impl Kernel {
    fn probes(&self, probe_count: usize) -> (Vec<f64>, Vec<f64>) {
        let ng = probe_count / 2;
        let nu = probe_count - ng;
        let r = self.r;
        let floor = match &self.form {
            KernelForm::PowerLaw { .. } => r * 1e-8,
            KernelForm::Tabulated(t) => t.min_abscissa().max(r * 1e-8),
        };
        let geo: Vec<f64> = (0..ng)
            .map(|k| floor * (r / floor).powf(k as f64 / ng as f64))
            .filter(|&x| x < r)
            .collect();
        let uni: Vec<f64> = (1..=nu).map(|k| r + 3.0 * r * k as f64 / nu as f64).collect();
        (geo, uni)
    }

    /// Checks symmetry, local integrability, monotone decrease, convexity and
    /// concavity of g′ on (0, r), plus g′ ∈ BV_loc beyond it.
    pub fn certify_hypotheses(&self, probe_count: usize) -> Result<CertificateReport> {
        if probe_count < 100 {
            return Err(Error::Precondition(format!("probe_count must be >= 100, got {probe_count}")));
        }
        let (geo, uni) = self.probes(probe_count);
        let all: Vec<f64> = geo.iter().chain(uni.iter()).copied().collect();
        let mut clauses = Vec::new();

        // symmetry
        let sym = match &self.form {
            KernelForm::Tabulated(t) if !t.mirror_rows().is_empty() => {
                let bad = t.mirror_rows().iter().find(|(x, gv)| {
                    let v = self.g(-x);
                    (v - gv).abs() > 1e-9 * (1.0 + gv.abs())
                });
                ClauseResult::from_probe("symmetric", bad.map(|b| b.0), "g(x) = g(-x) on tabulated rows")
            }
            _ => {
                let bad = all.iter().copied().find(|&x| {
                    let (a, b) = (self.g(x), self.g(-x));
                    let (da, db) = (self.dg(x), self.dg(-x));
                    (a - b).abs() > 1e-12 * (1.0 + a.abs()) || (da + db).abs() > 1e-12 * (1.0 + da.abs())
                });
                ClauseResult::from_probe("symmetric", bad, "g(x) = g(-x), g'(x) = -g'(-x)")
            }
        };
        clauses.push(sym);

        // local integrability: Cauchy tails of ∫|g| and of −∫g′t
        let tail_abs = self.shell_sums(self.r, 60, |t| self.g(t).abs());
        let lemma = self.check_lemma31_integrability(self.r, 60)?;
        let integrable = tail_abs.cauchy && lemma.cauchy;
        clauses.push(ClauseResult::new(
            "locally_integrable",
            if integrable { ClauseStatus::Pass } else { ClauseStatus::Fail },
            if integrable { None } else { Some(self.r * 0.5f64.powi(60)) },
            format!(
                "int_0^r |g| ~ {:.6e} (cauchy: {}), -int_0^r g't ~ {:.6e} (cauchy: {})",
                tail_abs.limit, tail_abs.cauchy, lemma.limit, lemma.cauchy
            ),
        ));

        // decreasing on (0, r)
        let bad = geo.iter().copied().find(|&x| !(self.dg(x) < 0.0));
        clauses.push(ClauseResult::from_probe("decreasing", bad, "g' < 0 on (0, r)"));

        // convexity on (0, r)
        let convex = match self.d2g(geo[0]) {
            Some(_) => {
                let bad = geo.iter().copied().find(|&x| {
                    let v = self.d2g(x).unwrap();
                    v < -1e-10 * self.curvature_scale(x)
                });
                ClauseResult::from_probe("convex", bad, "g'' >= 0 on (0, r)")
            }
            None => {
                let bad = geo.windows(2).find(|w| self.dg(w[1]) < self.dg(w[0]) - 1e-12 * self.dg(w[0]).abs());
                ClauseResult::from_probe("convex", bad.map(|w| w[1]), "g' nondecreasing on (0, r)")
            }
        };
        clauses.push(convex);

        // concavity of g′ on (0, r)
        let concave = match &self.form {
            KernelForm::PowerLaw { alpha, lambda } => {
                let bad = geo.iter().copied().find(|&x| {
                    let v = self.d3g(x).unwrap();
                    let scale = ((alpha - 1.0) * (alpha - 2.0) * x.powf(alpha - 3.0)).abs()
                        + ((lambda - 1.0) * (lambda - 2.0) * x.powf(lambda - 3.0)).abs();
                    v > 1e-10 * scale
                });
                ClauseResult::from_probe("derivative_concave", bad, "g''' <= 0 on (0, r)")
            }
            KernelForm::Tabulated(t) if t.has_curvature() => {
                let bad = geo.windows(2).find(|w| {
                    let (a, b) = (self.d2g(w[0]).unwrap(), self.d2g(w[1]).unwrap());
                    b > a + 1e-10 * a.abs().max(1e-300)
                });
                ClauseResult::from_probe("derivative_concave", bad.map(|w| w[1]), "g'' nonincreasing on (0, r)")
            }
            KernelForm::Tabulated(_) => ClauseResult::new(
                "derivative_concave",
                ClauseStatus::Unchecked,
                None,
                "no g'' metadata in table",
            ),
        };
        clauses.push(concave);

        // g′ ∈ BV_loc: finite variation on a compact piece of (0, ∞)
        let lo = geo[geo.len() / 2];
        let hi = *uni.last().unwrap();
        let tv = self.gprime_total_variation(lo, hi)?;
        clauses.push(ClauseResult::new(
            "derivative_locally_bv",
            if tv.is_finite() { ClauseStatus::Pass } else { ClauseStatus::Fail },
            None,
            format!("TV(g', [{lo:.3e}, {hi:.3e}]) = {tv:.6e}"),
        ));

        let (analytic, root) = match &self.form {
            KernelForm::PowerLaw { alpha, lambda } => {
                let ok = *alpha > 0.0 && *lambda > -1.0 && *lambda < alpha.min(1.0);
                (Some(ok && self.dg(1.0) == 0.0), Some(1.0))
            }
            KernelForm::Tabulated(_) => (None, None),
        };
        let passed = clauses.iter().all(|c| c.status == ClauseStatus::Pass) && analytic != Some(false);
        Ok(CertificateReport { r: self.r, gprime_root: root, probe_count, clauses, analytic, passed })
    }

    fn curvature_scale(&self, x: f64) -> f64 {
        match &self.form {
            KernelForm::PowerLaw { alpha, lambda } => {
                ((alpha - 1.0) * x.powf(alpha - 2.0)).abs() + ((lambda - 1.0) * x.powf(lambda - 2.0)).abs()
            }
            KernelForm::Tabulated(_) => self.d2g(x).map(f64::abs).unwrap_or(0.0).max(1e-300),
        }
    }

    /// Estimates Λ from `|g′(x_k/2)| / |g′(x_k)|` on `x_k = x0·2^{-k}`.
    pub fn estimate_lambda(&self, x0: f64, levels: usize) -> Result<LambdaEstimate> {
        if !(x0 > 0.0 && x0 < self.r) {
            return Err(Error::Precondition(format!("x0 must lie in (0, r = {}), got {x0}", self.r)));
        }
        if levels < 10 {
            return Err(Error::Precondition(format!("levels must be >= 10, got {levels}")));
        }
        let probes: Vec<f64> = (0..levels).map(|k| x0 * 0.5f64.powi(k as i32)).collect();
        let ratios: Vec<f64> = probes.iter().map(|&x| self.dg(0.5 * x).abs() / self.dg(x).abs()).collect();
        let running_min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let analytic = match &self.form {
            KernelForm::PowerLaw { lambda, .. } => Some(2f64.powf(1.0 - lambda)),
            KernelForm::Tabulated(_) => None,
        };
        let value = extrapolate_ratio(&ratios).ok_or(Error::OscillatoryRatio { running_min })?;
        let agrees = analytic.map(|a| {
            if a.is_infinite() || value.is_infinite() {
                a == value
            } else {
                (a - value).abs() <= 1e-3
            }
        });
        Ok(LambdaEstimate { value, probes, ratios, running_min, analytic, agrees })
    }

    pub(crate) fn shell_sums<F: Fn(f64) -> f64>(&self, r: f64, refinements: usize, f: F) -> ConvergenceReport {
        let mut shells = Vec::with_capacity(refinements);
        let mut sums = Vec::with_capacity(refinements);
        let mut acc = 0.0;
        for n in 1..=refinements {
            let hi = r * 0.5f64.powi(n as i32 - 1);
            let lo = 0.5 * hi;
            let s = Kernel::shell_integral(&f, lo, hi).value;
            acc += s;
            shells.push(s);
            sums.push(acc);
        }
        let (cauchy, ratio, tail) = geometric_tail(&shells);
        ConvergenceReport { r, limit: acc + tail, partial_sums: sums, cauchy, ratio, closed_form: None }
    }

    /// Partial integrals `I_n = −∫_{r/2ⁿ}^r g′(t)·t dt`, n = 1..refinements.
    pub fn check_lemma31_integrability(&self, r: f64, refinements: usize) -> Result<ConvergenceReport> {
        if !(r > 0.0 && r <= self.r * (1.0 + 1e-12)) {
            return Err(Error::Precondition(format!(
                "r = {r} outside the certified window (0, {}]",
                self.r
            )));
        }
        if refinements < 2 {
            return Err(Error::Precondition("need at least 2 refinements".into()));
        }
        let mut rep = self.shell_sums(r, refinements, |t| -self.dg(t) * t);
        rep.closed_form = match &self.form {
            KernelForm::PowerLaw { alpha, lambda } => {
                Some(r.powf(lambda + 1.0) / (lambda + 1.0) - r.powf(alpha + 1.0) / (alpha + 1.0))
            }
            KernelForm::Tabulated(_) => None,
        };
        Ok(rep)
    }
}

/// Cauchy test on shell increments: settled geometric ratio below one, or
/// increments already negligible. Returns (cauchy, ratio, tail estimate).
fn geometric_tail(shells: &[f64]) -> (bool, f64, f64) {
    let n = shells.len();
    let total: f64 = shells.iter().map(|s| s.abs()).sum();
    let last = shells[n - 1];
    if last.abs() <= 1e-15 * total.max(1e-300) {
        return (true, 0.0, 0.0);
    }
    let qs: Vec<f64> = shells.windows(2).map(|w| w[1] / w[0]).collect();
    let tail_qs = &qs[qs.len() / 2..];
    let q = *qs.last().unwrap();
    let settled = tail_qs.iter().all(|&v| v > 0.0 && v < 1.0)
        && tail_qs.windows(2).all(|w| (w[1] - w[0]).abs() <= 1e-3 * (1.0 - w[1]).max(1e-6) + 1e-9);
    if settled {
        (true, q, last * q / (1.0 - q))
    } else {
        (false, q, 0.0)
    }
}

/// Limit of a ratio sequence by repeated Aitken acceleration; `None` when the
/// tail oscillates without settling. Divergent growth past 1e6 maps to +∞.
fn extrapolate_ratio(ratios: &[f64]) -> Option<f64> {
    let n = ratios.len();
    let last = ratios[n - 1];
    if !last.is_finite() || (last > 1e6 && ratios[n - 3..].windows(2).all(|w| w[1] > w[0])) {
        return Some(f64::INFINITY);
    }
    let diffs: Vec<f64> = ratios.windows(2).map(|w| w[1] - w[0]).collect();
    let tail = &diffs[diffs.len() / 2..];
    let scale = last.abs().max(1.0);
    if tail.iter().all(|d| d.abs() <= 1e-13 * scale) {
        return Some(last);
    }
    let monotone = tail.iter().all(|&d| d >= -1e-13 * scale) || tail.iter().all(|&d| d <= 1e-13 * scale);
    if !monotone {
        // oscillation accepted only if it is dying out
        let q = tail.len() / 2;
        let early = tail[..q].iter().fold(0.0f64, |m, d| m.max(d.abs()));
        let late = tail[q..].iter().fold(0.0f64, |m, d| m.max(d.abs()));
        if !(late <= 0.25 * early || late <= 1e-10 * scale) {
            return None;
        }
        return Some(last);
    }
    let mut seq = ratios.to_vec();
    for _ in 0..2 {
        if seq.len() < 3 {
            break;
        }
        let next: Vec<f64> = seq
            .windows(3)
            .map(|w| {
                let d1 = w[1] - w[0];
                let d2 = w[2] - w[1];
                let den = d2 - d1;
                if den.abs() <= 1e-300 || (d2 * d2 / den).abs() > (d2.abs() * 1e3).max(1e-300) {
                    w[2]
                } else {
                    w[2] - d2 * d2 / den
                }
            })
            .collect();
        seq = next;
    }
    Some(*seq.last().unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extrapolation_of_geometric_sequence() {
        let r: Vec<f64> = (0..30).map(|k| 2.0 + 0.7 * 0.9f64.powi(k)).collect();
        assert!((extrapolate_ratio(&r).unwrap() - 2.0).abs() < 1e-10);
    }

    #[test]
    fn oscillation_is_reported() {
        let r: Vec<f64> = (0..30).map(|k| 2.0 + 0.5 * (k as f64).sin()).collect();
        assert!(extrapolate_ratio(&r).is_none());
    }

    #[test]
    fn growth_is_infinite() {
        let r: Vec<f64> = (0..30).map(|k| 10f64.powi(k)).collect();
        assert_eq!(extrapolate_ratio(&r), Some(f64::INFINITY));
    }
}

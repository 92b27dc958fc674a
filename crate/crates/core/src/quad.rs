//! Gauss–Kronrod quadrature with adaptive bisection, plus geometric
//! refinement toward integrable endpoint singularities.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Integral value with an absolute error estimate.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

impl Estimate {
    pub fn new(value: f64, error: f64) -> Self {
        Self { value, error }
    }
}

impl std::ops::Add for Estimate {
    type Output = Estimate;
    fn add(self, o: Estimate) -> Estimate {
        Estimate::new(self.value + o.value, self.error + o.error)
    }
}

impl std::ops::AddAssign for Estimate {
    fn add_assign(&mut self, o: Estimate) {
        self.value += o.value;
        self.error += o.error;
    }
}

/// Tolerances for the adaptive routines.
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_panels: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { abs: 1e-12, rel: 1e-12, max_panels: 2000 }
    }
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Self {
        Self { abs, rel, ..Self::default() }
    }
}

/// Single 15-point Kronrod panel with the QUADPACK error heuristic.
pub fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Estimate {
    let c = 0.5 * (a + b);
    let hw = 0.5 * (b - a);
    let fc = f(c);
    let mut resk = fc * WGK[7];
    let mut resg = fc * WG[3];
    let mut resabs = resk.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = hw * XGK[j];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        resk += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = resk * 0.5;
    let mut resasc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        resasc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = resk * hw;
    resabs *= hw.abs();
    resasc *= hw.abs();
    let mut err = ((resk - resg) * hw).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    Estimate::new(value, err)
}

struct Panel {
    a: f64,
    b: f64,
    est: Estimate,
}

impl PartialEq for Panel {
    fn eq(&self, o: &Self) -> bool {
        self.est.error == o.est.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Panel {
    fn cmp(&self, o: &Self) -> Ordering {
        self.est.error.partial_cmp(&o.est.error).unwrap_or(Ordering::Equal)
    }
}

/// Globally adaptive Gauss–Kronrod integration on a finite interval.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Estimate {
    if a == b {
        return Estimate::default();
    }
    let first = gk15(&f, a, b);
    let mut total = first;
    let mut heap = BinaryHeap::new();
    heap.push(Panel { a, b, est: first });
    while heap.len() < tol.max_panels {
        if total.error <= tol.abs.max(tol.rel * total.value.abs()) {
            break;
        }
        let worst = heap.pop().expect("heap is never empty");
        let m = 0.5 * (worst.a + worst.b);
        if m <= worst.a || m >= worst.b {
            heap.push(worst);
            break;
        }
        let l = gk15(&f, worst.a, m);
        let r = gk15(&f, m, worst.b);
        total.value += l.value + r.value - worst.est.value;
        total.error += l.error + r.error - worst.est.error;
        heap.push(Panel { a: worst.a, b: m, est: l });
        heap.push(Panel { a: m, b: worst.b, est: r });
    }
    // re-sum to shed accumulated cancellation in the running totals
    let mut sum = Estimate::default();
    for p in heap.iter() {
        sum += p.est;
    }
    sum
}

/// Relative shell width, against the endpoint, below which
/// [`integrate_toward`] stops refining.
const SHELL_FLOOR: f64 = 1e4 * f64::EPSILON;

/// Integrates over `[a, b]` with an integrable singularity at `a`
/// (`toward_a = true`) or at `b`, by summing adaptive panels on dyadic
/// shells that shrink geometrically toward the singular endpoint. The
/// remainder beyond the last shell is estimated from the shell ratio.
pub fn integrate_toward<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    toward_a: bool,
    tol: Tolerance,
) -> Estimate {
    if a == b {
        return Estimate::default();
    }
    let len = b - a;
    let shell_tol = Tolerance { abs: tol.abs * 0.25, rel: tol.rel, max_panels: tol.max_panels };
    let mut total = Estimate::default();
    let mut prev: Option<f64> = None;
    let mut prev_q: Option<f64> = None;
    let mut prev_q2: Option<f64> = None;
    let mut small_run = 0;
    let mut outer = 1.0;
    for level in 0..2000 {
        let inner = 0.5 * outer;
        let (lo, hi) = if toward_a {
            (a + len * inner, a + len * outer)
        } else {
            (b - len * outer, b - len * inner)
        };
        // nodes are quantized to the ulp of the endpoint; once that is no
        // longer small against the shell, close with the geometric tail
        let edge = if toward_a { a } else { b };
        let ulp = f64::EPSILON * edge.abs();
        if hi - lo <= SHELL_FLOOR * edge.abs() {
            if let (Some(p), Some(q), Some(qp)) = (prev, prev_q, prev_q2) {
                if q > 0.0 && q < 1.0 {
                    let tail = p * q / (1.0 - q);
                    total.value += tail;
                    total.error += tail.abs() * ((q - qp).abs() / ((1.0 - q) * (1.0 - q)) + 1e-12);
                }
            }
            break;
        }
        let mut shell = integrate(&f, lo, hi, shell_tol);
        shell.error += shell.value.abs() * 4.0 * ulp / (hi - lo);
        total += shell;
        let target = tol.abs.max(tol.rel * total.value.abs());
        if shell.value.abs() <= 0.1 * target {
            small_run += 1;
        } else {
            small_run = 0;
        }
        if level > 4 && small_run >= 2 {
            total.error += shell.value.abs();
            return total;
        }
        // geometric tail once the shell ratio has settled
        let q = prev.filter(|&p| p != 0.0).map(|p| shell.value / p);
        if let (Some(q), Some(qp)) = (q, prev_q) {
            if level > 4 && q > 0.0 && q < 1.0 {
                let tail = shell.value * q / (1.0 - q);
                let tail_err = tail.abs() * ((q - qp).abs() / (1.0 - q) + 1e-12);
                if tail_err <= 0.1 * target && (q - qp).abs() < 1e-3 {
                    total.value += tail;
                    total.error += tail_err;
                    return total;
                }
            }
        }
        prev_q2 = prev_q;
        prev_q = q;
        prev = Some(shell.value);
        outer = inner;
        if len * outer < f64::MIN_POSITIVE * 1e10 {
            break;
        }
    }
    total
}

/// Integrates over `[a, b]` with an integrable singularity at an interior
/// or endpoint location `s`.
pub fn integrate_singular<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, s: f64, tol: Tolerance) -> Estimate {
    if s <= a {
        integrate_toward(&f, a, b, true, tol)
    } else if s >= b {
        integrate_toward(&f, a, b, false, tol)
    } else {
        integrate_toward(&f, a, s, false, tol) + integrate_toward(&f, s, b, true, tol)
    }
}

/// Integrates over `[a, b]` splitting at every given breakpoint inside the
/// interval, treating each breakpoint as a possible singularity.
pub fn integrate_breakpoints<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, points: &[f64], tol: Tolerance) -> Estimate {
    let mut cuts: Vec<f64> = points.iter().copied().filter(|&p| p > a && p < b).collect();
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    cuts.dedup();
    let mut nodes = Vec::with_capacity(cuts.len() + 2);
    nodes.push(a);
    nodes.extend(cuts);
    nodes.push(b);
    let singular = |x: f64| points.iter().any(|&p| p == x);
    let mut total = Estimate::default();
    for w in nodes.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let sl = singular(lo);
        let sh = singular(hi);
        total += match (sl, sh) {
            (false, false) => integrate(&f, lo, hi, tol),
            (true, false) => integrate_toward(&f, lo, hi, true, tol),
            (false, true) => integrate_toward(&f, lo, hi, false, tol),
            (true, true) => {
                let m = 0.5 * (lo + hi);
                integrate_toward(&f, lo, m, true, tol) + integrate_toward(&f, m, hi, false, tol)
            }
        };
    }
    total
}

/// Root of `f` in `[a, b]` by bisection; requires a sign change.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, iters: usize) -> Option<f64> {
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa.signum() == fb.signum() {
        return None;
    }
    for _ in 0..iters {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return Some(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Some(0.5 * (a + b))
}

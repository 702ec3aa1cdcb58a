//! Numerical integration: globally adaptive Gauss–Kronrod on finite
//! intervals and mode-centred, Laplace-whitened Gauss–Hermite rules for
//! log-concave-ish integrands on the whole plane.

use std::collections::{BinaryHeap, HashMap};
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};

// 15-point Kronrod extension of the 7-point Gauss rule (QUADPACK qk15).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.000_000_000_000_000_0,
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

/// Tolerances for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            abs_tol: 0.0,
            rel_tol: 1e-10,
            max_intervals: 2000,
        }
    }
}

impl QuadOptions {
    pub fn rel(rel_tol: f64) -> Self {
        QuadOptions {
            rel_tol,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub abs_error: f64,
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut gauss = fc * WG[3];
    let mut kron = fc * WGK[7];
    for (j, (&x, &w)) in XGK[..7].iter().zip(&WGK[..7]).enumerate() {
        let dx = h * x;
        let s = f(c - dx) + f(c + dx);
        kron += w * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    let value = kron * h;
    let err = ((kron - gauss) * h).abs();
    (value, err)
}

/// Integrates `f` over `[a, b]`, splitting first at every interior point of
/// `breaks` (points outside the interval are ignored).
pub fn integrate_with_breaks<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    opts: &QuadOptions,
) -> Result<Integral> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Domain(format!("integration limits [{a}, {b}] not finite")));
    }
    if a == b {
        return Ok(Integral {
            value: 0.0,
            abs_error: 0.0,
        });
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut points: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|&p| p > lo && p < hi)
        .collect();
    points.sort_by(f64::total_cmp);
    points.dedup();
    points.insert(0, lo);
    points.push(hi);

    let mut heap = BinaryHeap::new();
    let (mut total, mut total_err) = (0.0, 0.0);
    for w in points.windows(2) {
        let (v, e) = kronrod15(&mut f, w[0], w[1]);
        total += v;
        total_err += e;
        heap.push(Segment {
            a: w[0],
            b: w[1],
            value: v,
            error: e,
        });
    }
    if !total.is_finite() {
        return Err(Error::numerical(format!(
            "integrand not finite on [{lo}, {hi}]"
        )));
    }

    while total_err > opts.abs_tol.max(opts.rel_tol * total.abs()) {
        if heap.len() >= opts.max_intervals {
            return Err(Error::Numerical {
                message: format!(
                    "adaptive quadrature on [{lo}, {hi}] did not reach tolerance: \
                     estimate {total}, error {total_err}"
                ),
                last_iterate: Some(vec![total, total_err]),
            });
        }
        let Some(seg) = heap.pop() else { break };
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            // Interval exhausted at machine precision; keep its estimate.
            heap.push(Segment { error: 0.0, ..seg });
            total_err = heap.iter().map(|s| s.error).sum();
            continue;
        }
        let (v1, e1) = kronrod15(&mut f, seg.a, mid);
        let (v2, e2) = kronrod15(&mut f, mid, seg.b);
        total += v1 + v2 - seg.value;
        total_err += e1 + e2 - seg.error;
        heap.push(Segment {
            a: seg.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Segment {
            a: mid,
            b: seg.b,
            value: v2,
            error: e2,
        });
    }
    // Re-sum to shed accumulated cancellation from the running updates.
    let value: f64 = heap.iter().map(|s| s.value).sum();
    let abs_error: f64 = heap.iter().map(|s| s.error).sum();
    Ok(Integral {
        value: sign * value,
        abs_error,
    })
}

pub fn integrate<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, opts: &QuadOptions) -> Result<Integral> {
    integrate_with_breaks(f, a, b, &[], opts)
}

/// Gauss–Hermite rule for the weight `exp(−x²/2)` with log weights, so that
/// extreme nodes stay usable when their weights underflow.
#[derive(Debug, Clone)]
pub struct HermiteRule {
    pub nodes: Vec<f64>,
    pub log_weights: Vec<f64>,
}

fn hermite_cache() -> &'static Mutex<HashMap<usize, Arc<HermiteRule>>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<HermiteRule>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Cached `n`-point rule.
pub fn hermite_rule(n: usize) -> Arc<HermiteRule> {
    if let Some(r) = hermite_cache().lock().unwrap().get(&n) {
        return Arc::clone(r);
    }
    let rule = Arc::new(compute_hermite_rule(n));
    hermite_cache()
        .lock()
        .unwrap()
        .entry(n)
        .or_insert(rule)
        .clone()
}

/// Golub–Welsch: nodes are the eigenvalues of the Jacobi matrix of the
/// probabilists' Hermite recurrence (zero diagonal, off-diagonal `√k`), and
/// weights are `√(2π)` times the squared first eigenvector components. Only
/// the first row of the eigenvector matrix is carried through the implicit
/// QL sweeps.
fn compute_hermite_rule(n: usize) -> HermiteRule {
    assert!(n >= 1);
    let mut d = vec![0.0f64; n];
    let mut e: Vec<f64> = (1..n).map(|k| (k as f64).sqrt()).chain([0.0]).collect();
    let mut z = vec![0.0f64; n];
    z[0] = 1.0;

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            assert!(iter < 60, "Golub-Welsch QL iteration did not converge");
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                let zf = z[i + 1];
                z[i + 1] = s * z[i] + c * zf;
                z[i] = c * z[i] - s * zf;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }

    let log_mu0 = 0.5 * (2.0 * std::f64::consts::PI).ln();
    let mut pairs: Vec<(f64, f64)> = d
        .into_iter()
        .zip(z)
        .map(|(x, v)| (x, log_mu0 + 2.0 * v.abs().ln()))
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    // Symmetrize: the exact rule is symmetric about zero.
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = 0.5 * (pairs[i].0 - pairs[j].0);
        let lw = if pairs[i].1 >= pairs[j].1 { pairs[i].1 } else { pairs[j].1 };
        pairs[i] = (x, lw);
        pairs[j] = (-x, lw);
    }
    if n % 2 == 1 {
        pairs[n / 2].0 = 0.0;
    }
    HermiteRule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        log_weights: pairs.iter().map(|p| p.1).collect(),
    }
}

/// `ln Σᵢ exp(xᵢ)`; `−∞` for an empty or all-`−∞` input.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || m.is_nan() {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Streaming log-sum-exp accumulator.
#[derive(Debug, Clone, Copy)]
pub struct LogSumExp {
    max: f64,
    sum: f64,
}

impl Default for LogSumExp {
    fn default() -> Self {
        LogSumExp {
            max: f64::NEG_INFINITY,
            sum: 0.0,
        }
    }
}

impl LogSumExp {
    pub fn add(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x <= self.max {
            self.sum += (x - self.max).exp();
        } else {
            self.sum = self.sum * (self.max - x).exp() + 1.0;
            self.max = x;
        }
    }

    pub fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.sum.ln()
        }
    }
}

/// Lower-triangular Cholesky factor of a 2×2 SPD matrix `[[a, b], [b, c]]`.
pub fn cholesky2(m: [[f64; 2]; 2]) -> Result<[[f64; 2]; 2]> {
    let a = m[0][0];
    if !(a > 0.0) {
        return Err(Error::numerical("matrix not positive definite"));
    }
    let l00 = a.sqrt();
    let l10 = m[1][0] / l00;
    let d = m[1][1] - l10 * l10;
    if !(d > 0.0) {
        return Err(Error::numerical("matrix not positive definite"));
    }
    Ok([[l00, 0.0], [l10, d.sqrt()]])
}

/// Inverse of a 2×2 matrix.
pub fn inverse2(m: [[f64; 2]; 2]) -> Result<[[f64; 2]; 2]> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det == 0.0 || !det.is_finite() {
        return Err(Error::numerical("singular matrix"));
    }
    Ok([
        [m[1][1] / det, -m[0][1] / det],
        [-m[1][0] / det, m[0][0] / det],
    ])
}

/// `ln ∫ exp(log_f(m + s·z)) dz` in one dimension with an `n`-point rule.
pub fn laplace_gh_1d<F: Fn(f64) -> f64>(log_f: &F, mode: f64, scale: f64, n: usize) -> f64 {
    let rule = hermite_rule(n);
    let mut acc = LogSumExp::default();
    for (&z, &lw) in rule.nodes.iter().zip(&rule.log_weights) {
        let v = log_f(mode + scale * z);
        acc.add(lw + v + 0.5 * z * z);
    }
    acc.value() + scale.ln()
}

/// Two-dimensional analogue of [`laplace_gh_1d`] with `x = m + L z`.
pub fn laplace_gh_2d<F: Fn(f64, f64) -> f64>(
    log_f: &F,
    mode: [f64; 2],
    chol: [[f64; 2]; 2],
    n: usize,
) -> f64 {
    let rule = hermite_rule(n);
    let mut acc = LogSumExp::default();
    for (&z0, &w0) in rule.nodes.iter().zip(&rule.log_weights) {
        if w0 == f64::NEG_INFINITY {
            continue;
        }
        let x0 = mode[0] + chol[0][0] * z0;
        let base1 = mode[1] + chol[1][0] * z0;
        for (&z1, &w1) in rule.nodes.iter().zip(&rule.log_weights) {
            if w1 == f64::NEG_INFINITY {
                continue;
            }
            let x1 = base1 + chol[1][1] * z1;
            acc.add(w0 + w1 + log_f(x0, x1) + 0.5 * (z0 * z0 + z1 * z1));
        }
    }
    acc.value() + (chol[0][0] * chol[1][1]).ln()
}

/// Node schedule for Gauss–Hermite refinement.
pub const GH_START_NODES: usize = 61;
pub const GH_MAX_NODES: usize = 1025;

/// Result of a refined Gauss–Hermite integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefinedLogIntegral {
    pub log_value: f64,
    /// Gap between the last two refinements, in log units.
    pub gap: f64,
    pub nodes: usize,
}

/// Doubles the node count (n → 2n − 1) from [`GH_START_NODES`] until two
/// consecutive log estimates differ by less than `tol`, up to [`GH_MAX_NODES`].
pub fn refine_log_integral<G: Fn(usize) -> f64>(eval: G, tol: f64) -> Result<RefinedLogIntegral> {
    let mut n = GH_START_NODES;
    let mut prev = eval(n);
    if !prev.is_finite() {
        return Err(Error::numerical(format!(
            "Gauss-Hermite estimate not finite ({prev}) with {n} nodes"
        )));
    }
    loop {
        let next_n = 2 * n - 1;
        if next_n > GH_MAX_NODES {
            return Err(Error::Numerical {
                message: format!(
                    "Gauss-Hermite refinement did not converge by {n} nodes (estimate {prev})"
                ),
                last_iterate: Some(vec![prev]),
            });
        }
        let next = eval(next_n);
        let gap = (next - prev).abs();
        if !next.is_finite() {
            return Err(Error::numerical(format!(
                "Gauss-Hermite estimate not finite ({next}) with {next_n} nodes"
            )));
        }
        if gap < tol {
            return Ok(RefinedLogIntegral {
                log_value: next,
                gap,
                nodes: next_n,
            });
        }
        prev = next;
        n = next_n;
    }
}

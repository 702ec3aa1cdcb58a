//! Log-space special functions and the densities the Beta(a, a) prior
//! induces on the rate difference and the log odds ratio.

use serde::{Deserialize, Serialize};
use statrs::function::erf::{erfc, erfc_inv};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::model::softplus;
use crate::quadrature::{integrate_with_breaks, QuadOptions};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// A density value together with its logarithm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityValue {
    pub value: f64,
    pub log_value: f64,
}

impl DensityValue {
    pub fn from_value(value: f64) -> Self {
        DensityValue {
            value,
            log_value: value.ln(),
        }
    }

    pub fn from_log(log_value: f64) -> Self {
        DensityValue {
            value: log_value.exp(),
            log_value,
        }
    }
}

/// Stirling remainder `ln Γ(x) − [(x−½) ln x − x + ln √(2π)]` for `x ≥ 10`.
fn stirling_correction(x: f64) -> f64 {
    const C: [f64; 8] = [
        1.0 / 12.0,
        -1.0 / 360.0,
        1.0 / 1260.0,
        -1.0 / 1680.0,
        1.0 / 1188.0,
        -691.0 / 360_360.0,
        1.0 / 156.0,
        -3617.0 / 122_400.0,
    ];
    let x2 = 1.0 / (x * x);
    let mut acc = 0.0;
    for c in C.iter().rev() {
        acc = acc * x2 + c;
    }
    acc / x
}

/// `ln B(a, b)`.
///
/// Large arguments avoid the cancellation of three `ln Γ` terms by
/// combining Stirling remainders directly.
pub fn log_beta_fn(a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) || !(a.is_finite() && b.is_finite()) {
        return Err(Error::Domain(format!(
            "log_beta requires positive finite arguments, got ({a}, {b})"
        )));
    }
    Ok(log_beta(a, b))
}

/// Unchecked `ln B(a, b)` for `a, b > 0`.
pub(crate) fn log_beta(a: f64, b: f64) -> f64 {
    let (p, q) = if a < b { (a, b) } else { (b, a) };
    if p == 1.0 {
        return -q.ln();
    }
    if p >= 10.0 {
        let corr = stirling_correction(p) + stirling_correction(q) - stirling_correction(p + q);
        let r = p / (p + q);
        -0.5 * q.ln() + LN_SQRT_2PI + corr + (p - 0.5) * r.ln() + q * (-r).ln_1p()
    } else if q >= 10.0 {
        let corr = stirling_correction(q) - stirling_correction(p + q);
        ln_gamma(p) + corr + p - p * (p + q).ln() + (q - 0.5) * (-p / (p + q)).ln_1p()
    } else {
        ln_gamma(p) + ln_gamma(q) - ln_gamma(p + q)
    }
}

/// `ln C(n, k)`.
pub fn ln_choose(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    if k == 0 || k == n {
        return 0.0;
    }
    let nf = n as f64;
    -(nf + 1.0).ln() - log_beta(k as f64 + 1.0, (n - k) as f64 + 1.0)
}

/// `ln ∫₀¹ t^{a−1}(1−t)^{c−a−1}(1−xt)^{−b1}(1−yt)^{−b2} dt + shift`, the
/// shift applied inside the integrand so that huge or tiny kernels stay in
/// range.
fn euler_f1_log_integral(a: f64, b1: f64, b2: f64, c: f64, x: f64, y: f64, shift: f64) -> Result<f64> {
    let log_kernel = |t: f64| -> f64 {
        let mut v = shift;
        if a != 1.0 {
            v += (a - 1.0) * t.ln();
        }
        if c - a != 1.0 {
            v += (c - a - 1.0) * (-t).ln_1p();
        }
        if b1 != 0.0 {
            v -= b1 * (-x * t).ln_1p();
        }
        if b2 != 0.0 {
            v -= b2 * (-y * t).ln_1p();
        }
        v
    };
    // Resolve the near-pole peak at t → 1 when x or y approaches 1.
    let mut breaks = Vec::new();
    for z in [x, y] {
        if z > 0.5 {
            let gap = 1.0 - z;
            for k in [1.0, 4.0, 16.0, 64.0, 256.0] {
                breaks.push(1.0 - k * gap);
            }
        }
    }
    let opts = QuadOptions {
        abs_tol: 0.0,
        rel_tol: 1e-12,
        max_intervals: 4000,
    };
    let r = integrate_with_breaks(|t| log_kernel(t).exp(), 0.0, 1.0, &breaks, &opts)?;
    Ok(r.value.ln())
}

fn check_f1_domain(a: f64, c: f64, x: f64, y: f64) -> Result<()> {
    if !(c > a && a > 0.0) {
        return Err(Error::Domain(format!(
            "Appell F1 integral representation needs c > a > 0, got a = {a}, c = {c}"
        )));
    }
    if !(x < 1.0 && y < 1.0) {
        return Err(Error::Domain(format!(
            "Appell F1 integral representation needs x, y < 1, got ({x}, {y})"
        )));
    }
    Ok(())
}

/// Appell's `F₁(a; b1, b2; c; x, y)` from its Euler integral representation.
pub fn appell_f1(a: f64, b1: f64, b2: f64, c: f64, x: f64, y: f64) -> Result<f64> {
    check_f1_domain(a, c, x, y)?;
    let log_norm = ln_gamma(c) - ln_gamma(a) - ln_gamma(c - a);
    Ok(euler_f1_log_integral(a, b1, b2, c, x, y, 0.0)?.exp() * log_norm.exp())
}

/// Density of `η = θ₂ − θ₁` when `θ₁, θ₂` are independent Beta(a, a).
pub fn eta_density_ib(eta: f64, a: f64) -> Result<DensityValue> {
    crate::model::validate_ib_a(a)?;
    if !(-1.0..=1.0).contains(&eta) {
        return Err(Error::Domain(format!("eta = {eta} outside [-1, 1]")));
    }
    if eta == 0.0 {
        let lv = log_beta(2.0 * a - 1.0, 2.0 * a - 1.0) - 2.0 * log_beta(a, a);
        return Ok(DensityValue::from_log(lv));
    }
    let e = eta.abs();
    if e == 1.0 {
        return Ok(DensityValue::from_value(0.0));
    }
    // F₁(a; 4a−2, 1−a; 2a; 1−|η|, 1−η²) on the positive branch; the negative
    // branch F₁(a; 1−a, 4a−2; 2a; 1−η², 1+η) is the same integral with the
    // argument pairs exchanged.
    let (b1, b2, x, y) = if eta > 0.0 {
        (4.0 * a - 2.0, 1.0 - a, 1.0 - e, 1.0 - e * e)
    } else {
        (1.0 - a, 4.0 * a - 2.0, 1.0 - e * e, 1.0 - e)
    };
    let log_prefactor = (2.0 * a - 1.0) * (e.ln() + (-e).ln_1p()) - log_beta(a, a)
        + ln_gamma(2.0 * a)
        - 2.0 * ln_gamma(a);
    let lv = euler_f1_log_integral(a, b1, b2, 2.0 * a, x, y, log_prefactor)?;
    Ok(DensityValue::from_log(lv))
}

/// Density of `ψ = logit θ₂ − logit θ₁` when `θ₁, θ₂` are independent
/// uniforms, i.e. the difference of two standard logistic variables.
pub fn psi_density_ib_a1(psi: f64) -> DensityValue {
    let p = psi.abs();
    let value = if p < 1e-3 {
        let p2 = p * p;
        1.0 / 6.0 - p2 / 60.0 + p2 * p2 / 1008.0
    } else {
        // e^ψ(e^ψ(ψ−2)+ψ+2)/(e^ψ−1)³ = u·N/m³ with u = e^{−ψ}, m = 1 − u and
        // N = (ψ−2) + (ψ+2)u. N = Σ_{k≥3} (−1)^{k+1}(k−2)ψᵏ/k! below 1.
        let u = (-p).exp();
        let m = -(-p).exp_m1();
        let num = if p < 1.0 {
            let mut term = p * p * p / 6.0; // ψᵏ/k! at k = 3
            let mut sum = 0.0;
            for k in 3..40 {
                let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                sum += sign * (k - 2) as f64 * term;
                term *= p / (k + 1) as f64;
                if term < 1e-18 * sum.abs() {
                    break;
                }
            }
            sum
        } else {
            (p - 2.0) + (p + 2.0) * u
        };
        u * num / (m * m * m)
    };
    DensityValue::from_value(value)
}

/// `ln N(x; 0, σ)`.
pub fn log_density_gaussian(x: f64, sigma: f64) -> f64 {
    let z = x / sigma;
    -0.5 * z * z - LN_SQRT_2PI - sigma.ln()
}

/// `ln` of the Beta(a, a) density at `x`.
pub fn log_density_beta(x: f64, a: f64) -> f64 {
    if !(0.0..=1.0).contains(&x) {
        return f64::NEG_INFINITY;
    }
    if a == 1.0 {
        return 0.0;
    }
    (a - 1.0) * (x.ln() + (-x).ln_1p()) - log_beta(a, a)
}

/// `ln` of the logistic density with location 0 and scale `s`.
pub fn log_density_logistic(x: f64, s: f64) -> f64 {
    let z = x / s;
    -z - 2.0 * softplus(-z) - s.ln()
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Upper tail `1 − Φ(z)`.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}

/// `Φ(hi) − Φ(lo)` without cancellation in either tail.
pub fn normal_interval_mass(lo: f64, hi: f64) -> f64 {
    if lo >= hi {
        return 0.0;
    }
    if lo >= 0.0 {
        normal_sf(lo) - normal_sf(hi)
    } else if hi <= 0.0 {
        normal_cdf(hi) - normal_cdf(lo)
    } else {
        1.0 - normal_cdf(lo) - normal_sf(hi)
    }
}

/// Gaussian `N(mean, sigma)` restricted to `(lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncatedNormal {
    pub mean: f64,
    pub sigma: f64,
    pub lo: f64,
    pub hi: f64,
}

impl TruncatedNormal {
    pub fn new(mean: f64, sigma: f64, lo: f64, hi: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Domain(format!("sigma = {sigma} must be positive")));
        }
        if !(lo < hi) {
            return Err(Error::Domain(format!("empty truncation window ({lo}, {hi})")));
        }
        Ok(TruncatedNormal { mean, sigma, lo, hi })
    }

    fn z(&self, x: f64) -> f64 {
        (x - self.mean) / self.sigma
    }

    /// Gaussian mass inside the window.
    pub fn mass(&self) -> f64 {
        normal_interval_mass(self.z(self.lo), self.z(self.hi))
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        if !(x > self.lo && x < self.hi) {
            return f64::NEG_INFINITY;
        }
        log_density_gaussian(x - self.mean, self.sigma) - self.mass().ln()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.lo {
            return 0.0;
        }
        if x >= self.hi {
            return 1.0;
        }
        normal_interval_mass(self.z(self.lo), self.z(x)) / self.mass()
    }

    /// Inverse CDF at `u ∈ (0, 1)`, computed from whichever tail keeps precision.
    pub fn quantile(&self, u: f64) -> f64 {
        let (zl, zh) = (self.z(self.lo), self.z(self.hi));
        let z = if zl >= 0.0 {
            // Upper tail: work with survival probabilities.
            let (sl, sh) = (normal_sf(zl), normal_sf(zh));
            -normal_quantile(sl - u * (sl - sh))
        } else {
            let (cl, ch) = (normal_cdf(zl), normal_cdf(zh));
            normal_quantile(cl + u * (ch - cl))
        };
        (self.mean + self.sigma * z).clamp(self.lo, self.hi)
    }

    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.gen();
        self.quantile(u)
    }
}

/// `ln` of the `N(0, σ)` density truncated to `(lo, hi)`; `−∞` outside.
pub fn log_density_truncated_gaussian(x: f64, sigma: f64, lo: f64, hi: f64) -> Result<f64> {
    Ok(TruncatedNormal::new(0.0, sigma, lo, hi)?.log_pdf(x))
}

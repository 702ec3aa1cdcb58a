//! Dependent IB test: truncated Gaussian priors on the rate difference
//! `η ∈ (−1, 1)` and the grand mean `ζ ∈ (0, 1)`, mapped to the rates with
//! clamping into `[0, 1]`.

use std::cell::RefCell;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{validate_data, DepIbParams, EvidenceResult, Method, ProportionPair, TwoByTwoData};
use crate::quadrature::{integrate_with_breaks, QuadOptions};
use crate::special::TruncatedNormal;

const OUTER_REL_TOL: f64 = 1e-8;
const INNER_REL_TOL: f64 = 1e-10;
/// Smallest number of draws accepted by [`prior_correlation_depib`].
pub const MIN_CORRELATION_DRAWS: usize = 1_000_000;

pub fn clamped_rates(eta: f64, zeta: f64) -> ProportionPair {
    ProportionPair {
        theta1: (zeta - 0.5 * eta).clamp(0.0, 1.0),
        theta2: (zeta + 0.5 * eta).clamp(0.0, 1.0),
    }
}

/// The two truncated Gaussian priors `(η, ζ)`.
pub fn depib_priors(params: &DepIbParams) -> Result<(TruncatedNormal, TruncatedNormal)> {
    params.validate()?;
    Ok((
        TruncatedNormal::new(0.0, params.sigma_eta, -1.0, 1.0)?,
        TruncatedNormal::new(params.zeta_centre.value(), params.sigma_zeta, 0.0, 1.0)?,
    ))
}

/// One `(η, ζ)` draw from the prior.
pub fn sample_prior_depib<R: rand::Rng + ?Sized>(params: &DepIbParams, rng: &mut R) -> Result<(f64, f64)> {
    let (pe, pz) = depib_priors(params)?;
    Ok((pe.sample(rng), pz.sample(rng)))
}

/// Rate estimate kept away from the boundary, with its sampling variance.
fn smoothed_rate(y: u64, n: u64) -> (f64, f64) {
    let t = (y as f64 + 0.5) / (n as f64 + 1.0);
    (t, t * (1.0 - t) / n as f64)
}

fn take_error(slot: RefCell<Option<Error>>) -> Result<()> {
    match slot.into_inner() {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn push_peak_breaks(breaks: &mut Vec<f64>, centre: f64, sd: f64) {
    breaks.push(centre);
    for k in [1.0, 3.0, 6.0, 10.0] {
        breaks.push(centre - k * sd);
        breaks.push(centre + k * sd);
    }
}

/// Canonical group order; the prior is symmetric under `η → −η`, so
/// exchanging groups leaves both marginals unchanged.
fn canonical(d: &TwoByTwoData) -> TwoByTwoData {
    if (d.y1, d.n1) <= (d.y2, d.n2) {
        *d
    } else {
        d.swapped()
    }
}

fn log_shift(d: &TwoByTwoData, pe: &TruncatedNormal, pz: &TruncatedNormal) -> f64 {
    let mle = ProportionPair {
        theta1: d.y1 as f64 / d.n1 as f64,
        theta2: d.y2 as f64 / d.n2 as f64,
    };
    d.log_likelihood(mle) + pe.log_pdf(0.0) + pz.log_pdf(pz.mean.clamp(1e-12, 1.0 - 1e-12))
}

/// `ln p(D | H1)` by nested adaptive Gauss–Kronrod over `(η, ζ)`.
pub fn log_ml_h1_depib(d: &TwoByTwoData, params: &DepIbParams) -> Result<f64> {
    validate_data(*d)?;
    let d = canonical(d);
    let (pe, pz) = depib_priors(params)?;
    let shift = log_shift(&d, &pe, &pz);
    let (t1, v1) = smoothed_rate(d.y1, d.n1);
    let (t2, v2) = smoothed_rate(d.y2, d.n2);
    let (w1, w2) = (1.0 / v1, 1.0 / v2);
    let inner_sd = (w1 + w2).recip().sqrt();

    let failure = RefCell::new(None);
    let inner = |eta: f64| -> f64 {
        let lp_eta = pe.log_pdf(eta);
        if lp_eta == f64::NEG_INFINITY {
            return 0.0;
        }
        let h = 0.5 * eta;
        let mut breaks = vec![h.abs(), 1.0 - h.abs()];
        let centre = (w1 * (t1 + h) + w2 * (t2 - h)) / (w1 + w2);
        push_peak_breaks(&mut breaks, centre, inner_sd);
        let f = |zeta: f64| {
            let lp = d.log_likelihood(clamped_rates(eta, zeta)) + lp_eta + pz.log_pdf(zeta) - shift;
            lp.exp()
        };
        match integrate_with_breaks(f, 0.0, 1.0, &breaks, &QuadOptions::rel(INNER_REL_TOL)) {
            Ok(r) => r.value,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                0.0
            }
        }
    };
    let mut breaks = vec![0.0];
    push_peak_breaks(&mut breaks, t2 - t1, (v1 + v2).sqrt());
    let outer = integrate_with_breaks(inner, -1.0, 1.0, &breaks, &QuadOptions::rel(OUTER_REL_TOL))?;
    take_error(failure)?;
    finish(outer.value, shift)
}

/// `ln p(D | H0)`: `η = 0` with the same `ζ` prior.
pub fn log_ml_h0_depib(d: &TwoByTwoData, params: &DepIbParams) -> Result<f64> {
    validate_data(*d)?;
    let d = canonical(d);
    let (pe, pz) = depib_priors(params)?;
    let shift = log_shift(&d, &pe, &pz) - pe.log_pdf(0.0);
    let (t, v) = smoothed_rate(d.y1 + d.y2, d.n1 + d.n2);
    let mut breaks = Vec::new();
    push_peak_breaks(&mut breaks, t, v.sqrt());
    let f = |zeta: f64| (d.log_likelihood(clamped_rates(0.0, zeta)) + pz.log_pdf(zeta) - shift).exp();
    let r = integrate_with_breaks(f, 0.0, 1.0, &breaks, &QuadOptions::rel(INNER_REL_TOL))?;
    finish(r.value, shift)
}

fn finish(scaled: f64, shift: f64) -> Result<f64> {
    if !(scaled > 0.0 && scaled.is_finite()) {
        return Err(Error::numerical(format!(
            "dependent IB marginal underflowed (scaled integral {scaled})"
        )));
    }
    Ok(scaled.ln() + shift)
}

pub fn bf01_depib(d: &TwoByTwoData, params: &DepIbParams) -> Result<EvidenceResult> {
    let h0 = log_ml_h0_depib(d, params)?;
    let h1 = log_ml_h1_depib(d, params)?;
    Ok(EvidenceResult::new(h0, h1, OUTER_REL_TOL, Method::Quadrature))
}

/// Pearson correlation of the clamped rates under the prior, from a seeded
/// Monte Carlo sample.
pub fn prior_correlation_depib(params: &DepIbParams, n_draws: usize, seed: u64) -> Result<f64> {
    if n_draws < MIN_CORRELATION_DRAWS {
        return Err(Error::Validation {
            field: "n_draws",
            reason: format!("{n_draws} < {MIN_CORRELATION_DRAWS}"),
        });
    }
    let (pe, pz) = depib_priors(params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut m1, mut m2, mut s11, mut s22, mut s12) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for k in 1..=n_draws {
        let (eta, zeta) = (pe.sample(&mut rng), pz.sample(&mut rng));
        let p = clamped_rates(eta, zeta);
        let kf = k as f64;
        let (d1, d2) = (p.theta1 - m1, p.theta2 - m2);
        m1 += d1 / kf;
        m2 += d2 / kf;
        s11 += d1 * (p.theta1 - m1);
        s22 += d2 * (p.theta2 - m2);
        s12 += d1 * (p.theta2 - m2);
    }
    Ok(s12 / (s11 * s22).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ib::bf01_ib;
    use crate::model::ZetaCentre;
    use crate::quadrature::integrate;

    fn d(y1: u64, n1: u64, y2: u64, n2: u64) -> TwoByTwoData {
        TwoByTwoData::new(y1, n1, y2, n2).unwrap()
    }

    #[test]
    fn clamping() {
        assert_eq!(clamped_rates(0.0, 0.3), ProportionPair { theta1: 0.3, theta2: 0.3 });
        let p = clamped_rates(0.9, 0.1);
        assert_eq!(p.theta1, 0.0);
        assert!((p.theta2 - 0.55).abs() < 1e-15);
        let p = clamped_rates(-0.5, 0.9);
        assert_eq!(p.theta1, 1.0);
        assert!((p.theta2 - 0.65).abs() < 1e-15);
    }

    #[test]
    fn likelihood_zero_where_clamped() {
        let data = d(2, 10, 3, 10);
        assert_eq!(data.log_likelihood(clamped_rates(0.9, 0.1)), f64::NEG_INFINITY);
    }

    #[test]
    fn symmetric_data_and_swap() {
        let p = DepIbParams::default();
        let data = d(5, 20, 5, 20);
        assert!(bf01_depib(&data, &p).unwrap().log_bf01.is_finite());
        let data = d(3, 10, 5, 12);
        assert_eq!(
            bf01_depib(&data, &p).unwrap().log_bf01,
            bf01_depib(&data.swapped(), &p).unwrap().log_bf01
        );
    }

    #[test]
    fn h1_against_grid_sum() {
        // Midpoint rule on a fine grid, independent of the adaptive code.
        let p = DepIbParams::default();
        let data = d(3, 10, 5, 12);
        let (pe, pz) = depib_priors(&p).unwrap();
        let m = 1600;
        let mut total = 0.0;
        for i in 0..m {
            let eta = -1.0 + (i as f64 + 0.5) * 2.0 / m as f64;
            for j in 0..m {
                let zeta = (j as f64 + 0.5) / m as f64;
                let lp = data.log_likelihood(clamped_rates(eta, zeta)) + pe.log_pdf(eta) + pz.log_pdf(zeta);
                total += lp.exp();
            }
        }
        let grid = (total * 2.0 / (m * m) as f64).ln();
        let q = log_ml_h1_depib(&data, &p).unwrap();
        assert!(((q - grid).exp() - 1.0).abs() < 1e-4, "{q} vs {grid}");
    }

    #[test]
    fn ib_pattern_over_y() {
        let p = DepIbParams::default();
        let bf = |y| bf01_depib(&d(y, 100, y, 100), &p).unwrap().log_bf01;
        let (b0, b25, b50) = (bf(0), bf(25), bf(50));
        assert!(b0 > b25 && b25 > b50, "{b0} {b25} {b50}");
    }

    #[test]
    fn shrinking_sigma_eta_reduces_bf() {
        let data = d(25, 100, 25, 100);
        let wide = bf01_depib(&data, &DepIbParams::new(1.0, 0.5).unwrap()).unwrap();
        let narrow = bf01_depib(&data, &DepIbParams::new(0.2, 0.5).unwrap()).unwrap();
        assert!(narrow.log_bf01 < wide.log_bf01);
    }

    #[test]
    fn near_uniform_limit() {
        let data = d(5, 20, 8, 20);
        let p = DepIbParams::new(50.0, 50.0).unwrap();
        let dep = bf01_depib(&data, &p).unwrap().bf01();
        let ib = bf01_ib(&data, 1.0).unwrap().bf01();
        // The unclamped diamond carries half the uniform box mass; the clamped
        // half has zero likelihood when 0 < y < n, so H1 loses a factor of two.
        assert!((dep / (2.0 * ib) - 1.0).abs() < 0.01, "{dep} vs {ib}");
    }

    #[test]
    fn large_counts_finite() {
        let r = bf01_depib(&d(26, 11034, 10, 11037), &DepIbParams::default()).unwrap();
        assert!(r.log_bf01.is_finite());
    }

    #[test]
    fn correlations() {
        let p = DepIbParams::default();
        let r = prior_correlation_depib(&p, 1_000_000, 1).unwrap();
        assert!((r - 0.77).abs() < 0.01, "{r}");
        let r = prior_correlation_depib(&DepIbParams::new(1.0, 0.5).unwrap(), 1_000_000, 1).unwrap();
        assert!(r.abs() < 0.01, "{r}");
        let rs: Vec<f64> = [0.2, 0.4, 0.6, 0.8, 1.0]
            .iter()
            .map(|&s| prior_correlation_depib(&DepIbParams::new(s, 0.5).unwrap(), 1_000_000, 2).unwrap())
            .collect();
        assert!(rs.windows(2).all(|w| w[1] < w[0]), "{rs:?}");
        assert_eq!(prior_correlation_depib(&p, 1_000_000, 9).unwrap(), prior_correlation_depib(&p, 1_000_000, 9).unwrap());
        assert!(prior_correlation_depib(&p, 10, 1).is_err());
        let zero = p.with_zeta_centre(ZetaCentre::Zero);
        assert!(prior_correlation_depib(&zero, 1_000_000, 1).unwrap() < 0.76);
    }

    #[test]
    fn clamp_fraction_matches_tail_mass() {
        let p = DepIbParams::default();
        let (pe, pz) = depib_priors(&p).unwrap();
        // A rate clamps when ζ < |η|/2 or ζ > 1 − |η|/2.
        let analytic = integrate(
            |eta: f64| {
                let h = 0.5 * eta.abs();
                pe.log_pdf(eta).exp() * (pz.cdf(h) + 1.0 - pz.cdf(1.0 - h))
            },
            -1.0,
            1.0,
            &QuadOptions::rel(1e-10),
        )
        .unwrap()
        .value;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 400_000;
        let hits = (0..n)
            .filter(|_| {
                let (e, z) = sample_prior_depib(&p, &mut rng).unwrap();
                let r = clamped_rates(e, z);
                r.theta1 == 0.0 || r.theta1 == 1.0 || r.theta2 == 0.0 || r.theta2 == 1.0
            })
            .count();
        let frac = hits as f64 / n as f64;
        let se = (analytic * (1.0 - analytic) / n as f64).sqrt();
        assert!((frac - analytic).abs() < 3.0 * se, "{frac} vs {analytic}");
    }
}

//! Brute-force Monte Carlo estimates of marginal likelihoods, used to check
//! the closed-form and quadrature results.
//!
//! Draws come in fixed-size chunks, each with its own ChaCha8 stream, so the
//! result depends only on the seed and the draw count, not on thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{validate_data, GroupData, Hypothesis, LogitCoords, PriorConfig, TwoByTwoData};
use crate::priors::{draw_prior, ParamSample};

/// Smallest draw count accepted by the estimators.
pub const MIN_ORACLE_DRAWS: usize = 100_000;
/// Effective sample size below which a predictive estimate carries a warning.
pub const MIN_EFFECTIVE_SAMPLE_SIZE: f64 = 100.0;
const CHUNK: usize = 1 << 14;
// Stream offsets keep the two halves of the sequential estimator independent.
const JOINT_STREAMS: u64 = 0;
const GROUP1_STREAMS: u64 = 1 << 40;
const PREDICTIVE_STREAMS: u64 = 2 << 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub log_value: f64,
    /// Delta-method standard error of `log_value`.
    pub std_error: f64,
    pub n_draws: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

fn check_draws(n_draws: usize) -> Result<()> {
    if n_draws < MIN_ORACLE_DRAWS {
        return Err(Error::Validation {
            field: "n_draws",
            reason: format!("{n_draws} < {MIN_ORACLE_DRAWS}"),
        });
    }
    Ok(())
}

/// Maps every prior draw through `f`, in draw order.
fn map_draws<T: Send>(
    cfg: &PriorConfig,
    hypothesis: Hypothesis,
    n_draws: usize,
    seed: u64,
    stream_offset: u64,
    f: impl Fn(&ParamSample) -> T + Sync,
) -> Result<Vec<T>> {
    cfg.validate()?;
    let chunks = n_draws.div_ceil(CHUNK);
    let parts: Vec<Result<Vec<T>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(stream_offset + c as u64);
            let len = CHUNK.min(n_draws - c * CHUNK);
            (0..len)
                .map(|_| draw_prior(cfg, hypothesis, &mut rng).map(|s| f(&s)))
                .collect()
        })
        .collect();
    let mut out = Vec::with_capacity(n_draws);
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

fn group_log_lik(g: GroupData, s: &ParamSample, which: u8) -> f64 {
    // Log odds are exact for LT draws; rates may have rounded to 0 or 1.
    match (s.beta, s.psi) {
        (Some(b), Some(p)) => {
            let l = if which == 1 { b - 0.5 * p } else { b + 0.5 * p };
            g.log_likelihood_logit(l)
        }
        _ => g.log_likelihood(if which == 1 { s.theta1 } else { s.theta2 }),
    }
}

fn joint_log_lik(d: &TwoByTwoData, s: &ParamSample) -> f64 {
    match (s.beta, s.psi) {
        (Some(beta), Some(psi)) => d.log_likelihood_logit(LogitCoords { beta, psi }),
        _ => d.log_likelihood(s.rates()),
    }
}

/// `ln mean exp(l)` with its delta-method standard error.
fn log_mean_exp(ls: &[f64]) -> (f64, f64) {
    let n = ls.len() as f64;
    let m = ls.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return (f64::NEG_INFINITY, f64::INFINITY);
    }
    let w: Vec<f64> = ls.iter().map(|l| (l - m).exp()).collect();
    let mean = w.iter().sum::<f64>() / n;
    let var = w.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (m + mean.ln(), (var / n).sqrt() / mean)
}

/// Self-normalized importance estimate of `ln E[exp(l2) | weights exp(l1)]`,
/// its standard error and the effective sample size.
fn snis_log(pairs: &[(f64, f64)]) -> (f64, f64, f64) {
    let m1 = pairs.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let m2 = pairs.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = pairs.iter().map(|p| (p.0 - m1).exp()).collect();
    let sw: f64 = w.iter().sum();
    let sw2: f64 = w.iter().map(|x| x * x).sum();
    let g: Vec<f64> = pairs.iter().map(|p| (p.1 - m2).exp()).collect();
    let r: f64 = w.iter().zip(&g).map(|(w, g)| w * g).sum::<f64>() / sw;
    let var: f64 = w.iter().zip(&g).map(|(w, g)| (w / sw).powi(2) * (g - r).powi(2)).sum();
    (m2 + r.ln(), var.sqrt() / r, sw * sw / sw2)
}

/// `ln p(D | H)` by averaging the likelihood over prior draws.
pub fn mc_log_marginal(
    hypothesis: Hypothesis,
    d: &TwoByTwoData,
    cfg: &PriorConfig,
    n_draws: usize,
    seed: u64,
) -> Result<MCEstimate> {
    validate_data(*d)?;
    check_draws(n_draws)?;
    let ls = map_draws(cfg, hypothesis, n_draws, seed, JOINT_STREAMS, |s| joint_log_lik(d, s))?;
    let (log_value, std_error) = log_mean_exp(&ls);
    Ok(MCEstimate { log_value, std_error, n_draws, seed, warnings: Vec::new() })
}

/// Monte Carlo estimate of `ln p(D₂ | D₁, H)`, or of `ln p(D₂ | H)` when
/// `conditioned` is false.
///
/// Under IB `H1` the rates are independent, so the conditioned estimate uses
/// the factorized form and coincides exactly with the unconditioned one.
pub fn mc_log_predictive_group2(
    hypothesis: Hypothesis,
    d: &TwoByTwoData,
    cfg: &PriorConfig,
    conditioned: bool,
    n_draws: usize,
    seed: u64,
) -> Result<MCEstimate> {
    validate_data(*d)?;
    check_draws(n_draws)?;
    let (g1, g2) = (d.group1(), d.group2());
    let factorized = matches!(cfg, PriorConfig::Ib { .. }) && hypothesis == Hypothesis::H1;
    if !conditioned || factorized {
        let ls = map_draws(cfg, hypothesis, n_draws, seed, PREDICTIVE_STREAMS, |s| group_log_lik(g2, s, 2))?;
        let (log_value, std_error) = log_mean_exp(&ls);
        return Ok(MCEstimate { log_value, std_error, n_draws, seed, warnings: Vec::new() });
    }
    let pairs = map_draws(cfg, hypothesis, n_draws, seed, PREDICTIVE_STREAMS, |s| {
        (group_log_lik(g1, s, 1), group_log_lik(g2, s, 2))
    })?;
    let (log_value, std_error, ess) = snis_log(&pairs);
    let mut warnings = Vec::new();
    if ess < MIN_EFFECTIVE_SAMPLE_SIZE {
        warnings.push(format!("effective sample size {ess:.1} < {MIN_EFFECTIVE_SAMPLE_SIZE}"));
    }
    Ok(MCEstimate { log_value, std_error, n_draws, seed, warnings })
}

/// `ln p(D₁ | H) + ln p(D₂ | D₁, H)`, each term from its own draw streams.
pub fn sequential_log_marginal(
    hypothesis: Hypothesis,
    d: &TwoByTwoData,
    cfg: &PriorConfig,
    n_draws: usize,
    seed: u64,
) -> Result<MCEstimate> {
    validate_data(*d)?;
    check_draws(n_draws)?;
    let g1 = d.group1();
    let l1 = map_draws(cfg, hypothesis, n_draws, seed, GROUP1_STREAMS, |s| group_log_lik(g1, s, 1))?;
    let (z, z_se) = log_mean_exp(&l1);
    let pred = mc_log_predictive_group2(hypothesis, d, cfg, true, n_draws, seed)?;
    Ok(MCEstimate {
        log_value: z + pred.log_value,
        std_error: z_se.hypot(pred.std_error),
        n_draws,
        seed,
        warnings: pred.warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ib::{log_ml_h0_ib, log_ml_h1_ib, log_predictive_group2_ib};
    use crate::lt::{log_ml_h0_lt, log_ml_h1_lt};
    use crate::model::DepIbParams;

    fn d(y1: u64, n1: u64, y2: u64, n2: u64) -> TwoByTwoData {
        TwoByTwoData::new(y1, n1, y2, n2).unwrap()
    }

    fn within(est: &MCEstimate, exact: f64, k: f64) -> bool {
        (est.log_value - exact).abs() < k * est.std_error
    }

    #[test]
    fn ib_null_tiny_data() {
        let e = mc_log_marginal(Hypothesis::H0, &d(0, 1, 0, 1), &PriorConfig::ib(1.0).unwrap(), 200_000, 1).unwrap();
        assert!(within(&e, -(3f64.ln()), 3.0), "{e:?}");
    }

    #[test]
    fn lt_alternative_matches_quadrature() {
        let data = d(3, 10, 5, 12);
        let e = mc_log_marginal(Hypothesis::H1, &data, &PriorConfig::lt(1.0, 1.0).unwrap(), 400_000, 2).unwrap();
        assert!(within(&e, log_ml_h1_lt(&data, 1.0, 1.0).unwrap(), 3.0), "{e:?}");
    }

    #[test]
    fn std_error_scaling() {
        let data = d(3, 10, 5, 12);
        let cfg = PriorConfig::ib(1.0).unwrap();
        let a = mc_log_marginal(Hypothesis::H1, &data, &cfg, 200_000, 3).unwrap();
        let b = mc_log_marginal(Hypothesis::H1, &data, &cfg, 400_000, 3).unwrap();
        let ratio = b.std_error / a.std_error;
        assert!((ratio * 2f64.sqrt() - 1.0).abs() < 0.2, "{ratio}");
    }

    #[test]
    fn reproducible() {
        let data = d(3, 10, 5, 12);
        let cfg = PriorConfig::lt(1.0, 1.0).unwrap();
        let a = sequential_log_marginal(Hypothesis::H1, &data, &cfg, 100_000, 9).unwrap();
        let b = sequential_log_marginal(Hypothesis::H1, &data, &cfg, 100_000, 9).unwrap();
        assert_eq!(a, b);
        assert!(mc_log_marginal(Hypothesis::H1, &data, &cfg, 10, 9).is_err());
    }

    #[test]
    fn sequential_matches_joint() {
        let data = d(3, 10, 5, 12);
        let cases = [
            (Hypothesis::H0, PriorConfig::ib(1.0).unwrap(), log_ml_h0_ib(&data, 1.0).unwrap()),
            (Hypothesis::H1, PriorConfig::ib(1.0).unwrap(), log_ml_h1_ib(&data, 1.0).unwrap()),
            (Hypothesis::H0, PriorConfig::lt(1.0, 1.0).unwrap(), log_ml_h0_lt(&data, 1.0).unwrap()),
            (Hypothesis::H1, PriorConfig::lt(1.0, 1.0).unwrap(), log_ml_h1_lt(&data, 1.0, 1.0).unwrap()),
        ];
        for (h, cfg, exact) in cases {
            let j = mc_log_marginal(h, &data, &cfg, 400_000, 4).unwrap();
            let s = sequential_log_marginal(h, &data, &cfg, 400_000, 5).unwrap();
            let se = j.std_error.hypot(s.std_error);
            assert!((j.log_value - s.log_value).abs() < 3.0 * se, "{h:?} {cfg:?}: {j:?} {s:?}");
            assert!(within(&s, exact, 3.0), "{h:?} {cfg:?}: {s:?} vs {exact}");
        }
    }

    #[test]
    fn ib_predictive_conditioning_invariant() {
        let data = d(3, 10, 5, 12);
        let cfg = PriorConfig::ib(2.0).unwrap();
        let c = mc_log_predictive_group2(Hypothesis::H1, &data, &cfg, true, 100_000, 6).unwrap();
        let u = mc_log_predictive_group2(Hypothesis::H1, &data, &cfg, false, 100_000, 6).unwrap();
        assert_eq!(c, u);
        assert!(within(&c, log_predictive_group2_ib(data.group1(), data.group2(), 2.0), 3.0));
    }

    #[test]
    fn lt_shares_information() {
        let data = d(0, 20, 0, 20);
        let cfg = PriorConfig::lt(1.0, 1.0).unwrap();
        let c = mc_log_predictive_group2(Hypothesis::H1, &data, &cfg, true, 200_000, 7).unwrap();
        let u = mc_log_predictive_group2(Hypothesis::H1, &data, &cfg, false, 200_000, 7).unwrap();
        assert!(c.log_value - u.log_value > 3.0 * c.std_error.hypot(u.std_error), "{c:?} {u:?}");
    }

    #[test]
    fn dep_ib_matches_quadrature() {
        let data = d(3, 10, 5, 12);
        let p = DepIbParams::default();
        let cfg = PriorConfig::DepIb(p);
        let e = mc_log_marginal(Hypothesis::H1, &data, &cfg, 400_000, 8).unwrap();
        assert!(within(&e, crate::depib::log_ml_h1_depib(&data, &p).unwrap(), 3.0), "{e:?}");
        let e = mc_log_marginal(Hypothesis::H0, &data, &cfg, 400_000, 8).unwrap();
        assert!(within(&e, crate::depib::log_ml_h0_depib(&data, &p).unwrap(), 3.0), "{e:?}");
    }

    #[test]
    fn low_ess_warns() {
        let data = d(0, 2000, 2000, 2000);
        let cfg = PriorConfig::lt(1.0, 1.0).unwrap();
        let s = sequential_log_marginal(Hypothesis::H1, &data, &cfg, 100_000, 1).unwrap();
        assert!(!s.warnings.is_empty());
    }
}

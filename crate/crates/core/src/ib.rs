//! Independent Beta test: `θ₁, θ₂ ~ Beta(a, a)` independently under `H1`,
//! a common `θ ~ Beta(a, a)` under `H0`. Both marginals are beta-binomial
//! and available in closed form.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{validate_data, validate_ib_a, EvidenceResult, GroupData, Method, TwoByTwoData};
use crate::special::log_beta;

/// Conjugate posterior: independent Beta distributions per group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IbPosterior {
    pub a1_post: f64,
    pub b1_post: f64,
    pub a2_post: f64,
    pub b2_post: f64,
}

/// Beta-binomial log marginal of one group under a Beta(a, a) prior.
pub fn log_ml_group_ib(g: GroupData, a: f64) -> f64 {
    let (y, f) = (g.y as f64, (g.n - g.y) as f64);
    g.log_binomial_coefficient() + log_beta(a + y, a + f) - log_beta(a, a)
}

/// Log prior-predictive probability of group-2 counts after observing group 1.
///
/// The rates are independent a priori, so the group-2 posterior after seeing
/// group 1 is still Beta(a, a); `_given` is deliberately unused.
pub fn log_predictive_group2_ib(_given: GroupData, g2: GroupData, a: f64) -> f64 {
    log_ml_group_ib(g2, a)
}

pub fn log_ml_h0_ib(d: &TwoByTwoData, a: f64) -> Result<f64> {
    validate_data(*d)?;
    validate_ib_a(a)?;
    let y = (d.y1 + d.y2) as f64;
    let f = ((d.n1 - d.y1) + (d.n2 - d.y2)) as f64;
    Ok(d.log_binomial_coefficients() + log_beta(a + y, a + f) - log_beta(a, a))
}

pub fn log_ml_h1_ib(d: &TwoByTwoData, a: f64) -> Result<f64> {
    validate_data(*d)?;
    validate_ib_a(a)?;
    Ok(log_ml_group_ib(d.group1(), a) + log_ml_group_ib(d.group2(), a))
}

pub fn bf01_ib(d: &TwoByTwoData, a: f64) -> Result<EvidenceResult> {
    let h0 = log_ml_h0_ib(d, a)?;
    let h1 = log_ml_h1_ib(d, a)?;
    Ok(EvidenceResult::new(h0, h1, 0.0, Method::Analytic))
}

pub fn ib_posterior(d: &TwoByTwoData, a: f64) -> Result<IbPosterior> {
    validate_data(*d)?;
    validate_ib_a(a)?;
    Ok(IbPosterior {
        a1_post: a + d.y1 as f64,
        b1_post: a + (d.n1 - d.y1) as f64,
        a2_post: a + d.y2 as f64,
        b2_post: a + (d.n2 - d.y2) as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn d(y1: u64, n1: u64, y2: u64, n2: u64) -> TwoByTwoData {
        TwoByTwoData::new(y1, n1, y2, n2).unwrap()
    }

    #[test]
    fn marginals_closed_form() {
        assert!((log_ml_h0_ib(&d(0, 100, 0, 100), 1.0).unwrap() + 201f64.ln()).abs() < 1e-13);
        assert!((log_ml_h0_ib(&d(0, 1, 0, 1), 1.0).unwrap() + 3f64.ln()).abs() < 1e-14);
        assert!((log_ml_h1_ib(&d(0, 100, 0, 100), 1.0).unwrap() + 2.0 * 101f64.ln()).abs() < 1e-13);
        assert!((log_ml_h1_ib(&d(0, 1, 1, 1), 1.0).unwrap() + 4f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn bayes_factors() {
        let r = bf01_ib(&d(0, 100, 0, 100), 1.0).unwrap();
        assert!((r.bf01() - 10201.0 / 201.0).abs() < 1e-10);
        assert_eq!(r.method, Method::Analytic);
        assert_eq!(r.abs_error_estimate, 0.0);
        assert!((bf01_ib(&d(50, 100, 50, 100), 1.0).unwrap().bf01() - 5.70).abs() < 0.01);
    }

    #[test]
    fn posterior_update() {
        let p = ib_posterior(&d(15, 493, 13, 488), 1.0).unwrap();
        assert_eq!((p.a1_post, p.b1_post, p.a2_post, p.b2_post), (16.0, 479.0, 14.0, 476.0));
        let p = ib_posterior(&d(0, 100, 0, 100), 2.0).unwrap();
        assert_eq!((p.a1_post, p.b1_post), (2.0, 102.0));
        let bad = TwoByTwoData { y1: 0, n1: 0, y2: 0, n2: 1 };
        assert!(ib_posterior(&bad, 1.0).is_err());
        assert!(bf01_ib(&bad, 1.0).is_err());
        assert!(bf01_ib(&d(1, 2, 1, 2), 0.9).is_err());
    }

    #[test]
    fn decreasing_towards_centre() {
        let bfs: Vec<f64> = (0..=50)
            .map(|y| bf01_ib(&d(y, 100, y, 100), 1.0).unwrap().log_bf01)
            .collect();
        assert!(bfs.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn sequential_identity() {
        let data = d(3, 10, 5, 12);
        let seq = log_ml_group_ib(data.group1(), 1.5)
            + log_predictive_group2_ib(data.group1(), data.group2(), 1.5);
        assert_eq!(seq, log_ml_h1_ib(&data, 1.5).unwrap());
    }

    proptest! {
        #[test]
        fn symmetries(n1 in 1u64..400, n2 in 1u64..400, f1 in 0.0f64..=1.0, f2 in 0.0f64..=1.0, a in 1.0f64..5.0) {
            let y1 = (f1 * n1 as f64) as u64;
            let y2 = (f2 * n2 as f64) as u64;
            let data = d(y1, n1, y2, n2);
            let base = bf01_ib(&data, a).unwrap().log_bf01;
            prop_assert_eq!(base, bf01_ib(&data.swapped(), a).unwrap().log_bf01);
            let comp = bf01_ib(&data.complemented(), a).unwrap().log_bf01;
            prop_assert!((base - comp).abs() <= 1e-12 * base.abs().max(1.0));
        }
    }
}

//! Model averaging across the IB and LT null and alternative models.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ib::{log_ml_h0_ib, log_ml_h1_ib};
use crate::lt::{log_ml_h0_lt_refined, log_ml_h1_lt_refined};
use crate::model::{EvidenceResult, Hypothesis, Method, PriorConfig, TwoByTwoData};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Approach {
    Ib,
    Lt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModelId {
    pub approach: Approach,
    pub hypothesis: Hypothesis,
}

impl ModelId {
    pub const IB0: ModelId = ModelId { approach: Approach::Ib, hypothesis: Hypothesis::H0 };
    pub const IB1: ModelId = ModelId { approach: Approach::Ib, hypothesis: Hypothesis::H1 };
    pub const LT0: ModelId = ModelId { approach: Approach::Lt, hypothesis: Hypothesis::H0 };
    pub const LT1: ModelId = ModelId { approach: Approach::Lt, hypothesis: Hypothesis::H1 };
    pub const ALL: [ModelId; 4] = [Self::IB0, Self::IB1, Self::LT0, Self::LT1];
}

/// Prior model probabilities, in the order of [`ModelId::ALL`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelPriorWeights {
    pub ib_h0: f64,
    pub ib_h1: f64,
    pub lt_h0: f64,
    pub lt_h1: f64,
}

impl Default for ModelPriorWeights {
    fn default() -> Self {
        ModelPriorWeights { ib_h0: 0.25, ib_h1: 0.25, lt_h0: 0.25, lt_h1: 0.25 }
    }
}

impl ModelPriorWeights {
    pub fn new(ib_h0: f64, ib_h1: f64, lt_h0: f64, lt_h1: f64) -> Result<Self> {
        let w = ModelPriorWeights { ib_h0, ib_h1, lt_h0, lt_h1 };
        w.validate()?;
        Ok(w)
    }

    pub fn get(&self, m: ModelId) -> f64 {
        match (m.approach, m.hypothesis) {
            (Approach::Ib, Hypothesis::H0) => self.ib_h0,
            (Approach::Ib, Hypothesis::H1) => self.ib_h1,
            (Approach::Lt, Hypothesis::H0) => self.lt_h0,
            (Approach::Lt, Hypothesis::H1) => self.lt_h1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ws = [self.ib_h0, self.ib_h1, self.lt_h0, self.lt_h1];
        if ws.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Config(format!("model weights {ws:?} must be finite and nonnegative")));
        }
        let total: f64 = ws.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("model weights sum to {total}, not 1")));
        }
        if self.ib_h0 + self.lt_h0 == 0.0 {
            return Err(Error::Config("all null-model weights are zero".into()));
        }
        if self.ib_h1 + self.lt_h1 == 0.0 {
            return Err(Error::Config("all alternative-model weights are zero".into()));
        }
        Ok(())
    }
}

/// A log marginal likelihood with its absolute error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogMarginal {
    pub log_value: f64,
    pub abs_error: f64,
}

/// Log marginal likelihood of one model. `cfg` must be an IB config for IB
/// models and an LT config for LT models.
pub fn log_ml_detailed(model: ModelId, d: &TwoByTwoData, cfg: &PriorConfig) -> Result<LogMarginal> {
    cfg.validate()?;
    match (model.approach, cfg) {
        (Approach::Ib, PriorConfig::Ib { a }) => {
            let v = match model.hypothesis {
                Hypothesis::H0 => log_ml_h0_ib(d, *a)?,
                Hypothesis::H1 => log_ml_h1_ib(d, *a)?,
            };
            Ok(LogMarginal { log_value: v, abs_error: 0.0 })
        }
        (Approach::Lt, PriorConfig::Lt(p)) => {
            let r = match model.hypothesis {
                Hypothesis::H0 => log_ml_h0_lt_refined(d, p)?,
                Hypothesis::H1 => log_ml_h1_lt_refined(d, p)?,
            };
            Ok(LogMarginal { log_value: r.log_value, abs_error: r.gap })
        }
        (approach, cfg) => Err(Error::Config(format!(
            "{approach:?} model cannot use prior config {cfg:?}"
        ))),
    }
}

pub fn log_ml(model: ModelId, d: &TwoByTwoData, cfg: &PriorConfig) -> Result<f64> {
    Ok(log_ml_detailed(model, d, cfg)?.log_value)
}

/// Model-averaged Bayes factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragedEvidence {
    /// Within-hypothesis averaged marginals: `log_ml_h0` is
    /// `ln Σ (π_i / Σπ) p(D | M_i)` over the null models, and likewise for `H1`.
    pub evidence: EvidenceResult,
    /// `ln` of total null weight over total alternative weight.
    pub log_prior_odds: f64,
    /// Ratio of the weighted sums of marginals, prior weights included.
    pub log_bf_avg01: f64,
    pub warnings: Vec<String>,
}

impl AveragedEvidence {
    pub fn bf_avg01(&self) -> f64 {
        self.log_bf_avg01.exp()
    }
}

fn weighted_lse(terms: &[(f64, f64)]) -> f64 {
    let total: f64 = terms.iter().map(|t| t.0).sum();
    let max = terms.iter().map(|t| t.1).fold(f64::NEG_INFINITY, f64::max);
    if terms.len() == 1 {
        return terms[0].1;
    }
    let s: f64 = terms.iter().map(|(w, l)| (w / total) * (l - max).exp()).sum();
    max + s.ln()
}

pub fn bf_avg01(
    d: &TwoByTwoData,
    weights: &ModelPriorWeights,
    ib: &PriorConfig,
    lt: &PriorConfig,
) -> Result<AveragedEvidence> {
    weights.validate()?;
    let mut num = Vec::new();
    let mut den = Vec::new();
    let mut err = 0.0;
    let mut method = Method::Analytic;
    for m in ModelId::ALL {
        let w = weights.get(m);
        if w == 0.0 {
            continue;
        }
        let cfg = match m.approach {
            Approach::Ib => ib,
            Approach::Lt => lt,
        };
        let lm = log_ml_detailed(m, d, cfg)?;
        if m.approach == Approach::Lt {
            method = Method::Quadrature;
            err += lm.abs_error;
        }
        match m.hypothesis {
            Hypothesis::H0 => num.push((m.approach, w, lm.log_value)),
            Hypothesis::H1 => den.push((m.approach, w, lm.log_value)),
        }
    }
    let pairs = |v: &[(Approach, f64, f64)]| v.iter().map(|t| (t.1, t.2)).collect::<Vec<_>>();
    let h0 = weighted_lse(&pairs(&num));
    let h1 = weighted_lse(&pairs(&den));
    let w0: f64 = num.iter().map(|t| t.1).sum();
    let w1: f64 = den.iter().map(|t| t.1).sum();
    let log_prior_odds = if w0 == w1 { 0.0 } else { w0.ln() - w1.ln() };
    let evidence = EvidenceResult::new(h0, h1, err, method);
    let mut warnings = Vec::new();
    let mixed = num.iter().any(|a| den.iter().any(|b| a.0 != b.0));
    if mixed {
        warnings.push(
            "approaches are mixed across numerator and denominator; the IB and LT models put different priors on the nuisance parameter".into(),
        );
    }
    Ok(AveragedEvidence {
        evidence,
        log_prior_odds,
        log_bf_avg01: evidence.log_bf01 + log_prior_odds,
        warnings,
    })
}

/// `p(D | m_num) / p(D | m_den)`.
pub fn cross_model_ratio(
    d: &TwoByTwoData,
    m_num: ModelId,
    m_den: ModelId,
    ib: &PriorConfig,
    lt: &PriorConfig,
) -> Result<f64> {
    let cfg = |m: ModelId| match m.approach {
        Approach::Ib => ib,
        Approach::Lt => lt,
    };
    let a = log_ml(m_num, d, cfg(m_num))?;
    let b = log_ml(m_den, d, cfg(m_den))?;
    Ok((a - b).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ib::bf01_ib;
    use crate::lt::{bf01_lt, log_ml_h1_lt};
    use crate::model::{BetaPrior, LtParams};

    fn d(y1: u64, n1: u64, y2: u64, n2: u64) -> TwoByTwoData {
        TwoByTwoData::new(y1, n1, y2, n2).unwrap()
    }

    fn cfgs() -> (PriorConfig, PriorConfig) {
        (PriorConfig::ib(1.0).unwrap(), PriorConfig::lt(1.0, 1.0).unwrap())
    }

    #[test]
    fn dispatch() {
        let (ib, lt) = cfgs();
        let data = d(3, 10, 5, 12);
        assert_eq!(log_ml(ModelId::IB0, &data, &ib).unwrap(), log_ml_h0_ib(&data, 1.0).unwrap());
        assert_eq!(log_ml(ModelId::LT1, &data, &lt).unwrap(), log_ml_h1_lt(&data, 1.0, 1.0).unwrap());
        let zero = d(0, 50, 0, 50);
        for m in ModelId::ALL {
            let cfg = if m.approach == Approach::Ib { &ib } else { &lt };
            assert!(log_ml(m, &zero, cfg).unwrap().is_finite());
        }
        assert!(matches!(log_ml(ModelId::IB0, &data, &lt), Err(Error::Config(_))));
        assert!(matches!(log_ml(ModelId::LT1, &data, &ib), Err(Error::Config(_))));
    }

    #[test]
    fn weights_validated() {
        assert!(ModelPriorWeights::new(0.5, 0.5, 0.0, 0.0).is_ok());
        assert!(ModelPriorWeights::new(0.5, 0.6, 0.0, 0.0).is_err());
        assert!(ModelPriorWeights::new(1.0, 0.0, 0.0, 0.0).is_err());
        assert!(ModelPriorWeights::new(-0.5, 0.5, 0.5, 0.5).is_err());
    }

    #[test]
    fn degenerate_weights_reduce_exactly() {
        let (ib, lt) = cfgs();
        let data = d(15, 493, 13, 488);
        let w = ModelPriorWeights::new(0.5, 0.5, 0.0, 0.0).unwrap();
        let r = bf_avg01(&data, &w, &ib, &lt).unwrap();
        assert_eq!(r.log_bf_avg01, bf01_ib(&data, 1.0).unwrap().log_bf01);
        assert!(r.warnings.is_empty());
        let w = ModelPriorWeights::new(0.0, 0.0, 0.5, 0.5).unwrap();
        let r = bf_avg01(&data, &w, &ib, &lt).unwrap();
        assert_eq!(r.log_bf_avg01, bf01_lt(&data, 1.0, 1.0).unwrap().log_bf01);
        let w = ModelPriorWeights::new(0.0, 0.5, 0.5, 0.0).unwrap();
        assert_eq!(bf_avg01(&data, &w, &ib, &lt).unwrap().warnings.len(), 1);
    }

    #[test]
    fn equal_weights_between_components() {
        let (ib, lt) = cfgs();
        let data = d(15, 493, 13, 488);
        let r = bf_avg01(&data, &ModelPriorWeights::default(), &ib, &lt).unwrap();
        let a = bf01_ib(&data, 1.0).unwrap().log_bf01;
        let b = bf01_lt(&data, 1.0, 1.0).unwrap().log_bf01;
        assert!(r.log_bf_avg01 > a.min(b) && r.log_bf_avg01 < a.max(b));
        assert!(!r.warnings.is_empty());
    }

    #[test]
    fn cross_ratios() {
        let (ib, lt) = cfgs();
        let data = d(0, 50, 0, 50);
        let r = cross_model_ratio(&data, ModelId::IB1, ModelId::LT0, &ib, &lt).unwrap();
        assert!((r - 7.0).abs() < 0.5, "{r}");
        assert_eq!(cross_model_ratio(&data, ModelId::LT1, ModelId::LT1, &ib, &lt).unwrap(), 1.0);
        let data = d(3, 10, 5, 12);
        let ab = cross_model_ratio(&data, ModelId::IB0, ModelId::LT1, &ib, &lt).unwrap();
        let ba = cross_model_ratio(&data, ModelId::LT1, ModelId::IB0, &ib, &lt).unwrap();
        assert!((ab * ba - 1.0).abs() < 1e-12);
    }

    #[test]
    fn logistic_lt_null_equals_ib_null() {
        let ib = PriorConfig::ib(1.0).unwrap();
        let lt = PriorConfig::Lt(LtParams::default().with_beta_prior(BetaPrior::Logistic));
        let data = d(0, 50, 0, 50);
        let r = cross_model_ratio(&data, ModelId::LT0, ModelId::IB0, &ib, &lt).unwrap();
        assert!((r - 1.0).abs() < 1e-8);
    }

    #[test]
    fn large_counts_stable() {
        let (ib, lt) = cfgs();
        let data = d(10, 100_000, 12, 100_000);
        let r = bf_avg01(&data, &ModelPriorWeights::default(), &ib, &lt).unwrap();
        assert!(r.log_bf_avg01.is_finite() && r.evidence.log_ml_h0.is_finite());
    }
}

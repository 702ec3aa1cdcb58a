//! Domain types shared by every test: observed counts, the three parameter
//! coordinate systems, prior configurations and evidence results.
//!
//! Coordinates:
//! - rates `(θ₁, θ₂)`,
//! - rate difference and grand mean `(η, ζ)` with `θ₁ = ζ − η/2`, `θ₂ = ζ + η/2`,
//! - average log odds and log odds ratio `(β, ψ)` with
//!   `logit θ₁ = β − ψ/2`, `logit θ₂ = β + ψ/2`.
//!
//! Differences are always group 2 minus group 1.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Observed counts of a two-group binomial experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TwoByTwoData {
    pub y1: u64,
    pub n1: u64,
    pub y2: u64,
    pub n2: u64,
}

impl TwoByTwoData {
    /// Builds and validates a data set.
    pub fn new(y1: u64, n1: u64, y2: u64, n2: u64) -> Result<Self> {
        validate_data(TwoByTwoData { y1, n1, y2, n2 })
    }

    /// Data with the two groups exchanged.
    pub fn swapped(&self) -> Self {
        TwoByTwoData {
            y1: self.y2,
            n1: self.n2,
            y2: self.y1,
            n2: self.n1,
        }
    }

    /// Data with events and non-events exchanged in both groups.
    pub fn complemented(&self) -> Self {
        TwoByTwoData {
            y1: self.n1 - self.y1,
            n1: self.n1,
            y2: self.n2 - self.y2,
            n2: self.n2,
        }
    }

    pub fn group1(&self) -> GroupData {
        GroupData {
            y: self.y1,
            n: self.n1,
        }
    }

    pub fn group2(&self) -> GroupData {
        GroupData {
            y: self.y2,
            n: self.n2,
        }
    }

    /// Log binomial likelihood at the rates `p`, including both binomial coefficients.
    pub fn log_likelihood(&self, p: ProportionPair) -> f64 {
        self.group1().log_likelihood(p.theta1) + self.group2().log_likelihood(p.theta2)
    }

    /// Log likelihood evaluated directly on the logit scale.
    pub fn log_likelihood_logit(&self, c: LogitCoords) -> f64 {
        self.group1().log_likelihood_logit(c.beta - 0.5 * c.psi)
            + self.group2().log_likelihood_logit(c.beta + 0.5 * c.psi)
    }

    /// `ln C(n₁,y₁) + ln C(n₂,y₂)`.
    pub fn log_binomial_coefficients(&self) -> f64 {
        self.group1().log_binomial_coefficient() + self.group2().log_binomial_coefficient()
    }
}

/// Counts of a single group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GroupData {
    pub y: u64,
    pub n: u64,
}

impl GroupData {
    pub fn log_binomial_coefficient(&self) -> f64 {
        crate::special::ln_choose(self.n, self.y)
    }

    /// `ln C(n,y) + y ln θ + (n−y) ln(1−θ)`, with `0·ln 0 = 0`.
    pub fn log_likelihood(&self, theta: f64) -> f64 {
        let (y, f) = (self.y as f64, (self.n - self.y) as f64);
        let mut ll = self.log_binomial_coefficient();
        if self.y > 0 {
            ll += y * theta.ln();
        }
        if self.n > self.y {
            ll += f * (-theta).ln_1p();
        }
        ll
    }

    /// Log likelihood as a function of the log odds `l`.
    pub fn log_likelihood_logit(&self, l: f64) -> f64 {
        let (y, f) = (self.y as f64, (self.n - self.y) as f64);
        let mut ll = self.log_binomial_coefficient();
        if self.y > 0 {
            ll -= y * softplus(-l);
        }
        if self.n > self.y {
            ll -= f * softplus(l);
        }
        ll
    }
}

/// A pair of binomial rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProportionPair {
    pub theta1: f64,
    pub theta2: f64,
}

impl ProportionPair {
    pub fn new(theta1: f64, theta2: f64) -> Result<Self> {
        for (name, v) in [("theta1", theta1), ("theta2", theta2)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Domain(format!("{name} = {v} outside [0, 1]")));
            }
        }
        Ok(ProportionPair { theta1, theta2 })
    }
}

/// Average log odds `beta` and log odds ratio `psi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogitCoords {
    pub beta: f64,
    pub psi: f64,
}

/// Rate difference `eta` and grand mean `zeta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffCoords {
    pub eta: f64,
    pub zeta: f64,
}

impl DiffCoords {
    /// Inverse of [`proportions_to_diff`]; exact only when both rates land in `[0, 1]`.
    pub fn to_proportions(self) -> ProportionPair {
        ProportionPair {
            theta1: self.zeta - 0.5 * self.eta,
            theta2: self.zeta + 0.5 * self.eta,
        }
    }
}

/// Logistic function, `1 / (1 + e^{−x})`, stable on the whole real line.
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + eˣ)`.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `ln(θ / (1 − θ))`.
pub fn logit(theta: f64) -> f64 {
    theta.ln() - (-theta).ln_1p()
}

pub fn logit_to_proportions(c: LogitCoords) -> ProportionPair {
    ProportionPair {
        theta1: logistic(c.beta - 0.5 * c.psi),
        theta2: logistic(c.beta + 0.5 * c.psi),
    }
}

pub fn proportions_to_diff(p: ProportionPair) -> DiffCoords {
    DiffCoords {
        eta: p.theta2 - p.theta1,
        zeta: 0.5 * (p.theta1 + p.theta2),
    }
}

/// Fails on boundary rates, whose log odds are infinite.
pub fn proportions_to_logit(p: ProportionPair) -> Result<LogitCoords> {
    for (name, v) in [("theta1", p.theta1), ("theta2", p.theta2)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::Domain(format!(
                "{name} = {v}: log odds are infinite outside (0, 1)"
            )));
        }
    }
    let (l1, l2) = (logit(p.theta1), logit(p.theta2));
    Ok(LogitCoords {
        beta: 0.5 * (l1 + l2),
        psi: l2 - l1,
    })
}

pub fn validate_data(d: TwoByTwoData) -> Result<TwoByTwoData> {
    if d.n1 == 0 {
        return Err(Error::Validation {
            field: "n1",
            reason: "sample size must be at least 1".into(),
        });
    }
    if d.n2 == 0 {
        return Err(Error::Validation {
            field: "n2",
            reason: "sample size must be at least 1".into(),
        });
    }
    if d.y1 > d.n1 {
        return Err(Error::Validation {
            field: "y1",
            reason: format!("y1 = {} exceeds n1 = {}", d.y1, d.n1),
        });
    }
    if d.y2 > d.n2 {
        return Err(Error::Validation {
            field: "y2",
            reason: format!("y2 = {} exceeds n2 = {}", d.y2, d.n2),
        });
    }
    Ok(d)
}

/// Null (`H0`) or alternative (`H1`) hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Hypothesis {
    H0,
    H1,
}

/// Prior on the average log odds under the logit transformation test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaPrior {
    #[default]
    Gaussian,
    /// Logistic with location 0 and scale `sigma_beta`. With scale 1 and `ψ = 0`
    /// this makes the common rate uniform.
    Logistic,
}

/// Centre of the truncated Gaussian prior on the grand mean in the dependent IB test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZetaCentre {
    /// `N(0, σ_ζ)` truncated to (0, 1).
    Zero,
    /// `N(½, σ_ζ)` truncated to (0, 1).
    #[default]
    Half,
}

impl ZetaCentre {
    pub fn value(self) -> f64 {
        match self {
            ZetaCentre::Zero => 0.0,
            ZetaCentre::Half => 0.5,
        }
    }
}

/// Hyperparameters of the logit transformation test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LtParams {
    pub sigma_beta: f64,
    pub sigma_psi: f64,
    #[serde(default)]
    pub beta_prior: BetaPrior,
}

impl Default for LtParams {
    fn default() -> Self {
        LtParams {
            sigma_beta: 1.0,
            sigma_psi: 1.0,
            beta_prior: BetaPrior::Gaussian,
        }
    }
}

impl LtParams {
    pub fn new(sigma_beta: f64, sigma_psi: f64) -> Result<Self> {
        let p = LtParams {
            sigma_beta,
            sigma_psi,
            beta_prior: BetaPrior::Gaussian,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_beta_prior(mut self, beta_prior: BetaPrior) -> Self {
        self.beta_prior = beta_prior;
        self
    }

    pub fn validate(&self) -> Result<()> {
        positive("sigma_beta", self.sigma_beta)?;
        positive("sigma_psi", self.sigma_psi)
    }
}

/// Hyperparameters of the dependent IB test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepIbParams {
    pub sigma_eta: f64,
    pub sigma_zeta: f64,
    #[serde(default)]
    pub zeta_centre: ZetaCentre,
}

impl Default for DepIbParams {
    fn default() -> Self {
        DepIbParams {
            sigma_eta: 0.2,
            sigma_zeta: 0.5,
            zeta_centre: ZetaCentre::Half,
        }
    }
}

impl DepIbParams {
    pub fn new(sigma_eta: f64, sigma_zeta: f64) -> Result<Self> {
        let p = DepIbParams {
            sigma_eta,
            sigma_zeta,
            zeta_centre: ZetaCentre::default(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_zeta_centre(mut self, zeta_centre: ZetaCentre) -> Self {
        self.zeta_centre = zeta_centre;
        self
    }

    pub fn validate(&self) -> Result<()> {
        positive("sigma_eta", self.sigma_eta)?;
        positive("sigma_zeta", self.sigma_zeta)
    }
}

/// Prior setup of one of the three tests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriorConfig {
    Ib { a: f64 },
    Lt(LtParams),
    DepIb(DepIbParams),
}

/// Above this `σ_ψ` the LT prior makes the two rates anti-correlated.
pub const SIGMA_PSI_WARN: f64 = 2.0;

impl PriorConfig {
    pub fn ib(a: f64) -> Result<Self> {
        let c = PriorConfig::Ib { a };
        c.validate()?;
        Ok(c)
    }

    pub fn lt(sigma_beta: f64, sigma_psi: f64) -> Result<Self> {
        Ok(PriorConfig::Lt(LtParams::new(sigma_beta, sigma_psi)?))
    }

    pub fn dep_ib(sigma_eta: f64, sigma_zeta: f64) -> Result<Self> {
        Ok(PriorConfig::DepIb(DepIbParams::new(sigma_eta, sigma_zeta)?))
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PriorConfig::Ib { a } => validate_ib_a(*a),
            PriorConfig::Lt(p) => p.validate(),
            PriorConfig::DepIb(p) => p.validate(),
        }
    }

    /// Non-fatal advisories about the configuration.
    pub fn warnings(&self) -> Vec<String> {
        match self {
            PriorConfig::Lt(p) if p.sigma_psi > SIGMA_PSI_WARN => vec![format!(
                "sigma_psi = {} > {SIGMA_PSI_WARN}: the prior makes the two rates anti-correlated",
                p.sigma_psi
            )],
            _ => Vec::new(),
        }
    }
}

/// `a < 1` gives a Beta(a, a) density that is unbounded at 0 and 1.
pub fn validate_ib_a(a: f64) -> Result<()> {
    if a.is_finite() && a >= 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "a = {a}: the Beta(a, a) prior requires a >= 1"
        )))
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} = {v} must be positive")))
    }
}

/// How a marginal likelihood was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Analytic,
    Quadrature,
    MonteCarlo,
}

/// Log marginal likelihoods of both hypotheses and their log Bayes factor.
///
/// Marginals are true log probabilities of the observed counts (binomial
/// coefficients included). `abs_error_estimate` bounds the absolute error of
/// `log_bf01`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvidenceResult {
    pub log_ml_h0: f64,
    pub log_ml_h1: f64,
    pub log_bf01: f64,
    pub abs_error_estimate: f64,
    pub method: Method,
}

impl EvidenceResult {
    pub fn new(log_ml_h0: f64, log_ml_h1: f64, abs_error_estimate: f64, method: Method) -> Self {
        let abs_error_estimate = if method == Method::Analytic {
            0.0
        } else {
            abs_error_estimate.abs()
        };
        let r = EvidenceResult {
            log_ml_h0,
            log_ml_h1,
            log_bf01: log_ml_h0 - log_ml_h1,
            abs_error_estimate,
            method,
        };
        debug_assert!(r.log_bf01 == r.log_ml_h0 - r.log_ml_h1 || r.log_bf01.is_nan());
        r
    }

    pub fn bf01(&self) -> f64 {
        self.log_bf01.exp()
    }

    pub fn bf10(&self) -> f64 {
        (-self.log_bf01).exp()
    }

    pub fn log_bf10(&self) -> f64 {
        -self.log_bf01
    }
}

/// Interpretive label on the conventional 1–3 / 3–10 / >10 scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvidenceLabel {
    Weak,
    Moderate,
    Strong,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceCategory {
    pub favours: Hypothesis,
    pub label: EvidenceLabel,
}

/// Labels a Bayes factor. The label describes strength only; the factor
/// itself remains a continuous measure.
pub fn evidence_category(log_bf01: f64) -> EvidenceCategory {
    let favours = if log_bf01 >= 0.0 {
        Hypothesis::H0
    } else {
        Hypothesis::H1
    };
    let bf = log_bf01.abs().exp();
    let label = if bf < 3.0 {
        EvidenceLabel::Weak
    } else if bf <= 10.0 {
        EvidenceLabel::Moderate
    } else {
        EvidenceLabel::Strong
    };
    EvidenceCategory { favours, label }
}

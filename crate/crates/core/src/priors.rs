//! Draws from, and densities of, the priors each test induces on the rates
//! and on derived quantities.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::depib::{clamped_rates, depib_priors, prior_correlation_depib};
use crate::error::{Error, Result};
use crate::model::{
    logistic, logit, logit_to_proportions, proportions_to_diff, proportions_to_logit, BetaPrior,
    Hypothesis, LogitCoords, LtParams, PriorConfig, ProportionPair,
};
use crate::quadrature::{integrate_with_breaks, QuadOptions};
use crate::special::{
    eta_density_ib, log_density_beta, log_density_gaussian, log_density_logistic, psi_density_ib_a1,
    TruncatedNormal,
};

/// Bins of the Monte Carlo histogram used for the IB `ψ` density when `a ≠ 1`.
pub const PSI_HISTOGRAM_BINS: usize = 10_000;
/// Draws behind that histogram.
pub const PSI_HISTOGRAM_DRAWS: usize = 10_000_000;
const PSI_HISTOGRAM_SEED: u64 = 0x5eed_0001;
/// Half width of the `ψ` axis of joint grids.
pub const PSI_GRID_HALF_WIDTH: f64 = 8.0;
/// Smallest joint grid resolution per axis.
pub const MIN_JOINT_RESOLUTION: usize = 64;

/// One prior draw in every coordinate system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamSample {
    pub theta1: f64,
    pub theta2: f64,
    pub eta: f64,
    pub zeta: f64,
    /// `None` when a rate sits on the boundary.
    pub beta: Option<f64>,
    pub psi: Option<f64>,
}

impl ParamSample {
    pub fn from_rates(p: ProportionPair) -> Self {
        let dc = proportions_to_diff(p);
        let lc = proportions_to_logit(p).ok();
        ParamSample {
            theta1: p.theta1,
            theta2: p.theta2,
            eta: dc.eta,
            zeta: dc.zeta,
            beta: lc.map(|c| c.beta),
            psi: lc.map(|c| c.psi),
        }
    }

    /// Keeps the exact log odds rather than recomputing them from rates that
    /// may have rounded to 0 or 1.
    pub fn from_logit(c: LogitCoords) -> Self {
        let p = logit_to_proportions(c);
        let dc = proportions_to_diff(p);
        ParamSample {
            theta1: p.theta1,
            theta2: p.theta2,
            eta: dc.eta,
            zeta: dc.zeta,
            beta: Some(c.beta),
            psi: Some(c.psi),
        }
    }

    pub fn rates(&self) -> ProportionPair {
        ProportionPair { theta1: self.theta1, theta2: self.theta2 }
    }
}

pub(crate) fn sample_beta_prior<R: Rng + ?Sized>(p: &LtParams, rng: &mut R) -> f64 {
    match p.beta_prior {
        BetaPrior::Gaussian => p.sigma_beta * rng.sample::<f64, _>(StandardNormal),
        BetaPrior::Logistic => {
            let u: f64 = rng.gen_range(f64::EPSILON..1.0);
            p.sigma_beta * (u.ln() - (-u).ln_1p())
        }
    }
}

/// A single prior draw under `hypothesis`.
pub fn draw_prior<R: Rng + ?Sized>(cfg: &PriorConfig, hypothesis: Hypothesis, rng: &mut R) -> Result<ParamSample> {
    Ok(match cfg {
        PriorConfig::Ib { a } => {
            let b = Beta::new(*a, *a).map_err(|e| Error::Config(e.to_string()))?;
            match hypothesis {
                Hypothesis::H0 => {
                    let t = b.sample(rng);
                    ParamSample::from_rates(ProportionPair { theta1: t, theta2: t })
                }
                Hypothesis::H1 => {
                    let t1 = b.sample(rng);
                    let t2 = b.sample(rng);
                    ParamSample::from_rates(ProportionPair { theta1: t1, theta2: t2 })
                }
            }
        }
        PriorConfig::Lt(p) => {
            let beta = sample_beta_prior(p, rng);
            let psi = match hypothesis {
                Hypothesis::H0 => 0.0,
                Hypothesis::H1 => p.sigma_psi * rng.sample::<f64, _>(StandardNormal),
            };
            ParamSample::from_logit(LogitCoords { beta, psi })
        }
        PriorConfig::DepIb(p) => {
            let (pe, pz) = depib_priors(p)?;
            let eta = match hypothesis {
                Hypothesis::H0 => 0.0,
                Hypothesis::H1 => pe.sample(rng),
            };
            ParamSample::from_rates(clamped_rates(eta, pz.sample(rng)))
        }
    })
}

/// Seeded stream of independent prior draws.
pub struct PriorDraws {
    cfg: PriorConfig,
    hypothesis: Hypothesis,
    rng: ChaCha8Rng,
    remaining: usize,
}

impl Iterator for PriorDraws {
    type Item = ParamSample;

    fn next(&mut self) -> Option<ParamSample> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        // The config was validated when the stream was built.
        draw_prior(&self.cfg, self.hypothesis, &mut self.rng).ok()
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        (self.remaining, Some(self.remaining))
    }
}

impl ExactSizeIterator for PriorDraws {}

pub fn sample_prior(cfg: &PriorConfig, hypothesis: Hypothesis, n_draws: usize, seed: u64) -> Result<PriorDraws> {
    cfg.validate()?;
    if n_draws == 0 {
        return Err(Error::Validation { field: "n_draws", reason: "must be at least 1".into() });
    }
    Ok(PriorDraws {
        cfg: *cfg,
        hypothesis,
        rng: ChaCha8Rng::seed_from_u64(seed),
        remaining: n_draws,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityFlag {
    /// Values are a Monte Carlo histogram; see `mc_std_error`.
    MonteCarlo,
    /// The prior puts point masses on the boundary that the grid omits.
    PointMassesExcluded,
}

/// Density values on a rectilinear grid. 1D grids have an empty `y_axis`;
/// 2D values are row-major with `x` varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub x_axis: Vec<f64>,
    pub y_axis: Vec<f64>,
    pub values: Vec<f64>,
    /// Constant the unnormalized density was divided by (1 for normalized
    /// closed forms).
    pub normalization: f64,
    pub flags: Vec<DensityFlag>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc_std_error: Option<Vec<f64>>,
}

impl DensityGrid {
    fn one_d(x_axis: Vec<f64>, values: Vec<f64>, normalization: f64) -> Self {
        DensityGrid { x_axis, y_axis: Vec::new(), values, normalization, flags: Vec::new(), mc_std_error: None }
    }

    pub fn is_2d(&self) -> bool {
        !self.y_axis.is_empty()
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.x_axis.len() + i]
    }

    /// Trapezoid-rule integral over the grid.
    pub fn trapezoid_integral(&self) -> f64 {
        if !self.is_2d() {
            return trapezoid(&self.x_axis, &self.values);
        }
        let nx = self.x_axis.len();
        let rows: Vec<f64> = (0..self.y_axis.len())
            .map(|j| trapezoid(&self.x_axis, &self.values[j * nx..(j + 1) * nx]))
            .collect();
        trapezoid(&self.y_axis, &rows)
    }

    /// Row at fixed `x_axis[i]` as a function of `y`.
    pub fn column(&self, i: usize) -> Vec<f64> {
        (0..self.y_axis.len()).map(|j| self.at(i, j)).collect()
    }
}

pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}

fn lt_log_prior(beta: f64, psi: f64, p: &LtParams) -> f64 {
    let lb = match p.beta_prior {
        BetaPrior::Gaussian => log_density_gaussian(beta, p.sigma_beta),
        BetaPrior::Logistic => log_density_logistic(beta, p.sigma_beta),
    };
    lb + log_density_gaussian(psi, p.sigma_psi)
}

/// LT prior density of interior rates `(θ₁, θ₂)`.
pub fn lt_log_density_rates(theta1: f64, theta2: f64, p: &LtParams) -> f64 {
    if !(theta1 > 0.0 && theta1 < 1.0 && theta2 > 0.0 && theta2 < 1.0) {
        return f64::NEG_INFINITY;
    }
    let (l1, l2) = (logit(theta1), logit(theta2));
    lt_log_prior(0.5 * (l1 + l2), l2 - l1, p)
        - (theta1.ln() + (-theta1).ln_1p())
        - (theta2.ln() + (-theta2).ln_1p())
}

fn quad(f: impl FnMut(f64) -> f64, a: f64, b: f64, breaks: &[f64]) -> Result<f64> {
    Ok(integrate_with_breaks(f, a, b, breaks, &QuadOptions::rel(1e-10))?.value)
}

/// LT density of the log odds of group 1 (`which = 1`) or group 2.
fn lt_logodds_density(l: f64, which: u8, p: &LtParams) -> Result<f64> {
    let sign = if which == 1 { 1.0 } else { -1.0 };
    let r = 12.0 * p.sigma_psi;
    quad(|psi| lt_log_prior(l + sign * 0.5 * psi, psi, p).exp(), -r, r, &[0.0, 2.0 * l * sign])
}

fn check_grid(grid: &[f64], lo: f64, hi: f64, name: &str) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Validation { field: "grid", reason: "empty".into() });
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Validation { field: "grid", reason: "must be strictly increasing".into() });
    }
    if grid.iter().any(|x| !(x.is_finite() && *x >= lo && *x <= hi)) {
        return Err(Error::Domain(format!("{name} grid must lie within [{lo}, {hi}]")));
    }
    Ok(())
}

/// Prior density of `θ₂` given `θ₁` under `H1`.
pub fn conditional_theta2_density(cfg: &PriorConfig, theta1: f64, grid: &[f64]) -> Result<DensityGrid> {
    cfg.validate()?;
    check_grid(grid, 0.0, 1.0, "theta2")?;
    match cfg {
        PriorConfig::Ib { a } => {
            let v = grid.iter().map(|&t| log_density_beta(t, *a).exp()).collect();
            Ok(DensityGrid::one_d(grid.to_vec(), v, 1.0))
        }
        PriorConfig::Lt(p) => {
            if !(theta1 > 0.0 && theta1 < 1.0) {
                return Err(Error::Domain(format!("theta1 = {theta1} must be interior")));
            }
            let norm = lt_logodds_density(logit(theta1), 1, p)? / (theta1 * (1.0 - theta1));
            let v = grid
                .iter()
                .map(|&t| lt_log_density_rates(theta1, t, p).exp() / norm)
                .collect();
            Ok(DensityGrid::one_d(grid.to_vec(), v, norm))
        }
        PriorConfig::DepIb(_) => Err(Error::Unsupported(
            "conditional density under the dependent IB prior (clamping creates point masses)".into(),
        )),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Eta,
    Psi,
    Theta1,
    Theta2,
}

fn psi_histogram(a: f64, grid: &[f64]) -> Result<DensityGrid> {
    let (lo, hi) = if grid.len() == 1 {
        (grid[0] - 0.5, grid[0] + 0.5)
    } else {
        let h = (grid[grid.len() - 1] - grid[0]) / (grid.len() - 1) as f64;
        (grid[0] - 0.5 * h, grid[grid.len() - 1] + 0.5 * h)
    };
    let width = (hi - lo) / PSI_HISTOGRAM_BINS as f64;
    let b = Beta::new(a, a).map_err(|e| Error::Config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(PSI_HISTOGRAM_SEED);
    let mut counts = vec![0u64; PSI_HISTOGRAM_BINS];
    for _ in 0..PSI_HISTOGRAM_DRAWS {
        let (t1, t2): (f64, f64) = (b.sample(&mut rng), b.sample(&mut rng));
        let psi = logit(t2) - logit(t1);
        let k = ((psi - lo) / width).floor();
        if k >= 0.0 && (k as usize) < PSI_HISTOGRAM_BINS {
            counts[k as usize] += 1;
        }
    }
    let scale = 1.0 / (PSI_HISTOGRAM_DRAWS as f64 * width);
    let bin = |x: f64| (((x - lo) / width).floor() as usize).min(PSI_HISTOGRAM_BINS - 1);
    let values = grid.iter().map(|&x| counts[bin(x)] as f64 * scale).collect();
    let se = grid.iter().map(|&x| (counts[bin(x)] as f64).sqrt() * scale).collect();
    let mut g = DensityGrid::one_d(grid.to_vec(), values, 1.0);
    g.flags.push(DensityFlag::MonteCarlo);
    g.mc_std_error = Some(se);
    Ok(g)
}

/// Marginal prior density of one quantity under `H1`.
pub fn marginal_density(cfg: &PriorConfig, quantity: Quantity, grid: &[f64]) -> Result<DensityGrid> {
    cfg.validate()?;
    match quantity {
        Quantity::Eta => check_grid(grid, -1.0, 1.0, "eta")?,
        Quantity::Theta1 | Quantity::Theta2 => check_grid(grid, 0.0, 1.0, "theta")?,
        Quantity::Psi => check_grid(grid, f64::MIN, f64::MAX, "psi")?,
    }
    match (cfg, quantity) {
        (PriorConfig::Ib { a }, Quantity::Eta) => {
            let v = grid.iter().map(|&e| Ok(eta_density_ib(e, *a)?.value)).collect::<Result<_>>()?;
            Ok(DensityGrid::one_d(grid.to_vec(), v, 1.0))
        }
        (PriorConfig::Ib { a }, Quantity::Psi) => {
            if *a == 1.0 {
                let v = grid.iter().map(|&s| psi_density_ib_a1(s).value).collect();
                Ok(DensityGrid::one_d(grid.to_vec(), v, 1.0))
            } else {
                psi_histogram(*a, grid)
            }
        }
        (PriorConfig::Ib { a }, Quantity::Theta1 | Quantity::Theta2) => {
            let v = grid.iter().map(|&t| log_density_beta(t, *a).exp()).collect();
            Ok(DensityGrid::one_d(grid.to_vec(), v, 1.0))
        }
        (PriorConfig::Lt(p), Quantity::Psi) => {
            let v = grid.iter().map(|&s| log_density_gaussian(s, p.sigma_psi).exp()).collect();
            Ok(DensityGrid::one_d(grid.to_vec(), v, 1.0))
        }
        (PriorConfig::Lt(p), Quantity::Theta1 | Quantity::Theta2) => {
            let which = if quantity == Quantity::Theta1 { 1 } else { 2 };
            let v = grid
                .iter()
                .map(|&t| {
                    if t <= 0.0 || t >= 1.0 {
                        return Ok(0.0);
                    }
                    Ok(lt_logodds_density(logit(t), which, p)? / (t * (1.0 - t)))
                })
                .collect::<Result<_>>()?;
            Ok(DensityGrid::one_d(grid.to_vec(), v, 1.0))
        }
        (PriorConfig::Lt(p), Quantity::Eta) => {
            let v = grid
                .iter()
                .map(|&e| {
                    let (lo, hi) = ((-e).max(0.0), (1.0 - e).min(1.0));
                    if !(lo < hi) {
                        return Ok(0.0);
                    }
                    let mid = 0.5 * (lo + hi);
                    quad(|t| lt_log_density_rates(t, t + e, p).exp(), lo, hi, &[mid])
                })
                .collect::<Result<_>>()?;
            Ok(DensityGrid::one_d(grid.to_vec(), v, 1.0))
        }
        (PriorConfig::DepIb(_), q) => Err(Error::Unsupported(format!(
            "marginal density of {q:?} under the dependent IB prior (clamping creates point masses)"
        ))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointCoords {
    Theta1Theta2,
    Theta1Eta,
    Theta1Psi,
}

fn inset_axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let h = (hi - lo) / n as f64;
    (0..n).map(|i| lo + (i as f64 + 0.5) * h).collect()
}

/// Joint prior density of `θ₁` (x axis) and a second coordinate (y axis)
/// under `H1`, on a half-cell inset grid.
pub fn joint_density_grid(cfg: &PriorConfig, coords: JointCoords, resolution: usize) -> Result<DensityGrid> {
    cfg.validate()?;
    if resolution < MIN_JOINT_RESOLUTION {
        return Err(Error::Validation {
            field: "resolution",
            reason: format!("{resolution} < {MIN_JOINT_RESOLUTION}"),
        });
    }
    let x = inset_axis(0.0, 1.0, resolution);
    let y = match coords {
        JointCoords::Theta1Theta2 => inset_axis(0.0, 1.0, resolution),
        JointCoords::Theta1Eta => inset_axis(-1.0, 1.0, resolution),
        JointCoords::Theta1Psi => inset_axis(-PSI_GRID_HALF_WIDTH, PSI_GRID_HALF_WIDTH, resolution),
    };
    // Log density of interior (θ₁, θ₂) under H1.
    let dep = match cfg {
        PriorConfig::DepIb(p) => Some(depib_priors(p)?),
        _ => None,
    };
    let log_rates = |t1: f64, t2: f64| -> f64 {
        if !(t1 > 0.0 && t1 < 1.0 && t2 > 0.0 && t2 < 1.0) {
            return f64::NEG_INFINITY;
        }
        match cfg {
            PriorConfig::Ib { a } => log_density_beta(t1, *a) + log_density_beta(t2, *a),
            PriorConfig::Lt(p) => lt_log_density_rates(t1, t2, p),
            PriorConfig::DepIb(_) => {
                let (pe, pz): &(TruncatedNormal, TruncatedNormal) = dep.as_ref().expect("dep-IB priors");
                pe.log_pdf(t2 - t1) + pz.log_pdf(0.5 * (t1 + t2))
            }
        }
    };
    let mut values = Vec::with_capacity(x.len() * y.len());
    for &v in &y {
        for &t1 in &x {
            let d = match coords {
                JointCoords::Theta1Theta2 => log_rates(t1, v).exp(),
                JointCoords::Theta1Eta => log_rates(t1, t1 + v).exp(),
                JointCoords::Theta1Psi => {
                    let t2 = logistic(logit(t1) + v);
                    (log_rates(t1, t2) + t2.ln() + (-t2).ln_1p()).exp()
                }
            };
            values.push(d);
        }
    }
    let mut g = DensityGrid { x_axis: x, y_axis: y, values, normalization: 1.0, flags: Vec::new(), mc_std_error: None };
    if matches!(cfg, PriorConfig::DepIb(_)) {
        g.flags.push(DensityFlag::PointMassesExcluded);
    }
    Ok(g)
}

/// Pearson correlation of `(θ₁, θ₂)` under `H1` from a seeded sample.
pub fn prior_correlation(cfg: &PriorConfig, n_draws: usize, seed: u64) -> Result<f64> {
    if let PriorConfig::DepIb(p) = cfg {
        return prior_correlation_depib(p, n_draws, seed);
    }
    if n_draws < crate::depib::MIN_CORRELATION_DRAWS {
        return Err(Error::Validation {
            field: "n_draws",
            reason: format!("{n_draws} < {}", crate::depib::MIN_CORRELATION_DRAWS),
        });
    }
    let (mut m1, mut m2, mut s11, mut s22, mut s12) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (k, s) in sample_prior(cfg, Hypothesis::H1, n_draws, seed)?.enumerate() {
        let kf = (k + 1) as f64;
        let (d1, d2) = (s.theta1 - m1, s.theta2 - m2);
        m1 += d1 / kf;
        m2 += d2 / kf;
        s11 += d1 * (s.theta1 - m1);
        s22 += d2 * (s.theta2 - m2);
        s12 += d1 * (s.theta2 - m2);
    }
    Ok(s12 / (s11 * s22).sqrt())
}

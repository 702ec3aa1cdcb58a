//! Posterior summaries of the log odds ratio `ψ` and the rate difference `η`.
//!
//! Both are group 2 minus group 1.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lt::{find_mode_and_scale, log_integrand_h1_lt, log_ml_h1_lt_refined};
use crate::model::{
    logit_to_proportions, validate_data, validate_ib_a, Hypothesis, LogitCoords, LtParams, ProportionPair,
    TwoByTwoData,
};
use crate::priors::{trapezoid, DensityGrid, ParamSample, Quantity};

/// Draws needed by [`summarize_posterior`].
pub const MIN_SUMMARY_DRAWS: usize = 100_000;
/// Grid half width in posterior standard deviations.
pub const GRID_HALF_WIDTH_SD: f64 = 8.0;
/// Edges are pushed out until the log density there is this far below the peak.
const EDGE_LOG_DROP: f64 = 30.0;
const MIN_GRID_RESOLUTION: usize = 33;

/// Independent conjugate draws `θᵢ ~ Beta(a + yᵢ, a + nᵢ − yᵢ)`.
pub fn posterior_draws_ib(d: &TwoByTwoData, a: f64, n_draws: usize, seed: u64) -> Result<Vec<ParamSample>> {
    validate_data(*d)?;
    validate_ib_a(a)?;
    let b1 = Beta::new(a + d.y1 as f64, a + (d.n1 - d.y1) as f64).map_err(|e| Error::Config(e.to_string()))?;
    let b2 = Beta::new(a + d.y2 as f64, a + (d.n2 - d.y2) as f64).map_err(|e| Error::Config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n_draws)
        .map(|_| {
            let (t1, t2) = (b1.sample(&mut rng), b2.sample(&mut rng));
            ParamSample::from_rates(ProportionPair { theta1: t1, theta2: t2 })
        })
        .collect())
}

/// Normalized LT posterior on an axis-aligned `(β, ψ)` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LtPosteriorGrid {
    /// `x_axis` is `β`, `y_axis` is `ψ`.
    pub grid: DensityGrid,
    /// `ln` of the trapezoid integral of the unnormalized posterior, an
    /// estimate of `ln p(D | H1)`.
    pub log_normalization: f64,
    pub params: LtParams,
}

fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

pub fn posterior_grid_lt(d: &TwoByTwoData, sigma_beta: f64, sigma_psi: f64, resolution: usize) -> Result<LtPosteriorGrid> {
    posterior_grid_lt_with(d, &LtParams::new(sigma_beta, sigma_psi)?, resolution)
}

pub fn posterior_grid_lt_with(d: &TwoByTwoData, params: &LtParams, resolution: usize) -> Result<LtPosteriorGrid> {
    if resolution < MIN_GRID_RESOLUTION {
        return Err(Error::Validation {
            field: "resolution",
            reason: format!("{resolution} < {MIN_GRID_RESOLUTION}"),
        });
    }
    let spec = find_mode_and_scale(d, Hypothesis::H1, params)?;
    let f = |b: f64, p: f64| log_integrand_h1_lt(d, b, p, params);
    let (mb, mp) = (spec.mode.beta, spec.mode.psi);
    let peak = f(mb, mp);
    let (sb, sp) = (spec.scale[0][0].sqrt(), spec.scale[1][1].sqrt());
    let mut lo = [mb - GRID_HALF_WIDTH_SD * sb, mp - GRID_HALF_WIDTH_SD * sp];
    let mut hi = [mb + GRID_HALF_WIDTH_SD * sb, mp + GRID_HALF_WIDTH_SD * sp];
    // Skewed posteriors need more room on one side.
    for _ in 0..60 {
        let probe = |fixed_axis: usize, at: f64, lo_o: f64, hi_o: f64| {
            axis(lo_o, hi_o, 65)
                .into_iter()
                .map(|o| if fixed_axis == 0 { f(at, o) } else { f(o, at) })
                .fold(f64::NEG_INFINITY, f64::max)
        };
        let mut grew = false;
        for k in 0..2 {
            let o = 1 - k;
            let width = hi[k] - lo[k];
            if probe(k, lo[k], lo[o], hi[o]) > peak - EDGE_LOG_DROP {
                lo[k] -= 0.25 * width;
                grew = true;
            }
            if probe(k, hi[k], lo[o], hi[o]) > peak - EDGE_LOG_DROP {
                hi[k] += 0.25 * width;
                grew = true;
            }
        }
        if !grew {
            break;
        }
    }
    let xb = axis(lo[0], hi[0], resolution);
    let yp = axis(lo[1], hi[1], resolution);
    let mut logs = Vec::with_capacity(resolution * resolution);
    for &p in &yp {
        for &b in &xb {
            logs.push(f(b, p) - peak);
        }
    }
    let mut grid = DensityGrid {
        x_axis: xb,
        y_axis: yp,
        values: logs.iter().map(|l| l.exp()).collect(),
        normalization: 1.0,
        flags: Vec::new(),
        mc_std_error: None,
    };
    let z = grid.trapezoid_integral();
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::numerical("posterior grid integral is not positive"));
    }
    for v in &mut grid.values {
        *v /= z;
    }
    grid.normalization = z;
    Ok(LtPosteriorGrid { grid, log_normalization: z.ln() + peak, params: *params })
}

impl LtPosteriorGrid {
    /// Marginal posterior density of `ψ` at the grid's `ψ` nodes.
    pub fn psi_marginal(&self) -> Vec<f64> {
        let nx = self.grid.x_axis.len();
        (0..self.grid.y_axis.len())
            .map(|j| trapezoid(&self.grid.x_axis, &self.grid.values[j * nx..(j + 1) * nx]))
            .collect()
    }

    /// Marginal posterior density of `ψ` at any `psi`, integrating the
    /// normalized posterior along the grid's `β` axis.
    pub fn psi_density_at(&self, d: &TwoByTwoData, psi: f64) -> f64 {
        let shift = self.log_normalization;
        let row: Vec<f64> = self
            .grid
            .x_axis
            .iter()
            .map(|&b| (log_integrand_h1_lt(d, b, psi, &self.params) - shift).exp())
            .collect();
        trapezoid(&self.grid.x_axis, &row)
    }

    /// Grid nodes as weighted points (weights sum to 1).
    fn weighted_nodes(&self) -> Vec<(LogitCoords, f64)> {
        let (xs, ys) = (&self.grid.x_axis, &self.grid.y_axis);
        let tw = |v: &[f64], i: usize| {
            let left = if i > 0 { v[i] - v[i - 1] } else { 0.0 };
            let right = if i + 1 < v.len() { v[i + 1] - v[i] } else { 0.0 };
            0.5 * (left + right)
        };
        let mut out = Vec::with_capacity(xs.len() * ys.len());
        for (j, &p) in ys.iter().enumerate() {
            for (i, &b) in xs.iter().enumerate() {
                out.push((LogitCoords { beta: b, psi: p }, self.grid.at(i, j) * tw(xs, i) * tw(ys, j)));
            }
        }
        let total: f64 = out.iter().map(|t| t.1).sum();
        for t in &mut out {
            t.1 /= total;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub quantity: Quantity,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Zero for grid summaries.
    pub n_draws: usize,
    /// Monte Carlo standard error of `mean`; zero for grid summaries.
    pub mc_se: f64,
}

pub enum PosteriorSource<'a> {
    Draws(&'a [ParamSample]),
    Grid(&'a LtPosteriorGrid),
}

fn quantity_of(s: &ParamSample, q: Quantity) -> f64 {
    match q {
        Quantity::Eta => s.eta,
        Quantity::Psi => s.psi.unwrap_or_else(|| crate::model::logit(s.theta2) - crate::model::logit(s.theta1)),
        Quantity::Theta1 => s.theta1,
        Quantity::Theta2 => s.theta2,
    }
}

fn quantity_of_logit(c: LogitCoords, q: Quantity) -> f64 {
    match q {
        Quantity::Psi => c.psi,
        _ => {
            let p = logit_to_proportions(c);
            match q {
                Quantity::Eta => p.theta2 - p.theta1,
                Quantity::Theta1 => p.theta1,
                _ => p.theta2,
            }
        }
    }
}

fn sample_quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let (i, frac) = (h.floor() as usize, h - h.floor());
    if i + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    sorted[i] + frac * (sorted[i + 1] - sorted[i])
}

fn weighted_quantile(sorted: &[(f64, f64)], p: f64) -> f64 {
    let mut acc = 0.0;
    for (k, &(x, w)) in sorted.iter().enumerate() {
        let next = acc + w;
        if next >= p {
            if k == 0 || w == 0.0 {
                return x;
            }
            let prev = sorted[k - 1].0;
            return prev + (x - prev) * ((p - acc) / w);
        }
        acc = next;
    }
    sorted[sorted.len() - 1].0
}

/// Inverts a piecewise-linear CDF built from density values on `x`.
fn cdf_quantile(x: &[f64], density: &[f64], p: f64) -> f64 {
    let mut cdf = vec![0.0];
    for k in 1..x.len() {
        cdf.push(cdf[k - 1] + 0.5 * (x[k] - x[k - 1]) * (density[k] + density[k - 1]));
    }
    let total = cdf[cdf.len() - 1];
    let target = p * total;
    let k = cdf.partition_point(|&c| c < target).clamp(1, x.len() - 1);
    let (c0, c1) = (cdf[k - 1], cdf[k]);
    if c1 == c0 {
        return x[k];
    }
    x[k - 1] + (x[k] - x[k - 1]) * (target - c0) / (c1 - c0)
}

/// Mean and central 95% interval of `quantity`.
pub fn summarize_posterior(source: PosteriorSource<'_>, quantity: Quantity) -> Result<PosteriorSummary> {
    let s = match source {
        PosteriorSource::Draws(draws) => {
            if draws.len() < MIN_SUMMARY_DRAWS {
                return Err(Error::Precision(format!(
                    "{} draws < {MIN_SUMMARY_DRAWS} needed for a stable 95% interval",
                    draws.len()
                )));
            }
            let mut xs: Vec<f64> = draws.iter().map(|s| quantity_of(s, quantity)).collect();
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
            xs.sort_by(f64::total_cmp);
            PosteriorSummary {
                quantity,
                mean,
                ci_low: sample_quantile(&xs, 0.025),
                ci_high: sample_quantile(&xs, 0.975),
                n_draws: draws.len(),
                mc_se: (var / n).sqrt(),
            }
        }
        PosteriorSource::Grid(g) => {
            if quantity == Quantity::Psi {
                let m = g.psi_marginal();
                let ys = &g.grid.y_axis;
                let z = trapezoid(ys, &m);
                let xm: Vec<f64> = ys.iter().zip(&m).map(|(y, v)| y * v).collect();
                PosteriorSummary {
                    quantity,
                    mean: trapezoid(ys, &xm) / z,
                    ci_low: cdf_quantile(ys, &m, 0.025),
                    ci_high: cdf_quantile(ys, &m, 0.975),
                    n_draws: 0,
                    mc_se: 0.0,
                }
            } else {
                let mut pts: Vec<(f64, f64)> = g
                    .weighted_nodes()
                    .into_iter()
                    .map(|(c, w)| (quantity_of_logit(c, quantity), w))
                    .collect();
                let mean = pts.iter().map(|(x, w)| x * w).sum();
                pts.sort_by(|a, b| a.0.total_cmp(&b.0));
                PosteriorSummary {
                    quantity,
                    mean,
                    ci_low: weighted_quantile(&pts, 0.025),
                    ci_high: weighted_quantile(&pts, 0.975),
                    n_draws: 0,
                    mc_se: 0.0,
                }
            }
        }
    };
    if !(s.ci_low < s.ci_high) {
        return Err(Error::Precision(format!(
            "degenerate interval [{}, {}]",
            s.ci_low, s.ci_high
        )));
    }
    Ok(s)
}

/// Absolute gap between the grid's log normalization and the quadrature `ln p(D | H1)`.
pub fn grid_normalization_gap(d: &TwoByTwoData, g: &LtPosteriorGrid) -> Result<f64> {
    let q = log_ml_h1_lt_refined(d, &g.params)?.log_value;
    Ok((g.log_normalization - q).abs())
}

/// `ln` of the posterior density of `ψ` at 0 over the prior density at 0.
pub fn savage_dickey_log_bf01(d: &TwoByTwoData, g: &LtPosteriorGrid) -> f64 {
    let post = g.psi_density_at(d, 0.0);
    let prior = crate::special::log_density_gaussian(0.0, g.params.sigma_psi);
    post.ln() - prior
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lt::bf01_lt;
    use rand::Rng;

    fn d(y1: u64, n1: u64, y2: u64, n2: u64) -> TwoByTwoData {
        TwoByTwoData::new(y1, n1, y2, n2).unwrap()
    }

    const MAGEE: (u64, u64, u64, u64) = (15, 493, 13, 488);

    fn magee() -> TwoByTwoData {
        d(MAGEE.0, MAGEE.1, MAGEE.2, MAGEE.3)
    }

    #[test]
    fn ib_draw_means() {
        let data = magee();
        let draws = posterior_draws_ib(&data, 1.0, 200_000, 1).unwrap();
        let n = draws.len() as f64;
        let m1 = draws.iter().map(|s| s.theta1).sum::<f64>() / n;
        let exact: f64 = 16.0 / 495.0;
        let sd = (exact * (1.0 - exact) / 496.0).sqrt();
        assert!((m1 - exact).abs() < 3.0 * sd / n.sqrt());
        let eta = summarize_posterior(PosteriorSource::Draws(&draws), Quantity::Eta).unwrap();
        assert!((eta.mean - (14.0 / 490.0 - 16.0 / 495.0)).abs() < 3.0 * eta.mc_se);
        assert!(draws.iter().all(|s| s.psi.is_some_and(f64::is_finite)));
        assert_eq!(draws, posterior_draws_ib(&data, 1.0, 200_000, 1).unwrap());
    }

    #[test]
    fn too_few_draws() {
        let draws = posterior_draws_ib(&magee(), 1.0, 1000, 1).unwrap();
        assert!(matches!(
            summarize_posterior(PosteriorSource::Draws(&draws), Quantity::Psi),
            Err(Error::Precision(_))
        ));
    }

    #[test]
    fn symmetric_grid() {
        let data = d(50, 100, 50, 100);
        let g = posterior_grid_lt(&data, 1.0, 1.0, 201).unwrap();
        let s = summarize_posterior(PosteriorSource::Grid(&g), Quantity::Psi).unwrap();
        assert!(s.mean.abs() < 1e-6);
        let e = summarize_posterior(PosteriorSource::Grid(&g), Quantity::Eta).unwrap();
        assert!(e.mean.abs() < 1e-6);
        let draws = posterior_draws_ib(&data, 1.0, 200_000, 2).unwrap();
        let e = summarize_posterior(PosteriorSource::Draws(&draws), Quantity::Eta).unwrap();
        assert!(e.mean.abs() < 3.0 * e.mc_se);
    }

    #[test]
    fn normalization_matches_quadrature() {
        let data = magee();
        let g = posterior_grid_lt(&data, 1.0, 1.0, 301).unwrap();
        assert!(grid_normalization_gap(&data, &g).unwrap() < 1e-6);
        assert!((g.grid.trapezoid_integral() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn aspirin_direction() {
        let data = d(26, 11034, 10, 11037);
        let g = posterior_grid_lt(&data, 1.0, 1.0, 301).unwrap();
        let m = g.psi_marginal();
        let ys = &g.grid.y_axis;
        let neg: Vec<f64> = ys.iter().zip(&m).map(|(y, v)| if *y < 0.0 { *v } else { 0.0 }).collect();
        assert!(trapezoid(ys, &neg) > 0.97);
    }

    #[test]
    fn savage_dickey_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..10 {
            let n1 = rng.gen_range(5..=200);
            let n2 = rng.gen_range(5..=200);
            let data = d(rng.gen_range(0..=n1), n1, rng.gen_range(0..=n2), n2);
            let g = posterior_grid_lt(&data, 1.0, 1.0, 201).unwrap();
            let sd = savage_dickey_log_bf01(&data, &g);
            let bf = bf01_lt(&data, 1.0, 1.0).unwrap().log_bf01;
            assert!(((sd - bf).exp() - 1.0).abs() < 0.02, "{data:?}: {sd} vs {bf}");
        }
    }

    #[test]
    fn magee_summaries() {
        let data = magee();
        let g = posterior_grid_lt(&data, 1.0, 1.0, 301).unwrap();
        let lt = summarize_posterior(PosteriorSource::Grid(&g), Quantity::Psi).unwrap();
        let draws = posterior_draws_ib(&data, 1.0, 400_000, 3).unwrap();
        let ib = summarize_posterior(PosteriorSource::Draws(&draws), Quantity::Psi).unwrap();
        assert!((lt.mean - ib.mean).abs() < 0.1, "{lt:?} {ib:?}");
        // Frequentist odds ratio of group 1 to group 2: 1.14 (0.53, 2.45).
        for s in [lt, ib] {
            assert!((-s.ci_high - 0.53f64.ln()).abs() < 0.15, "{s:?}");
            assert!((-s.ci_low - 2.45f64.ln()).abs() < 0.15, "{s:?}");
            assert!(s.ci_low < -(1.14f64.ln()) && -(1.14f64.ln()) < s.ci_high);
        }
    }

    #[test]
    fn prior_insensitivity() {
        let data = magee();
        let mut means = Vec::new();
        for a in [1.0, 2.0] {
            let draws = posterior_draws_ib(&data, a, 200_000, 4).unwrap();
            means.push(summarize_posterior(PosteriorSource::Draws(&draws), Quantity::Psi).unwrap().mean);
        }
        for s in [1.0, 2.0] {
            let g = posterior_grid_lt(&data, 1.0, s, 201).unwrap();
            means.push(summarize_posterior(PosteriorSource::Grid(&g), Quantity::Psi).unwrap().mean);
        }
        let (lo, hi) = means.iter().fold((f64::MAX, f64::MIN), |(l, h), &m| (l.min(m), h.max(m)));
        assert!(hi - lo < 0.05, "{means:?}");
    }

    #[test]
    fn quantiles_stable_under_doubling() {
        let data = magee();
        let a = posterior_draws_ib(&data, 1.0, 200_000, 5).unwrap();
        let b = posterior_draws_ib(&data, 1.0, 400_000, 6).unwrap();
        let sa = summarize_posterior(PosteriorSource::Draws(&a), Quantity::Psi).unwrap();
        let sb = summarize_posterior(PosteriorSource::Draws(&b), Quantity::Psi).unwrap();
        // Quantile SE is of the order of a few times the mean SE.
        let se = 4.0 * sa.mc_se.hypot(sb.mc_se);
        assert!((sa.ci_low - sb.ci_low).abs() < 3.0 * se);
        assert!((sa.ci_high - sb.ci_high).abs() < 3.0 * se);
    }
}

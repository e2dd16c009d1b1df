//! Bayesian estimation for the step-stress degradation model.
//!
//! A systematic-scan random-walk Metropolis-Hastings sampler explores the
//! posterior over the link-scale vector (a, b, c, d, sigma_x^2, sigma_y^2,
//! rho): independent zero-mean normal priors on the four regression
//! coefficients, Jeffreys priors on the two variances, and a uniform prior on
//! the correlation. The two variance coordinates move on the log scale
//! internally, with the Jacobian folded into the acceptance ratio, so no
//! proposal can cross the positivity boundary; recorded draws are always on
//! the natural scale. Proposal scales adapt during burn-in only, so the
//! post-burn-in kernel is a fixed, valid Metropolis kernel.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::likelihood::log_likelihood;
use crate::model::link_to_natural;
use crate::params::ThetaLink;
use crate::rng::StreamRng;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Column order used by chains, summaries, and CSV export.
pub const PARAMETER_NAMES: [&str; 7] = ["a", "b", "c", "d", "sigma_x2", "sigma_y2", "rho"];

/// Acceptance rate the burn-in adaptation steers toward.
const ADAPT_TARGET: f64 = 0.3;

/// Prior specification for the seven link-scale parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    /// Variance of the zero-mean normal priors on a, b, c, d.
    pub normal_variance: f64,
    /// Use the Jeffreys prior 1/sigma_x^2 (otherwise flat on sigma_x^2).
    pub jeffreys_sigma_x: bool,
    /// Use the Jeffreys prior 1/sigma_y^2 (otherwise flat on sigma_y^2).
    pub jeffreys_sigma_y: bool,
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig { normal_variance: 1e4, jeffreys_sigma_x: true, jeffreys_sigma_y: true }
    }
}

impl PriorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.normal_variance > 0.0) || !self.normal_variance.is_finite() {
            return Err(Error::Domain(format!(
                "coefficient prior variance must be positive and finite, got {}",
                self.normal_variance
            )));
        }
        Ok(())
    }
}

/// Sampler configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesConfig {
    /// Total number of sweeps, burn-in included.
    pub total: usize,
    /// Sweeps discarded from the front of the chain.
    pub burn_in: usize,
    pub prior: PriorConfig,
    /// Per-coordinate proposal standard deviations on the internal scale
    /// (log scale for the two variances). When absent, each scale starts at
    /// 1% of the magnitude of the initial coordinate, floored at 1e-4.
    pub proposal_scales: Option<Vec<f64>>,
    /// Adapt the proposal scales during burn-in.
    pub adapt: bool,
}

impl Default for BayesConfig {
    fn default() -> Self {
        BayesConfig {
            total: 50_000,
            burn_in: 10_000,
            prior: PriorConfig::default(),
            proposal_scales: None,
            adapt: true,
        }
    }
}

impl BayesConfig {
    pub fn validate(&self) -> Result<()> {
        self.prior.validate()?;
        if self.burn_in >= self.total {
            return Err(Error::Domain(format!(
                "burn-in {} must be shorter than the run length {}",
                self.burn_in, self.total
            )));
        }
        if let Some(scales) = &self.proposal_scales {
            if scales.len() != 7 {
                return Err(Error::Domain(format!(
                    "need 7 proposal scales, got {}",
                    scales.len()
                )));
            }
            if let Some(bad) = scales.iter().find(|s| !s.is_finite() || **s < 0.0) {
                return Err(Error::Domain(format!(
                    "proposal scales must be finite and nonnegative, got {bad}"
                )));
            }
        }
        Ok(())
    }
}

/// Kept draws of one sampler run, on the natural scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    /// One row per kept sweep, columns in [`PARAMETER_NAMES`] order.
    pub draws: Vec<[f64; 7]>,
    /// Accepted coordinate moves after burn-in.
    pub accepted: u64,
    /// Proposed coordinate moves after burn-in.
    pub proposed: u64,
    pub burn_in: usize,
    pub total: usize,
}

impl Chain {
    pub fn kept(&self) -> usize {
        self.draws.len()
    }

    /// Post-burn-in acceptance rate over coordinate moves.
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            return 0.0;
        }
        self.accepted as f64 / self.proposed as f64
    }

    /// One column of the chain.
    pub fn column(&self, index: usize) -> Vec<f64> {
        self.draws.iter().map(|row| row[index]).collect()
    }

    /// CSV export, one row per kept sweep, for external trace plotting.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.draws.len() * 64 + 64);
        out.push_str(&PARAMETER_NAMES.join(","));
        out.push('\n');
        for row in &self.draws {
            let mut first = true;
            for v in row {
                if !first {
                    out.push(',');
                }
                out.push_str(&format!("{v}"));
                first = false;
            }
            out.push('\n');
        }
        out
    }
}

/// Posterior location, spread, and quantile summary per parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub parameter_names: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Monte Carlo standard error of the mean, std/sqrt(kept draws).
    pub mc_error: Vec<f64>,
    pub q025: Vec<f64>,
    pub median: Vec<f64>,
    pub q975: Vec<f64>,
    pub kept: usize,
}

/// Log prior density of a link-scale parameter point, up to a constant in the
/// uniform factor; minus infinity outside the support.
pub fn log_prior(theta: &ThetaLink, config: &PriorConfig) -> f64 {
    if !(theta.sigma_x2 > 0.0)
        || !(theta.sigma_y2 > 0.0)
        || !(theta.rho > -1.0 && theta.rho < 1.0)
    {
        return f64::NEG_INFINITY;
    }
    let v = config.normal_variance;
    let mut lp = 0.0;
    for x in [theta.a, theta.b, theta.c, theta.d] {
        lp += -0.5 * (2.0 * std::f64::consts::PI * v).ln() - x * x / (2.0 * v);
    }
    if config.jeffreys_sigma_x {
        lp -= theta.sigma_x2.ln();
    }
    if config.jeffreys_sigma_y {
        lp -= theta.sigma_y2.ln();
    }
    lp
}

/// Internal coordinates: variances on the log scale, everything else natural.
fn to_internal(theta: &ThetaLink) -> [f64; 7] {
    [
        theta.a,
        theta.b,
        theta.c,
        theta.d,
        theta.sigma_x2.ln(),
        theta.sigma_y2.ln(),
        theta.rho,
    ]
}

fn from_internal(phi: &[f64]) -> Result<ThetaLink> {
    ThetaLink::new(phi[0], phi[1], phi[2], phi[3], phi[4].exp(), phi[5].exp(), phi[6])
}

/// Systematic-scan Metropolis-Hastings with per-coordinate Gaussian proposals.
///
/// Returns kept rows plus (accepted, proposed) post-burn-in coordinate-move
/// counts. `scales` is updated in place by the burn-in adaptation. The target
/// must return minus infinity (never NaN is required of callers here: NaN is
/// treated as a rejection) outside its support.
fn scan_chain<F: Fn(&[f64]) -> f64>(
    target: &F,
    init: &[f64],
    scales: &mut [f64],
    total: usize,
    burn_in: usize,
    adapt: bool,
    rng: &mut StreamRng,
) -> Result<(Vec<Vec<f64>>, u64, u64)> {
    assert_eq!(init.len(), scales.len(), "one proposal scale per coordinate");
    let dim = init.len();
    let mut current = init.to_vec();
    let mut cur_lp = target(&current);
    if !cur_lp.is_finite() {
        return Err(Error::Domain(
            "initial point has zero posterior density; pick a starting value inside the support"
                .into(),
        ));
    }
    let mut kept = Vec::with_capacity(total.saturating_sub(burn_in));
    let mut accepted: u64 = 0;
    let mut proposed: u64 = 0;
    // Per-coordinate proposal counters drive the Robbins-Monro step size.
    let mut adapt_steps = vec![0u64; dim];
    for sweep in 0..total {
        let in_burn_in = sweep < burn_in;
        for i in 0..dim {
            // Draw both variates unconditionally so the stream layout does not
            // depend on acceptance history.
            let z: f64 = rng.sample(StandardNormal);
            let u: f64 = rng.gen::<f64>();
            let mut proposal = current.clone();
            proposal[i] += scales[i] * z;
            let prop_lp = target(&proposal);
            let log_alpha = prop_lp - cur_lp;
            let accept = prop_lp.is_finite() && u.ln() < log_alpha;
            if accept {
                current = proposal;
                cur_lp = prop_lp;
            }
            if !in_burn_in {
                proposed += 1;
                if accept {
                    accepted += 1;
                }
            } else if adapt {
                adapt_steps[i] += 1;
                let gamma = (adapt_steps[i] as f64).powf(-0.6);
                let step = gamma * (if accept { 1.0 } else { 0.0 } - ADAPT_TARGET);
                // A zero scale stays zero, preserving the frozen-chain case.
                scales[i] *= step.exp();
                if scales[i] > 0.0 {
                    scales[i] = scales[i].clamp(1e-12, 1e6);
                }
            }
        }
        if !in_burn_in {
            kept.push(current.clone());
        }
    }
    Ok((kept, accepted, proposed))
}

/// Random-walk Metropolis-Hastings over the link-scale parameters.
///
/// The target is `log_prior + log_likelihood` (the likelihood evaluated after
/// mapping to the natural drift scale), plus the log-scale Jacobian for the
/// two variance coordinates. Runs are bitwise reproducible for a given seed.
pub fn rw_mh(ds: &Dataset, init: &ThetaLink, config: &BayesConfig, seed: u64) -> Result<Chain> {
    config.validate()?;
    init.validate()?;
    // Surface structural problems (wrong level count, bad plan) eagerly.
    let natural_init = link_to_natural(init, &ds.plan)?;
    log_likelihood(&natural_init, ds)?;

    let prior = config.prior.clone();
    let plan = ds.plan.clone();
    let target = move |phi: &[f64]| -> f64 {
        if !(phi[6] > -1.0 && phi[6] < 1.0) {
            return f64::NEG_INFINITY;
        }
        let theta = match from_internal(phi) {
            Ok(t) => t,
            Err(_) => return f64::NEG_INFINITY,
        };
        let lp = log_prior(&theta, &prior);
        if !lp.is_finite() {
            return f64::NEG_INFINITY;
        }
        let natural = match link_to_natural(&theta, &plan) {
            Ok(n) => n,
            Err(_) => return f64::NEG_INFINITY,
        };
        let ll = match log_likelihood(&natural, ds) {
            Ok(v) => v,
            Err(_) => return f64::NEG_INFINITY,
        };
        // Jacobian of the log-scale move for the two variances.
        lp + ll + phi[4] + phi[5]
    };

    let phi0 = to_internal(init);
    let mut scales = match &config.proposal_scales {
        Some(s) => s.clone(),
        None => phi0.iter().map(|v| (0.01 * v.abs()).max(1e-4)).collect(),
    };
    let mut rng = StreamRng::from_path(seed, &[0x626179_65]);
    let (kept, accepted, proposed) = scan_chain(
        &target,
        &phi0,
        &mut scales,
        config.total,
        config.burn_in,
        config.adapt,
        &mut rng,
    )?;
    let draws = kept
        .into_iter()
        .map(|phi| {
            [phi[0], phi[1], phi[2], phi[3], phi[4].exp(), phi[5].exp(), phi[6]]
        })
        .collect();
    Ok(Chain {
        draws,
        accepted,
        proposed,
        burn_in: config.burn_in,
        total: config.total,
    })
}

/// Quantile by linear interpolation of the order statistics of `sorted`.
fn interpolated_quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    assert!((0.0..=1.0).contains(&q), "quantile level must be in [0, 1]");
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = q * (n - 1) as f64;
    let lo = h.floor() as usize;
    if lo + 1 >= n {
        return sorted[n - 1];
    }
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
}

/// Per-parameter posterior summary over the kept draws.
pub fn summarize_chain(chain: &Chain) -> Result<PosteriorSummary> {
    let n = chain.kept();
    if n == 0 {
        return Err(Error::Domain("cannot summarize an empty chain".into()));
    }
    let mut mean = Vec::with_capacity(7);
    let mut std = Vec::with_capacity(7);
    let mut mc_error = Vec::with_capacity(7);
    let mut q025 = Vec::with_capacity(7);
    let mut median = Vec::with_capacity(7);
    let mut q975 = Vec::with_capacity(7);
    for j in 0..7 {
        let col = chain.column(j);
        let m = col.iter().sum::<f64>() / n as f64;
        let s = if n < 2 {
            0.0
        } else {
            (col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        let mut sorted = col;
        sorted.sort_by(f64::total_cmp);
        mean.push(m);
        std.push(s);
        mc_error.push(s / (n as f64).sqrt());
        q025.push(interpolated_quantile(&sorted, 0.025));
        median.push(interpolated_quantile(&sorted, 0.5));
        q975.push(interpolated_quantile(&sorted, 0.975));
    }
    Ok(PosteriorSummary {
        parameter_names: PARAMETER_NAMES.iter().map(|s| s.to_string()).collect(),
        mean,
        std,
        mc_error,
        q025,
        median,
        q975,
        kept: n,
    })
}

//! Sampling observations from the model.
//!
//! Simulation uses composition: first the outcome category (failure in one
//! of the stress pieces, or survival to the censoring time) is drawn from
//! the category masses, then the within-category values are drawn from the
//! corresponding conditional laws. Failure times come from inverting the
//! piecewise first passage cdf inside the selected piece, failure markers
//! from the conditional normal given the failure time, and censored markers
//! from the surviving degradation level by rejection followed by the
//! conditional normal given that level.
//!
//! A brute force path oracle is kept alongside the fast sampler: it walks
//! the correlated pair of processes step by step with a Brownian bridge
//! crossing check inside each step. The two routes describe the same law
//! on the first stress piece, which the tests exploit; after the first
//! change time the piecewise kernels used by the fast sampler are not the
//! law of the stepped process (see the model module notes), so agreement
//! is only asserted where it is owed.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Observation};
use crate::error::{Error, Result};
use crate::likelihood::{fit_mle, Parameterization};
use crate::model::{category_probabilities, ig_cdf, piece_kernels};
use crate::params::ThetaNatural;
use crate::plan::StressPlan;
use crate::rng::StreamRng;

/// Iteration cap for the rejection sampler of the surviving level.
const REJECTION_CAP: usize = 1_000_000;

/// A prepared sampler for one parameter set and plan.
///
/// Construction precomputes the category masses and the per piece cdf
/// bracket values so repeated draws stay cheap.
#[derive(Debug, Clone)]
pub struct Sampler {
    theta: ThetaNatural,
    plan: StressPlan,
    /// Masses of the m failure categories followed by survival.
    masses: Vec<f64>,
    /// (G_j(tau_{j-1}), G_j(tau_j)) for each piece j.
    piece_cdf: Vec<(f64, f64)>,
    /// Degradation and marker means at the censoring time.
    mean_x_c: f64,
    mean_y_c: f64,
}

impl Sampler {
    pub fn new(theta: &ThetaNatural, plan: &StressPlan) -> Result<Self> {
        theta.validate()?;
        plan.validate()?;
        if theta.mu_x.len() != plan.m() {
            return Err(Error::Theta(format!(
                "{} drift levels for a {} piece plan",
                theta.mu_x.len(),
                plan.m()
            )));
        }
        let masses = category_probabilities(theta, plan)?;
        let d = plan.threshold;
        let mut piece_cdf = Vec::with_capacity(plan.m());
        for j in 1..=plan.m() {
            let mu = theta.mu_x[j - 1];
            let lo = plan.boundary(j - 1);
            let hi = plan.boundary(j);
            let g_lo = if j == 1 { 0.0 } else { ig_cdf(lo, mu, theta.sigma_x2, d)? };
            let g_hi = ig_cdf(hi, mu, theta.sigma_x2, d)?;
            piece_cdf.push((g_lo, g_hi));
        }
        let at_c = piece_kernels(plan.censor_time, 0.0, theta, plan)?;
        Ok(Sampler {
            theta: theta.clone(),
            plan: plan.clone(),
            masses,
            piece_cdf,
            mean_x_c: at_c.mean_x,
            mean_y_c: at_c.mean_y,
        })
    }

    /// Category masses in the order piece 1, ..., piece m, survival.
    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    /// Draw one observation.
    pub fn draw(&self, rng: &mut StreamRng) -> Result<Observation> {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (idx, &mass) in self.masses.iter().enumerate() {
            acc += mass;
            if u < acc {
                return if idx < self.plan.m() {
                    self.draw_failure(idx + 1, rng)
                } else {
                    self.draw_censored(rng)
                };
            }
        }
        // Rounding can leave acc a hair below 1; the tail is survival.
        self.draw_censored(rng)
    }

    fn draw_failure(&self, piece: usize, rng: &mut StreamRng) -> Result<Observation> {
        let time = self.piece_time(piece, rng.gen())?;
        let kern = piece_kernels(time, 0.0, &self.theta, &self.plan)?;
        debug_assert_eq!(kern.piece, piece);
        let mean = kern.mean_y + self.theta.eta2() * kern.threshold_gap;
        let sd = (time * self.theta.sigma_y2 * self.theta.one_minus_rho2()).sqrt();
        let z: f64 = rng.sample(StandardNormal);
        Ok(Observation::Failed { piece, time, marker: mean + sd * z })
    }

    /// Invert the piece j failure time cdf at interior fraction `v`.
    fn piece_time(&self, piece: usize, v: f64) -> Result<f64> {
        let (g_lo, g_hi) = self.piece_cdf[piece - 1];
        let target = g_lo + v * (g_hi - g_lo);
        let mu = self.theta.mu_x[piece - 1];
        let d = self.plan.threshold;
        let mut lo = self.plan.boundary(piece - 1);
        let mut hi = self.plan.boundary(piece);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if ig_cdf(mid, mu, self.theta.sigma_x2, d)? < target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-12 * hi.max(1.0) {
                break;
            }
        }
        let t = 0.5 * (lo + hi);
        // The piece interval is open on the left; nudge off a degenerate hit.
        let floor = self.plan.boundary(piece - 1);
        if t <= floor {
            return Ok(floor + 1e-9 * hi.max(1.0));
        }
        Ok(t)
    }

    fn draw_censored(&self, rng: &mut StreamRng) -> Result<Observation> {
        let x = self.sample_surviving_x(rng)?;
        let c = self.plan.censor_time;
        let mean = self.mean_y_c + self.theta.eta2() * (x - self.mean_x_c);
        let sd = (c * self.theta.sigma_y2 * self.theta.one_minus_rho2()).sqrt();
        let z: f64 = rng.sample(StandardNormal);
        Ok(Observation::Censored { marker: mean + sd * z })
    }

    /// Draw the surviving degradation level by rejection: propose from the
    /// unconstrained normal at the censoring time and accept below the
    /// threshold with the no-crossing probability of the tied down path.
    pub(crate) fn sample_surviving_x(&self, rng: &mut StreamRng) -> Result<f64> {
        let d = self.plan.threshold;
        let c = self.plan.censor_time;
        let sd = (c * self.theta.sigma_x2).sqrt();
        for _ in 0..REJECTION_CAP {
            let z: f64 = rng.sample(StandardNormal);
            let x = self.mean_x_c + sd * z;
            if x >= d {
                continue;
            }
            let accept = -f64::exp_m1(-2.0 * d * (d - x) / (self.theta.sigma_x2 * c));
            if rng.gen::<f64>() < accept {
                return Ok(x);
            }
        }
        Err(Error::NonConvergence(format!(
            "rejection sampler exceeded {REJECTION_CAP} proposals for the surviving level"
        )))
    }
}

/// Draw a single observation (convenience wrapper; building a [`Sampler`]
/// once is cheaper for repeated draws).
pub fn sample_observation(
    theta: &ThetaNatural,
    plan: &StressPlan,
    rng: &mut StreamRng,
) -> Result<Observation> {
    Sampler::new(theta, plan)?.draw(rng)
}

/// Simulate a dataset of `n` items. Item `i` draws from the child stream
/// `parent.derive(i)`, so output is bitwise reproducible and independent
/// of evaluation order.
pub fn simulate_dataset(
    n: usize,
    theta: &ThetaNatural,
    plan: &StressPlan,
    parent: &StreamRng,
) -> Result<Dataset> {
    let sampler = Sampler::new(theta, plan)?;
    let mut observations = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = parent.derive(i as u64);
        observations.push(sampler.draw(&mut rng)?);
    }
    Dataset::new(plan.clone(), observations)
}

/// Brute force draw: walk the correlated pair with Euler steps of length
/// at most `dt` (split at stress change points), with a Brownian bridge
/// check for crossings inside each step.
pub fn path_oracle_sample(
    theta: &ThetaNatural,
    plan: &StressPlan,
    dt: f64,
    rng: &mut StreamRng,
) -> Result<Observation> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Domain(format!("step size must be positive, got {dt}")));
    }
    theta.validate()?;
    plan.validate()?;
    let d = plan.threshold;
    let c = plan.censor_time;
    let sx = theta.sigma_x();
    let sy = theta.sigma_y();
    let rho = theta.rho;
    let rho_c = theta.one_minus_rho2().sqrt();
    let mut t = 0.0;
    let mut x = 0.0;
    let mut y = 0.0;
    while t < c {
        // Clamp the step to the next stress change or the censoring time so
        // each step sees a single drift level.
        let mut h = dt.min(c - t);
        for &tau in &plan.change_times {
            if t < tau && tau < t + h {
                h = tau - t;
            }
        }
        let piece = plan.piece_of(t + h)?;
        let mu_x = theta.mu_x[piece - 1];
        let mu_y = theta.mu_y[piece - 1];
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let sqrt_h = h.sqrt();
        let xn = x + mu_x * h + sx * sqrt_h * z1;
        let yn = y + mu_y * h + sy * sqrt_h * (rho * z1 + rho_c * z2);
        if xn >= d {
            let lam = (d - x) / (xn - x);
            let tc = t + lam * h;
            let yc = y + lam * (yn - y);
            return Ok(Observation::Failed { piece: plan.piece_of(tc)?, time: tc, marker: yc });
        }
        // Both endpoints below the threshold: the tied down path still
        // crosses with this probability.
        let bridge = (-2.0 * (d - x) * (d - xn) / (theta.sigma_x2 * h)).exp();
        if rng.gen::<f64>() < bridge {
            let tc = t + 0.5 * h;
            let yc = 0.5 * (y + yn);
            return Ok(Observation::Failed { piece: plan.piece_of(tc)?, time: tc, marker: yc });
        }
        x = xn;
        y = yn;
        t += h;
    }
    Ok(Observation::Censored { marker: y })
}

/// Summary of a simulate-and-refit study.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McStudyReport {
    /// Natural parameter names, in the order of the metric vectors.
    pub parameter_names: Vec<String>,
    /// Generating values.
    pub true_values: Vec<f64>,
    /// Mean estimate minus truth, over truth.
    pub relative_bias: Vec<f64>,
    /// Root mean squared error over truth.
    pub relative_rmse: Vec<f64>,
    /// Replications attempted.
    pub replications: usize,
    /// Replications whose fit converged and entered the metrics.
    pub converged: usize,
}

/// Simulate `replications` datasets of `n_items` at `theta`, refit each by
/// maximum likelihood, and report relative bias and relative root mean
/// squared error per natural parameter. Replication `r` uses the stream
/// `(seed, [0x6d63, r])`, so reports are reproducible bitwise regardless
/// of how the work is scheduled; fits that fail to converge are excluded
/// and counted.
pub fn mc_study(
    replications: usize,
    n_items: usize,
    theta: &ThetaNatural,
    plan: &StressPlan,
    seed: u64,
) -> Result<McStudyReport> {
    if replications == 0 || n_items == 0 {
        return Err(Error::Domain("need at least one replication and one item".into()));
    }
    let truth = theta.as_array()?;
    let estimates: Vec<Option<[f64; 7]>> = (0..replications)
        .into_par_iter()
        .map(|r| {
            let parent = StreamRng::from_path(seed, &[0x6d63, r as u64]);
            let ds = simulate_dataset(n_items, theta, plan, &parent).ok()?;
            let fit = fit_mle(&ds, Parameterization::LinkSpace, None, seed ^ r as u64).ok()?;
            if !fit.converged {
                return None;
            }
            fit.theta_hat.as_array().ok()
        })
        .collect();

    let kept: Vec<&[f64; 7]> = estimates.iter().flatten().collect();
    if kept.is_empty() {
        return Err(Error::NonConvergence("no replication produced a converged fit".into()));
    }
    let k = truth.len();
    let nk = kept.len() as f64;
    let mut relative_bias = Vec::with_capacity(k);
    let mut relative_rmse = Vec::with_capacity(k);
    for i in 0..k {
        let mean: f64 = kept.iter().map(|e| e[i]).sum::<f64>() / nk;
        let mse: f64 =
            kept.iter().map(|e| (e[i] - truth[i]) * (e[i] - truth[i])).sum::<f64>() / nk;
        relative_bias.push((mean - truth[i]) / truth[i]);
        relative_rmse.push(mse.sqrt() / truth[i]);
    }
    Ok(McStudyReport {
        parameter_names: ["mu_x1", "mu_x2", "mu_y1", "mu_y2", "sigma_x2", "sigma_y2", "rho"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        true_values: truth.to_vec(),
        relative_bias,
        relative_rmse,
        replications,
        converged: kept.len(),
    })
}

//! Joint log likelihood and maximum likelihood fitting.
//!
//! The likelihood multiplies the joint failing density over failed items
//! and the censored marker density over survivors. Per observation log
//! terms are sorted before summing so the total is bitwise identical for
//! any ordering of the dataset.
//!
//! Fitting runs in an unconstrained chart (log scales, atanh correlation)
//! with a derivative free search polished by a quasi Newton step, from a
//! moment based start plus jittered restarts. Standard errors come from
//! the observed information at the optimum.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::data::{Dataset, Observation};
use crate::error::{Error, Result};
use crate::model::{
    censored_marker_log_density, failing_joint_log_density, link_to_natural, natural_to_link,
};
use crate::opt;
use crate::params::{ThetaLink, ThetaNatural};
use crate::plan::StressPlan;
use crate::rng::StreamRng;

/// Densities at or below this floor make the whole likelihood minus
/// infinity; it guards optimizers against NaN from saturated underflow.
const LOG_DENSITY_FLOOR: f64 = -690.0;

/// Number of optimization starts: the supplied start plus jittered copies.
const STARTS: usize = 8;

/// Which chart the optimizer works in.
///
/// Both describe the same model for two level plans; `LinkSpace` searches
/// the temperature-model coefficients, `MuSpace` the per level drifts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parameterization {
    /// (a, b, c, d, ln sigma_x2, ln sigma_y2, atanh rho).
    LinkSpace,
    /// (ln mu_x1..m, ln mu_y1..m, ln sigma_x2, ln sigma_y2, atanh rho).
    MuSpace,
}

/// Sum of per observation log densities, minus infinity if any term hits
/// the underflow floor.
pub fn log_likelihood(theta: &ThetaNatural, ds: &Dataset) -> Result<f64> {
    let mut terms = Vec::with_capacity(ds.observations.len());
    for obs in &ds.observations {
        let term = match obs {
            Observation::Failed { time, marker, .. } => {
                failing_joint_log_density(*marker, *time, theta, &ds.plan)?
            }
            Observation::Censored { marker } => {
                censored_marker_log_density(*marker, theta, &ds.plan)?
            }
        };
        if !term.is_finite() || term < LOG_DENSITY_FLOOR {
            return Ok(f64::NEG_INFINITY);
        }
        terms.push(term);
    }
    terms.sort_by(f64::total_cmp);
    Ok(terms.iter().sum())
}

/// Map a parameter set into the unconstrained chart.
pub fn to_unconstrained(
    theta: &ThetaNatural,
    parameterization: Parameterization,
    plan: &StressPlan,
) -> Result<Vec<f64>> {
    match parameterization {
        Parameterization::MuSpace => {
            let mut x = Vec::with_capacity(2 * theta.mu_x.len() + 3);
            x.extend(theta.mu_x.iter().map(|v| v.ln()));
            x.extend(theta.mu_y.iter().map(|v| v.ln()));
            x.push(theta.sigma_x2.ln());
            x.push(theta.sigma_y2.ln());
            x.push(theta.rho.atanh());
            Ok(x)
        }
        Parameterization::LinkSpace => {
            let link = natural_to_link(theta, plan)?;
            Ok(vec![
                link.a,
                link.b,
                link.c,
                link.d,
                link.sigma_x2.ln(),
                link.sigma_y2.ln(),
                link.rho.atanh(),
            ])
        }
    }
}

/// Map a point of the unconstrained chart back to a parameter set.
pub fn from_unconstrained(
    x: &[f64],
    parameterization: Parameterization,
    plan: &StressPlan,
) -> Result<ThetaNatural> {
    match parameterization {
        Parameterization::MuSpace => {
            let m = plan.m();
            if x.len() != 2 * m + 3 {
                return Err(Error::Theta(format!(
                    "expected {} coordinates for a {m} piece plan, got {}",
                    2 * m + 3,
                    x.len()
                )));
            }
            let mu_x: Vec<f64> = x[..m].iter().map(|v| v.exp()).collect();
            let mu_y: Vec<f64> = x[m..2 * m].iter().map(|v| v.exp()).collect();
            ThetaNatural::new(mu_x, mu_y, x[2 * m].exp(), x[2 * m + 1].exp(), x[2 * m + 2].tanh())
        }
        Parameterization::LinkSpace => {
            if x.len() != 7 {
                return Err(Error::Theta(format!("expected 7 coordinates, got {}", x.len())));
            }
            let link =
                ThetaLink::new(x[0], x[1], x[2], x[3], x[4].exp(), x[5].exp(), x[6].tanh())?;
            link_to_natural(&link, plan)
        }
    }
}

/// Outcome of a maximum likelihood fit.
#[derive(Debug, Clone)]
pub struct FitResult {
    /// Estimates on the natural (per level drift) scale.
    pub theta_hat: ThetaNatural,
    /// Estimates of the temperature-model coefficients, when the plan has
    /// exactly two levels.
    pub theta_link_hat: Option<ThetaLink>,
    /// Log likelihood at the optimum.
    pub loglik: f64,
    /// Whether the best start met its convergence tolerances.
    pub converged: bool,
    /// Iterations spent by the winning start.
    pub iterations: usize,
    /// Standard errors for the natural parameters from the observed
    /// information, when it is invertible and positive on the diagonal.
    pub standard_errors: Option<Vec<f64>>,
}

/// Crude but robust starting values from sample moments.
///
/// Per piece failure time means pin the drifts through the accumulated
/// threshold relation, marker residuals give the marker scale, and the
/// regression of marker residuals on the threshold gap gives the
/// correlation. Every quantity is clamped into the valid region, and a
/// generic fallback covers datasets with too few failures.
pub fn moment_init(ds: &Dataset) -> Result<ThetaNatural> {
    let plan = &ds.plan;
    let m = plan.m();
    let d_thr = plan.threshold;
    let c = plan.censor_time;

    let fallback = || -> Result<ThetaNatural> {
        let base = d_thr / (0.6 * c);
        let mu_x: Vec<f64> = (0..m).map(|j| base * 1.5f64.powi(j as i32)).collect();
        let mu_y = mu_x.clone();
        ThetaNatural::new(mu_x, mu_y, 0.5 * d_thr * d_thr / c, 0.5 * d_thr * d_thr / c, 0.3)
    };

    let mut per_piece: Vec<Vec<(f64, f64)>> = vec![Vec::new(); m];
    for obs in &ds.observations {
        if let Observation::Failed { piece, time, marker } = obs {
            per_piece[piece - 1].push((*time, *marker));
        }
    }
    let n_failed: usize = per_piece.iter().map(Vec::len).sum();
    if n_failed < 3 {
        return fallback();
    }

    let mut mu_x = vec![0.0; m];
    let mut mu_y = vec![0.0; m];
    let mut acc_x = 0.0;
    let mut acc_y = 0.0;
    for j in 0..m {
        let lo = plan.boundary(j);
        let hi = plan.boundary(j + 1);
        let (t_bar, y_bar) = if per_piece[j].is_empty() {
            (0.5 * (lo + hi), f64::NAN)
        } else {
            let n = per_piece[j].len() as f64;
            let ts: f64 = per_piece[j].iter().map(|(t, _)| t).sum();
            let ys: f64 = per_piece[j].iter().map(|(_, y)| y).sum();
            (ts / n, ys / n)
        };
        let span = (t_bar - lo).max(0.05 * (hi - lo));
        let raw_x = (d_thr - acc_x) / span;
        mu_x[j] = if j == 0 {
            raw_x.max(1e-3 * d_thr / c)
        } else {
            raw_x.clamp(0.2 * mu_x[j - 1], 50.0 * mu_x[j - 1])
        };
        let raw_y = if y_bar.is_finite() { (y_bar - acc_y) / span } else { mu_x[j] };
        mu_y[j] = if j == 0 {
            raw_y.max(1e-3 * d_thr / c)
        } else {
            raw_y.clamp(0.2 * mu_y[j - 1], 50.0 * mu_y[j - 1])
        };
        acc_x += mu_x[j] * (plan.boundary(j + 1) - lo);
        acc_y += mu_y[j] * (plan.boundary(j + 1) - lo);
    }

    // Degradation scale from the first passage time spread in the piece
    // with the most failures: Var(T) = D sigma^2 / mu^3 under constant
    // drift, used here as a rough moment match.
    let (busiest, _) = per_piece
        .iter()
        .enumerate()
        .max_by_key(|(_, v)| v.len())
        .expect("at least one piece");
    let sigma_x2 = if per_piece[busiest].len() >= 3 {
        let n = per_piece[busiest].len() as f64;
        let t_bar: f64 = per_piece[busiest].iter().map(|(t, _)| t).sum::<f64>() / n;
        let var_t: f64 = per_piece[busiest]
            .iter()
            .map(|(t, _)| (t - t_bar) * (t - t_bar))
            .sum::<f64>()
            / (n - 1.0);
        (var_t * mu_x[busiest].powi(3) / d_thr).max(1e-10)
    } else {
        0.5 * d_thr * d_thr / c
    };

    // Marker scale and correlation from residuals against the accumulated
    // marker mean, variance weighted by elapsed time.
    let mean_y_at = |t: f64| -> f64 {
        let mut acc = 0.0;
        for j in 0..m {
            let lo = plan.boundary(j);
            let hi = plan.boundary(j + 1);
            if t <= lo {
                break;
            }
            acc += mu_y[j] * (t.min(hi) - lo);
        }
        acc
    };
    let mean_x_at = |t: f64| -> f64 {
        let mut acc = 0.0;
        for j in 0..m {
            let lo = plan.boundary(j);
            let hi = plan.boundary(j + 1);
            if t <= lo {
                break;
            }
            acc += mu_x[j] * (t.min(hi) - lo);
        }
        acc
    };
    let mut s_e2 = 0.0;
    let mut s_ep = 0.0;
    let mut s_p2 = 0.0;
    for pieces in &per_piece {
        for &(t, y) in pieces {
            let e = y - mean_y_at(t);
            let p = d_thr - mean_x_at(t);
            s_e2 += e * e / t;
            s_ep += e * p / t;
            s_p2 += p * p / t;
        }
    }
    let sigma_y2 = (s_e2 / n_failed as f64).max(1e-10);
    let rho = if s_p2 > 0.0 {
        let slope = s_ep / s_p2;
        (slope * sigma_x2.sqrt() / sigma_y2.sqrt()).clamp(-0.9, 0.9)
    } else {
        0.3
    };

    ThetaNatural::new(mu_x, mu_y, sigma_x2, sigma_y2, rho).or_else(|_| fallback())
}

/// Fit by maximum likelihood.
///
/// The optimizer starts from `init` (or a moment based start when absent)
/// plus jittered copies seeded from `seed`, runs each start to
/// convergence, and keeps the best. The returned flag reports whether the
/// winning start converged; an error is returned only when no start found
/// a finite likelihood.
pub fn fit_mle(
    ds: &Dataset,
    parameterization: Parameterization,
    init: Option<&ThetaNatural>,
    seed: u64,
) -> Result<FitResult> {
    if ds.is_empty() {
        return Err(Error::Domain("cannot fit an empty dataset".into()));
    }
    let plan = &ds.plan;
    let init_theta = match init {
        Some(t) => t.clone(),
        None => moment_init(ds)?,
    };
    let x0 = to_unconstrained(&init_theta, parameterization, plan)?;

    let objective = |x: &[f64]| -> f64 {
        match from_unconstrained(x, parameterization, plan) {
            Ok(theta) => match log_likelihood(&theta, ds) {
                Ok(l) if l.is_finite() => -l,
                _ => f64::INFINITY,
            },
            Err(_) => f64::INFINITY,
        }
    };

    let mut starts = Vec::with_capacity(STARTS);
    starts.push(x0.clone());
    for k in 1..STARTS {
        let mut rng = StreamRng::from_path(seed, &[0x666974, k as u64]);
        let jittered: Vec<f64> = x0
            .iter()
            .map(|&v| {
                let z: f64 = rng.sample(StandardNormal);
                v + (0.2 * v.abs() + 0.02) * z
            })
            .collect();
        starts.push(jittered);
    }
    let scale: Vec<f64> = x0.iter().map(|&v| 0.1 * v.abs() + 0.01).collect();

    let runs: Vec<opt::OptResult> =
        starts.par_iter().map(|s| opt::minimize(&objective, s, &scale)).collect();
    let best_idx = (0..runs.len())
        .filter(|&i| runs[i].value.is_finite())
        .min_by(|&i, &j| {
            runs[i]
                .value
                .total_cmp(&runs[j].value)
                .then(i.cmp(&j))
        })
        .ok_or_else(|| {
            Error::NonConvergence("no optimization start reached a finite likelihood".into())
        })?;
    let best = &runs[best_idx];

    let theta_hat = from_unconstrained(&best.x, parameterization, plan)?;
    let loglik = -best.value;
    let theta_link_hat = natural_to_link(&theta_hat, plan).ok();
    let standard_errors = observed_information_se(&theta_hat, ds);

    Ok(FitResult {
        theta_hat,
        theta_link_hat,
        loglik,
        converged: best.converged,
        iterations: best.iterations,
        standard_errors,
    })
}

/// Standard errors from the observed information on the natural scale:
/// square roots of the diagonal of the inverse negative Hessian of the log
/// likelihood, by central finite differences. `None` when the Hessian is
/// not invertible or yields a non positive variance.
fn observed_information_se(theta: &ThetaNatural, ds: &Dataset) -> Option<Vec<f64>> {
    let center = theta.as_array().ok()?;
    let k = center.len();
    let ll = |v: &[f64; 7]| -> Option<f64> {
        let th = ThetaNatural::from_array(*v).ok()?;
        match log_likelihood(&th, ds) {
            Ok(l) if l.is_finite() => Some(l),
            _ => None,
        }
    };
    let f0 = ll(&center)?;
    // Steps sized to the parameter, shrunk so every probe stays valid.
    let mut h = [0.0; 7];
    for i in 0..k {
        let mut hi = (1e-4 * center[i].abs()).max(1e-8);
        if i == k - 1 {
            hi = hi.min(0.4 * (1.0 - center[i].abs()).max(1e-6));
        } else {
            hi = hi.min(0.4 * center[i].abs().max(1e-8));
        }
        h[i] = hi;
    }
    let mut hess = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let second = if i == j {
                let mut p = center;
                p[i] += h[i];
                let fp = ll(&p)?;
                p[i] = center[i] - h[i];
                let fm = ll(&p)?;
                (fp - 2.0 * f0 + fm) / (h[i] * h[i])
            } else {
                let mut p = center;
                p[i] += h[i];
                p[j] += h[j];
                let fpp = ll(&p)?;
                p[j] = center[j] - h[j];
                let fpm = ll(&p)?;
                p[i] = center[i] - h[i];
                let fmm = ll(&p)?;
                p[j] = center[j] + h[j];
                let fmp = ll(&p)?;
                (fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j])
            };
            hess[(i, j)] = second;
            hess[(j, i)] = second;
        }
    }
    let info = -hess;
    let inv = info.try_inverse()?;
    let mut se = Vec::with_capacity(k);
    for i in 0..k {
        let v = inv[(i, i)];
        if !(v > 0.0) || !v.is_finite() {
            return None;
        }
        se.push(v.sqrt());
    }
    Some(se)
}

//! Optimal choice of the stress change time.
//!
//! At the normal operating level the lifetime law is the first passage law
//! with the extrapolated use-level drift. The planner computes a lifetime
//! percentile at that level, the delta-method approximate variance of its
//! estimate under a candidate design, and searches the change time that
//! minimizes the variance. The variance needs the expected information
//! matrix of the candidate design, so each candidate evaluation runs the
//! full information assembly with the trial change time substituted into
//! the plan.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::fisher::fisher_matrix;
use crate::model::{
    category_probabilities, ig_cdf, ig_pdf, stress_ratio, use_level_drifts,
};
use crate::normal::{log_norm_cdf, norm_pdf, INV_SQRT_2PI};
use crate::params::ThetaNatural;
use crate::plan::StressPlan;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Number of coarse grid points the change-time search starts from.
const GRID_POINTS: usize = 64;
/// Distance kept from both interval ends during the search.
const EDGE_MARGIN: f64 = 1.0;
/// Width below which the golden-section refinement stops.
const REFINE_WIDTH: f64 = 0.01;
/// Smallest per-piece failure mass a candidate design may have. Below this
/// the conditional moment integrals lose all relative accuracy and the
/// design cannot estimate that piece's drift anyway, so the candidate is
/// reported infeasible rather than scored with garbage.
const MASS_FLOOR: f64 = 1e-8;

/// Outcome of the change-time optimization for one percentile level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    /// Percentile level of the target lifetime quantile.
    pub p: f64,
    /// The use-level lifetime percentile at the supplied estimates.
    pub xi_p: f64,
    /// Optimal stress change time.
    pub tau_star: f64,
    /// Approximate variance of the estimated percentile at `tau_star`.
    pub avar: f64,
    /// Coefficient of variation: sqrt(avar) / xi_p.
    pub cv: f64,
    /// First-piece failure probability at the optimal change time.
    pub g1_tau: f64,
    /// Second-piece failure mass between the change time and censoring.
    pub g2_rem: f64,
}

/// One optimization per requested percentile level, plus CSV renderings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanReport {
    pub rows: Vec<PlanResult>,
    /// Batch size every candidate design was scored with.
    pub n: usize,
}

impl PlanReport {
    /// Full table, one row per percentile level.
    pub fn table_csv(&self) -> String {
        let mut out = String::from("p,xi_p,tau_star,avar,cv,g1_tau,g2_rem\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.p, r.xi_p, r.tau_star, r.avar, r.cv, r.g1_tau, r.g2_rem
            ));
        }
        out
    }

    /// Plot data: percentile level against the optimal change time.
    pub fn tau_csv(&self) -> String {
        let mut out = String::from("p,tau_star\n");
        for r in &self.rows {
            out.push_str(&format!("{},{}\n", r.p, r.tau_star));
        }
        out
    }

    /// Plot data: percentile level against the optimized coefficient of
    /// variation.
    pub fn cv_csv(&self) -> String {
        let mut out = String::from("p,cv\n");
        for r in &self.rows {
            out.push_str(&format!("{},{}\n", r.p, r.cv));
        }
        out
    }
}

/// The 100p-th percentile of the first passage law with drift `mu0`.
///
/// Solves the cdf equation by bracketed bisection; the cdf is strictly
/// increasing, so the root is unique. The result satisfies
/// |cdf(xi) - p| < 1e-10.
pub fn percentile(p: f64, mu0: f64, sigma_x2: f64, d: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!(
            "percentile level must lie strictly inside (0, 1), got {p}"
        )));
    }
    if !(mu0 > 0.0) || !mu0.is_finite() {
        return Err(Error::Domain(format!("use-level drift must be positive, got {mu0}")));
    }
    let g = |t: f64| ig_cdf(t, mu0, sigma_x2, d);
    // The mean of the passage law, d / mu0, anchors the bracket.
    let anchor = d / mu0;
    let mut lo = anchor;
    let mut expansions = 0;
    while g(lo)? > p {
        lo /= 4.0;
        expansions += 1;
        if expansions > 600 || lo <= f64::MIN_POSITIVE {
            return Err(Error::NonConvergence(format!(
                "no lower bracket for the {p} percentile at drift {mu0}"
            )));
        }
    }
    let mut hi = anchor;
    expansions = 0;
    while g(hi)? < p {
        hi *= 4.0;
        expansions += 1;
        if expansions > 600 || !hi.is_finite() {
            return Err(Error::NonConvergence(format!(
                "no upper bracket for the {p} percentile at drift {mu0}"
            )));
        }
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let gm = g(mid)?;
        if (gm - p).abs() < 1e-10 {
            return Ok(mid);
        }
        if gm < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::NonConvergence(format!(
        "bisection exhausted floating point resolution before |cdf - p| < 1e-10 at level {p}"
    )))
}

/// Gradient of the use-level lifetime cdf at the percentile with respect to
/// the seven parameters. Only the two latent drifts and the latent variance
/// enter; the marker parameters do not move the lifetime law, so entries
/// 3, 4, 6, and 7 are exactly zero.
pub fn sensitivity_vector(
    xi_p: f64,
    theta: &ThetaNatural,
    alpha: f64,
    plan: &StressPlan,
) -> Result<[f64; 7]> {
    if !(xi_p > 0.0) || !xi_p.is_finite() {
        return Err(Error::Domain(format!("percentile must be positive, got {xi_p}")));
    }
    let (mu0, _) = use_level_drifts(theta, alpha)?;
    let d = plan.threshold;
    let s = theta.sigma_x2;
    let st = (s * xi_p).sqrt();
    let c1 = (mu0 * xi_p - d) / st;
    let c2 = -(mu0 * xi_p + d) / st;
    let beta3 = 2.0 * d * mu0 / s;
    // The tilted tail terms pair a large exponential with a small normal
    // tail, so both are assembled in log space.
    let tilted_cdf = (beta3 + log_norm_cdf(c2)).exp();
    let tilted_pdf = INV_SQRT_2PI * (beta3 - 0.5 * c2 * c2).exp();

    let dg_dmu0 =
        xi_p * norm_pdf(c1) / st + 2.0 * d * tilted_cdf / s - xi_p * tilted_pdf / st;
    let h1 = mu0 / ((1.0 - alpha) * theta.mu_x[0]) * dg_dmu0;
    let h2 = -alpha * (theta.mu_x[0] / theta.mu_x[1]) * h1;
    let sig3 = s * s.sqrt();
    let h5 = -(mu0 * xi_p - d) * norm_pdf(c1) / (2.0 * sig3 * xi_p.sqrt())
        - 2.0 * d * mu0 * tilted_cdf / (s * s)
        + (mu0 * xi_p + d) * tilted_pdf / (2.0 * sig3 * xi_p.sqrt());
    Ok([h1, h2, 0.0, 0.0, h5, 0.0, 0.0])
}

/// Use-level pieces shared by every candidate change time at one level.
struct Target {
    xi: f64,
    h: DVector<f64>,
    density_sq: f64,
}

fn target_for(p: f64, theta: &ThetaNatural, plan: &StressPlan) -> Result<Target> {
    let alpha = stress_ratio(plan)?;
    let (mu0, _) = use_level_drifts(theta, alpha)?;
    let xi = percentile(p, mu0, theta.sigma_x2, plan.threshold)?;
    let h = sensitivity_vector(xi, theta, alpha, plan)?;
    let density = ig_pdf(xi, mu0, theta.sigma_x2, plan.threshold)?;
    if !(density > 0.0) {
        return Err(Error::Domain(format!(
            "the lifetime density vanishes at the {p} percentile; the variance is undefined"
        )));
    }
    Ok(Target {
        xi,
        h: DVector::from_iterator(7, h.into_iter()),
        density_sq: density * density,
    })
}

fn with_change_time(plan: &StressPlan, tau: f64) -> StressPlan {
    let mut candidate = plan.clone();
    candidate.change_times[0] = tau;
    candidate
}

/// Quadratic form H' I(tau)^{-1} H / f^2 given the information matrix of one
/// candidate design. A singular matrix, or a quadratic form that fails to be
/// positive (the assembly can lose definiteness in extreme designs), reports
/// +infinity: the candidate is infeasible rather than erroneous.
fn avar_from_matrix(target: &Target, matrix: &[[f64; 7]; 7]) -> f64 {
    let info = DMatrix::from_fn(7, 7, |r, c| matrix[r][c]);
    match info.lu().solve(&target.h) {
        Some(x) => {
            let quad = target.h.dot(&x);
            if quad.is_finite() && quad > 0.0 {
                quad / target.density_sq
            } else {
                f64::INFINITY
            }
        }
        None => f64::INFINITY,
    }
}

/// Information matrix of the candidate design, or `None` when the candidate
/// is infeasible: a piece's failure mass below [`MASS_FLOOR`], or a failed
/// assembly.
fn feasible_matrix(
    tau: f64,
    theta: &ThetaNatural,
    plan: &StressPlan,
    n: usize,
) -> Option<[[f64; 7]; 7]> {
    let candidate = with_change_time(plan, tau);
    let probs = category_probabilities(theta, &candidate).ok()?;
    if probs[0] < MASS_FLOOR || probs[1] < MASS_FLOOR {
        return None;
    }
    fisher_matrix(theta, &candidate, n).ok().map(|info| info.matrix)
}

/// Approximate variance of the estimated use-level percentile under the
/// design with change time `tau`. Infeasible candidates (a piece essentially
/// never exercised, or a singular information matrix) report +infinity.
pub fn avar(
    tau: f64,
    p: f64,
    theta: &ThetaNatural,
    plan: &StressPlan,
    n: usize,
) -> Result<f64> {
    if !(tau > 0.0 && tau < plan.censor_time) {
        return Err(Error::Domain(format!(
            "change time {tau} must lie strictly inside (0, {})",
            plan.censor_time
        )));
    }
    let target = target_for(p, theta, plan)?;
    match feasible_matrix(tau, theta, plan, n) {
        Some(matrix) => Ok(avar_from_matrix(&target, &matrix)),
        None => Ok(f64::INFINITY),
    }
}

/// Cache of information matrices keyed by the candidate change time, shared
/// across percentile levels because the matrix does not depend on p. A
/// `None` entry records a candidate whose information assembly failed, so
/// the failure is not recomputed.
type InfoCache = HashMap<u64, Option<[[f64; 7]; 7]>>;

fn cached_matrix(
    tau: f64,
    theta: &ThetaNatural,
    plan: &StressPlan,
    n: usize,
    cache: &mut InfoCache,
) -> Option<[[f64; 7]; 7]> {
    *cache
        .entry(tau.to_bits())
        .or_insert_with(|| feasible_matrix(tau, theta, plan, n))
}

fn avar_cached(
    tau: f64,
    target: &Target,
    theta: &ThetaNatural,
    plan: &StressPlan,
    n: usize,
    cache: &mut InfoCache,
) -> f64 {
    match cached_matrix(tau, theta, plan, n, cache) {
        Some(matrix) => avar_from_matrix(target, &matrix),
        None => f64::INFINITY,
    }
}

fn optimize_with_cache(
    p: f64,
    theta: &ThetaNatural,
    plan: &StressPlan,
    n: usize,
    cache: &mut InfoCache,
) -> Result<PlanResult> {
    let target = target_for(p, theta, plan)?;
    let lo = EDGE_MARGIN;
    let hi = plan.censor_time - EDGE_MARGIN;
    if !(hi > lo) {
        return Err(Error::Domain(format!(
            "censoring time {} leaves no room for a change time search",
            plan.censor_time
        )));
    }
    let step = (hi - lo) / (GRID_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..GRID_POINTS).map(|i| lo + i as f64 * step).collect();
    let values: Vec<f64> = grid
        .iter()
        .map(|&tau| avar_cached(tau, &target, theta, plan, n, cache))
        .collect();
    let (best_idx, &best_grid) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("grid is nonempty");
    if !best_grid.is_finite() {
        return Err(Error::NonConvergence(
            "every candidate change time on the search grid was infeasible".into(),
        ));
    }

    // Golden-section refinement between the neighbors of the best grid point.
    let mut a = if best_idx == 0 { lo } else { grid[best_idx - 1] };
    let mut b = if best_idx + 1 == GRID_POINTS { hi } else { grid[best_idx + 1] };
    let (mut best_tau, mut best_avar) = (grid[best_idx], best_grid);
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = avar_cached(c, &target, theta, plan, n, cache);
    let mut fd = avar_cached(d, &target, theta, plan, n, cache);
    while (b - a) > REFINE_WIDTH {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = avar_cached(c, &target, theta, plan, n, cache);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = avar_cached(d, &target, theta, plan, n, cache);
        }
        let (tau_here, avar_here) = if fc < fd { (c, fc) } else { (d, fd) };
        if avar_here < best_avar {
            best_tau = tau_here;
            best_avar = avar_here;
        }
    }

    let probs = category_probabilities(theta, &with_change_time(plan, best_tau))?;
    Ok(PlanResult {
        p,
        xi_p: target.xi,
        tau_star: best_tau,
        avar: best_avar,
        cv: best_avar.sqrt() / target.xi,
        g1_tau: probs[0],
        g2_rem: probs[1],
    })
}

/// Minimize the approximate variance over the change time: a coarse grid
/// scan followed by golden-section refinement around the best grid point.
pub fn optimize_tau(
    p: f64,
    theta: &ThetaNatural,
    plan: &StressPlan,
    n: usize,
) -> Result<PlanResult> {
    let mut cache = InfoCache::new();
    optimize_with_cache(p, theta, plan, n, &mut cache)
}

/// One optimization per percentile level. The information matrices of the
/// shared search grid are computed once and reused across levels.
pub fn plan_report(
    p_grid: &[f64],
    theta: &ThetaNatural,
    plan: &StressPlan,
    n: usize,
) -> Result<PlanReport> {
    if p_grid.is_empty() {
        return Err(Error::Domain("the percentile grid must not be empty".into()));
    }
    let mut cache = InfoCache::new();
    let mut rows = Vec::with_capacity(p_grid.len());
    for &p in p_grid {
        rows.push(optimize_with_cache(p, theta, plan, n, &mut cache)?);
    }
    Ok(PlanReport { rows, n })
}

//! Probability kernels of the bivariate degradation and marker model.
//!
//! The latent degradation and the observed marker form a correlated Wiener
//! pair whose drifts switch at the stress change times. Failure is the first
//! passage of the degradation through the threshold, which under a constant
//! drift follows an inverse Gaussian law. This module provides: the
//! temperature link between stress levels and drifts, the first passage cdf
//! and pdf, the piecewise mean machinery, the conditional marker densities
//! for failing and surviving items, and the joint and marginal densities the
//! likelihood is built from.
//!
//! A modeling quirk carried over deliberately: for pieces after the first,
//! the failure time density plugs the current piece's drift in at absolute
//! time, while the marker means accumulate drift piece by piece. The two
//! conventions do not describe one coherent stochastic process, so the
//! failing plus censored masses do not add to one (about 0.90 rather than
//! 1.00 at the reference parameters). Everything downstream (likelihood,
//! information matrix, sampling) uses these kernels exactly as defined here,
//! so all components stay mutually consistent.

use crate::error::{Error, Result};
use crate::normal::{log_norm_cdf, norm_cdf, norm_pdf};
use crate::params::{ThetaLink, ThetaNatural};
use crate::plan::StressPlan;

const LN_SQRT_2PI: f64 = 0.9189385332046727418;

/// Map temperature-model coefficients to per-level drifts.
pub fn link_to_natural(link: &ThetaLink, plan: &StressPlan) -> Result<ThetaNatural> {
    link.validate()?;
    plan.validate()?;
    let drift = |coef: f64, slope: f64, s: f64| -> Result<f64> {
        let mu = (coef + slope / (273.0 + s)).exp();
        if !mu.is_finite() {
            return Err(Error::Domain(format!(
                "temperature model overflowed at stress {s} (coefficients {coef}, {slope})"
            )));
        }
        Ok(mu)
    };
    let mut mu_x = Vec::with_capacity(plan.m());
    let mut mu_y = Vec::with_capacity(plan.m());
    for &s in &plan.stresses {
        mu_x.push(drift(link.a, link.b, s)?);
        mu_y.push(drift(link.c, link.d, s)?);
    }
    ThetaNatural::new(mu_x, mu_y, link.sigma_x2, link.sigma_y2, link.rho)
}

/// Recover temperature-model coefficients from per-level drifts.
///
/// Inverse of [`link_to_natural`]; only defined for two level plans, where
/// the pair of log drifts determines the intercept and slope uniquely.
pub fn natural_to_link(theta: &ThetaNatural, plan: &StressPlan) -> Result<ThetaLink> {
    theta.validate()?;
    plan.validate()?;
    if plan.m() != 2 || theta.mu_x.len() != 2 {
        return Err(Error::Unsupported(
            "recovering link coefficients needs exactly two stress levels".into(),
        ));
    }
    let r1 = 1.0 / (273.0 + plan.stresses[0]);
    let r2 = 1.0 / (273.0 + plan.stresses[1]);
    let solve = |mu1: f64, mu2: f64| -> (f64, f64) {
        let slope = (mu1.ln() - mu2.ln()) / (r1 - r2);
        (mu1.ln() - slope * r1, slope)
    };
    let (a, b) = solve(theta.mu_x[0], theta.mu_x[1]);
    let (c, d) = solve(theta.mu_y[0], theta.mu_y[1]);
    ThetaLink::new(a, b, c, d, theta.sigma_x2, theta.sigma_y2, theta.rho)
}

/// Interpolation weight α sending the two accelerated drifts back to the
/// use level, from raw stress values.
///
/// Defined so that log μ_0 = (log μ_1 - α log μ_2) / (1 - α) inverts the
/// temperature link exactly: α is the position of 1/(273+S_1) between
/// 1/(273+S_0) and 1/(273+S_2) measured on the inverse-temperature axis.
pub fn stress_ratio_levels(s0: f64, s1: f64, s2: f64) -> Result<f64> {
    if s2 == s0 {
        return Err(Error::Domain(
            "stress ratio is undefined when the top stress equals the use stress".into(),
        ));
    }
    Ok(((s1 - s0) * (273.0 + s2)) / ((s2 - s0) * (273.0 + s1)))
}

/// Stress ratio of a two level plan.
pub fn stress_ratio(plan: &StressPlan) -> Result<f64> {
    if plan.m() != 2 {
        return Err(Error::Unsupported(format!(
            "stress ratio is defined for two level plans, got {} levels",
            plan.m()
        )));
    }
    stress_ratio_levels(plan.use_stress, plan.stresses[0], plan.stresses[1])
}

/// Extrapolate the two accelerated drift pairs down to the use level.
pub fn use_level_drifts(theta: &ThetaNatural, alpha: f64) -> Result<(f64, f64)> {
    if theta.m() != 2 {
        return Err(Error::Unsupported(format!(
            "use-level extrapolation needs exactly two levels, got {}",
            theta.m()
        )));
    }
    if alpha == 1.0 {
        return Err(Error::Domain("stress ratio 1 makes the extrapolation singular".into()));
    }
    if theta.mu_y[0] <= 0.0 || theta.mu_y[1] <= 0.0 {
        return Err(Error::Domain(
            "use-level extrapolation needs positive marker drifts".into(),
        ));
    }
    let back = |m1: f64, m2: f64| ((m1.ln() - alpha * m2.ln()) / (1.0 - alpha)).exp();
    Ok((back(theta.mu_x[0], theta.mu_x[1]), back(theta.mu_y[0], theta.mu_y[1])))
}

fn check_ig_args(t: f64, sigma2: f64, d: f64) -> Result<()> {
    if !t.is_finite() || t <= 0.0 {
        return Err(Error::Domain(format!("first-passage time must be positive, got {t}")));
    }
    if !sigma2.is_finite() || sigma2 <= 0.0 {
        return Err(Error::Domain(format!("variance rate must be positive, got {sigma2}")));
    }
    if !d.is_finite() || d <= 0.0 {
        return Err(Error::Domain(format!("threshold must be positive, got {d}")));
    }
    Ok(())
}

/// First passage cdf of a drifted Wiener process through level `d`.
///
/// The second term pairs a potentially huge exponential with a tiny normal
/// tail, so it is assembled in log space; the pairing keeps the result in
/// range whenever the true value is.
pub fn ig_cdf(t: f64, mu: f64, sigma2: f64, d: f64) -> Result<f64> {
    check_ig_args(t, sigma2, d)?;
    let st = (sigma2 * t).sqrt();
    let z1 = (mu * t - d) / st;
    let z2 = -(mu * t + d) / st;
    let log_tail = 2.0 * mu * d / sigma2 + log_norm_cdf(z2);
    let value = norm_cdf(z1) + log_tail.exp();
    Ok(value.clamp(0.0, 1.0))
}

/// First passage density matching [`ig_cdf`].
pub fn ig_pdf(t: f64, mu: f64, sigma2: f64, d: f64) -> Result<f64> {
    Ok(ig_log_pdf(t, mu, sigma2, d)?.exp())
}

/// Log of [`ig_pdf`], usable far into the tails.
pub fn ig_log_pdf(t: f64, mu: f64, sigma2: f64, d: f64) -> Result<f64> {
    check_ig_args(t, sigma2, d)?;
    let dev = d - mu * t;
    Ok(d.ln() - 0.5 * (2.0 * std::f64::consts::PI * sigma2 * t * t * t).ln()
        - dev * dev / (2.0 * sigma2 * t))
}

/// Invert [`ig_cdf`] in `t` for a positive drift.
pub fn ig_quantile(p: f64, mu: f64, sigma2: f64, d: f64) -> Result<f64> {
    if !p.is_finite() || p <= 0.0 || p >= 1.0 {
        return Err(Error::Domain(format!("quantile level must lie in (0, 1), got {p}")));
    }
    if !mu.is_finite() || mu <= 0.0 {
        return Err(Error::Domain(format!(
            "quantile inversion needs a positive drift (the law is defective otherwise), got {mu}"
        )));
    }
    check_ig_args(1.0, sigma2, d)?;
    // Bracket the root around the mean d/mu, then bisect.
    let mut hi = d / mu;
    let mut expansions = 0;
    while ig_cdf(hi, mu, sigma2, d)? < p {
        hi *= 2.0;
        expansions += 1;
        if expansions > 200 {
            return Err(Error::NonConvergence(format!(
                "could not bracket the {p}-quantile from above"
            )));
        }
    }
    let mut lo = hi;
    while ig_cdf(lo, mu, sigma2, d)? > p {
        lo *= 0.5;
        expansions += 1;
        if expansions > 400 {
            return Err(Error::NonConvergence(format!(
                "could not bracket the {p}-quantile from below"
            )));
        }
    }
    for _ in 0..500 {
        let mid = 0.5 * (lo + hi);
        let val = ig_cdf(mid, mu, sigma2, d)?;
        if (val - p).abs() < 1e-12 || (hi - lo) < 1e-13 * mid.max(1.0) {
            return Ok(mid);
        }
        if val < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mid = 0.5 * (lo + hi);
    if (ig_cdf(mid, mu, sigma2, d)? - p).abs() < 1e-10 {
        Ok(mid)
    } else {
        Err(Error::NonConvergence(format!("quantile bisection stalled at level {p}")))
    }
}

fn check_compatible(theta: &ThetaNatural, plan: &StressPlan) -> Result<()> {
    if theta.m() != plan.m() {
        return Err(Error::Theta(format!(
            "parameter vector covers {} levels but the plan has {}",
            theta.m(),
            plan.m()
        )));
    }
    Ok(())
}

/// Piecewise accumulated mean Σ_{k<j} d_k (τ_k - τ_{k-1}) + d_j (t - τ_{j-1})
/// for a drift sequence `drifts` and a time `t` in piece `piece`.
pub(crate) fn accumulated_mean(drifts: &[f64], plan: &StressPlan, piece: usize, t: f64) -> f64 {
    let mut mean = drifts[piece - 1] * (t - plan.boundary(piece - 1));
    for k in 1..piece {
        mean += drifts[k - 1] * (plan.boundary(k) - plan.boundary(k - 1));
    }
    mean
}

/// The per-time quantities every piecewise density is built from.
#[derive(Debug, Clone, Copy)]
pub struct PieceKernels {
    /// 1-based piece index of the evaluation time.
    pub piece: usize,
    /// Accumulated degradation mean μ_j(x, t).
    pub mean_x: f64,
    /// Accumulated marker mean μ_j(y, t).
    pub mean_y: f64,
    /// Marker residual q_j(t, y) = y - μ_j(y, t).
    pub marker_resid: f64,
    /// Remaining gap to the threshold P_j(t) = D - μ_j(x, t).
    pub threshold_gap: f64,
}

/// Evaluate the piecewise means and residuals at time `t` and marker `y`.
pub fn piece_kernels(t: f64, y: f64, theta: &ThetaNatural, plan: &StressPlan) -> Result<PieceKernels> {
    check_compatible(theta, plan)?;
    let piece = plan.piece_of(t)?;
    let mean_x = accumulated_mean(&theta.mu_x, plan, piece, t);
    let mean_y = accumulated_mean(&theta.mu_y, plan, piece, t);
    Ok(PieceKernels {
        piece,
        mean_x,
        mean_y,
        marker_resid: y - mean_y,
        threshold_gap: plan.threshold - mean_x,
    })
}

/// Failure time density: on piece j, the first passage kernel with that
/// piece's drift evaluated at absolute time (see the module overview for the
/// consequences of this convention).
pub fn failure_time_density(t: f64, theta: &ThetaNatural, plan: &StressPlan) -> Result<f64> {
    check_compatible(theta, plan)?;
    let piece = plan.piece_of(t)?;
    ig_pdf(t, theta.mu_x[piece - 1], theta.sigma_x2, plan.threshold)
}

/// Marker density at censoring given the latent degradation level `x`.
pub fn p1_marker_given_x(y: f64, x: f64, theta: &ThetaNatural, plan: &StressPlan) -> Result<f64> {
    check_compatible(theta, plan)?;
    let c = plan.censor_time;
    let mean_x = accumulated_mean(&theta.mu_x, plan, plan.m(), c);
    let mean_y = accumulated_mean(&theta.mu_y, plan, plan.m(), c);
    let mean = mean_y + theta.eta2() * (x - mean_x);
    let sd = (c * theta.sigma_y2 * theta.one_minus_rho2()).sqrt();
    Ok(norm_pdf((y - mean) / sd) / sd)
}

/// Marker density at a failure time `t`, with the degradation pinned at the
/// threshold.
pub fn p2_marker_given_t(y: f64, t: f64, theta: &ThetaNatural, plan: &StressPlan) -> Result<f64> {
    let k = piece_kernels(t, y, theta, plan)?;
    let mean_shift = theta.eta2() * k.threshold_gap;
    let sd = (t * theta.sigma_y2 * theta.one_minus_rho2()).sqrt();
    Ok(norm_pdf((k.marker_resid - mean_shift) / sd) / sd)
}

/// Joint density of surviving to the censoring time with degradation level
/// `x`; zero at or above the threshold.
pub fn p3_surviving_x(x: f64, theta: &ThetaNatural, plan: &StressPlan) -> Result<f64> {
    check_compatible(theta, plan)?;
    let d = plan.threshold;
    if !x.is_finite() {
        return Err(Error::Domain(format!("degradation level must be finite, got {x}")));
    }
    if x >= d {
        return Ok(0.0);
    }
    let c = plan.censor_time;
    let mean_x = accumulated_mean(&theta.mu_x, plan, plan.m(), c);
    let sd = (theta.sigma_x2 * c).sqrt();
    let no_crossing = -(-2.0 * d * (d - x) / (theta.sigma_x2 * c)).exp_m1();
    Ok(no_crossing * norm_pdf((x - mean_x) / sd) / sd)
}

/// The four standardized arguments and shared factors of the censored marker
/// density, exposed for the information-matrix coefficient tables.
#[derive(Debug, Clone, Copy)]
pub struct CensoredParts {
    /// 1 / (σ_Y sqrt(C)).
    pub c_y: f64,
    /// Exponential tilt 2D μ_m(x, C) / (σ_X² C).
    pub beta: f64,
    /// Φ-arguments u_k, k = 1, 2.
    pub u: [f64; 2],
    /// φ-arguments v_k, k = 1, 2.
    pub v: [f64; 2],
    /// Marker residual q_m(C, y).
    pub q: f64,
    /// Threshold gap P_m(C).
    pub p: f64,
}

/// Compute the building blocks of the censored marker density at `y`.
pub fn censored_parts(y: f64, theta: &ThetaNatural, plan: &StressPlan) -> Result<CensoredParts> {
    let c = plan.censor_time;
    let d = plan.threshold;
    let k = piece_kernels(c, y, theta, plan)?;
    let q = k.marker_resid;
    let p = k.threshold_gap;
    let c_y = 1.0 / (theta.sigma_y() * c.sqrt());
    let eta3 = theta.eta3(c);
    let kappa = theta.kappa();
    let omr = theta.one_minus_rho2();
    let beta = 2.0 * d * (d - p) / (theta.sigma_x2 * c);
    Ok(CensoredParts {
        c_y,
        beta,
        u: [eta3 * (p - kappa * q), eta3 * (p - kappa * q - 2.0 * d * omr)],
        v: [c_y * q, c_y * (q - 2.0 * theta.eta2() * d)],
        q,
        p,
    })
}

/// Log of the censored marker density, assembled in log space so the
/// exponential tilt cannot overflow. Returns negative infinity when the
/// value underflows (the two terms agree to working precision).
pub fn censored_marker_log_density(y: f64, theta: &ThetaNatural, plan: &StressPlan) -> Result<f64> {
    let parts = censored_parts(y, theta, plan)?;
    let a1 = log_norm_cdf(parts.u[0]) - 0.5 * parts.v[0] * parts.v[0] - LN_SQRT_2PI;
    let a2 = parts.beta + log_norm_cdf(parts.u[1]) - 0.5 * parts.v[1] * parts.v[1] - LN_SQRT_2PI;
    if a2 >= a1 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(parts.c_y.ln() + a1 + (-((a2 - a1).exp())).ln_1p())
}

/// Marginal density of the marker for an item surviving to the censoring
/// time, in closed form.
pub fn censored_marker_density(y: f64, theta: &ThetaNatural, plan: &StressPlan) -> Result<f64> {
    Ok(censored_marker_log_density(y, theta, plan)?.exp())
}

/// Joint density of failing at time `t` with marker `y`, as the product of
/// the conditional marker density and the failure time density.
pub fn failing_joint_density(y: f64, t: f64, theta: &ThetaNatural, plan: &StressPlan) -> Result<f64> {
    Ok(p2_marker_given_t(y, t, theta, plan)? * failure_time_density(t, theta, plan)?)
}

/// The same joint density written as a single exponential with the combined
/// quadratic form in the exponent.
pub fn failing_joint_density_exponential_form(
    y: f64,
    t: f64,
    theta: &ThetaNatural,
    plan: &StressPlan,
) -> Result<f64> {
    Ok(failing_joint_log_density(y, t, theta, plan)?.exp())
}

/// Log of the failing joint density via the combined quadratic form.
pub fn failing_joint_log_density(
    y: f64,
    t: f64,
    theta: &ThetaNatural,
    plan: &StressPlan,
) -> Result<f64> {
    let k = piece_kernels(t, y, theta, plan)?;
    let q_form = combined_quadratic(&k, t, theta, plan);
    Ok(plan.threshold.ln()
        - (2.0 * std::f64::consts::PI * theta.sigma_x() * theta.sigma_y()).ln()
        - 0.5 * theta.one_minus_rho2().ln()
        - 2.0 * t.ln()
        - q_form / t)
}

/// The quadratic form Q_j combining the marker residual and the absolute-time
/// threshold deviation for the piece of `t`.
pub fn combined_quadratic(k: &PieceKernels, t: f64, theta: &ThetaNatural, plan: &StressPlan) -> f64 {
    let resid = k.marker_resid - theta.eta2() * k.threshold_gap;
    let dev = plan.threshold - theta.mu_x[k.piece - 1] * t;
    theta.eta1() * resid * resid + dev * dev / (2.0 * theta.sigma_x2)
}

/// Multinomial category masses (failure in each piece, then survival).
///
/// The failure mass of piece j is the increment of that piece's first
/// passage cdf across the piece. The survival mass is one minus the total;
/// a parameter vector making the total exceed one (possible because each
/// piece uses its own cdf) is rejected.
pub fn category_probabilities(theta: &ThetaNatural, plan: &StressPlan) -> Result<Vec<f64>> {
    check_compatible(theta, plan)?;
    let mut probs = Vec::with_capacity(plan.m() + 1);
    let mut total = 0.0;
    for j in 1..=plan.m() {
        let g = |t: f64| -> Result<f64> {
            if t == 0.0 {
                Ok(0.0)
            } else {
                ig_cdf(t, theta.mu_x[j - 1], theta.sigma_x2, plan.threshold)
            }
        };
        let mass = (g(plan.boundary(j))? - g(plan.boundary(j - 1))?).max(0.0);
        probs.push(mass);
        total += mass;
    }
    if total > 1.0 + 1e-12 {
        return Err(Error::Domain(format!(
            "piecewise failure masses add to {total} > 1; the drift sequence is \
             incompatible with a survival remainder"
        )));
    }
    probs.push((1.0 - total).max(0.0));
    Ok(probs)
}

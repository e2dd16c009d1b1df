//! Adaptive one dimensional quadrature on finite intervals.
//!
//! A 15 point Gauss-Kronrod rule supplies both the value and an error
//! estimate on each subinterval. Starting from a fixed even partition, the
//! interval with the worst estimate is repeatedly bisected until the summed
//! estimate meets the requested tolerance. The even start matters: the
//! integrands in this crate can concentrate on a small part of a long
//! interval, and a single panel rule can look deceptively converged when all
//! of its nodes miss the bump.

use crate::error::{Error, Result};
use std::collections::BinaryHeap;

/// Positive abscissae of the 15 point Kronrod rule on [-1, 1], descending.
/// Every second entry, starting at index 1, is also a node of the embedded
/// 7 point Gauss rule; the final entry is the midpoint.
const XGK: [f64; 8] = [
    0.991455371120812639207,
    0.949107912342758524526,
    0.864864423359769072789,
    0.741531185599394439864,
    0.586087235467691130294,
    0.405845151377397166907,
    0.207784955007898467601,
    0.0,
];

/// Kronrod weights matching `XGK`.
const WGK: [f64; 8] = [
    0.022935322010529224964,
    0.063092092629978553291,
    0.104790010322250183840,
    0.140653259715525918745,
    0.169004726639267902827,
    0.190350578064785409913,
    0.204432940075298892414,
    0.209482141084727828013,
];

/// Weights of the embedded 7 point Gauss rule, matching the odd entries of
/// `XGK` and the midpoint.
const WG: [f64; 4] = [
    0.129484966168869693271,
    0.279705391489276667901,
    0.381830050505118944950,
    0.417959183673469387755,
];

/// Number of equal slices the interval is cut into before adaptation.
const INITIAL_SLICES: usize = 8;

/// Hard cap on the number of subintervals the adaptive loop may hold.
const MAX_INTERVALS: usize = 2048;

/// Outcome of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    /// Estimated value of the integral.
    pub value: f64,
    /// Estimated absolute error of `value`.
    pub error: f64,
    /// Number of subintervals in the final partition.
    pub intervals: usize,
}

#[derive(Debug)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Apply the 15 point rule to one panel, returning its value and a scaled
/// error estimate in the style of the classic automatic integrators.
fn gk15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> Result<(f64, f64)> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);

    let fc = f(center);
    let mut resk = WGK[7] * fc;
    let mut resg = WG[3] * fc;
    let mut samples = [0.0f64; 15];
    samples[14] = fc;

    for i in 0..7 {
        let dx = half * XGK[i];
        let f_lo = f(center - dx);
        let f_hi = f(center + dx);
        samples[2 * i] = f_lo;
        samples[2 * i + 1] = f_hi;
        resk += WGK[i] * (f_lo + f_hi);
        if i % 2 == 1 {
            resg += WG[i / 2] * (f_lo + f_hi);
        }
    }

    let value = resk * half;
    if !value.is_finite() {
        return Err(Error::Domain(format!(
            "integrand produced a non-finite panel value on [{a}, {b}]"
        )));
    }

    // Error scaling: compare against the spread of the integrand around its
    // panel mean so that sharp but well-resolved panels are not punished.
    let mean = 0.5 * resk;
    let mut resasc = WGK[7] * (fc - mean).abs();
    for i in 0..7 {
        resasc += WGK[i] * ((samples[2 * i] - mean).abs() + (samples[2 * i + 1] - mean).abs());
    }
    resasc *= half.abs();

    let raw = ((resk - resg) * half).abs();
    let error = if resasc == 0.0 {
        raw
    } else {
        resasc * (200.0 * raw / resasc).powf(1.5).min(1.0)
    };
    Ok((value, error))
}

/// Integrate `f` over the finite interval [a, b].
///
/// The loop stops once the summed error estimate drops below
/// `atol + rtol * |value|`. Exceeding the subdivision budget without meeting
/// the tolerance reports non convergence; a non-finite integrand value or a
/// non-finite endpoint reports a domain error. An empty interval (a == b)
/// integrates to zero.
pub fn integrate(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    atol: f64,
    rtol: f64,
) -> Result<Quadrature> {
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::Domain(format!(
            "integration endpoints must be finite, got [{a}, {b}]"
        )));
    }
    if a == b {
        return Ok(Quadrature { value: 0.0, error: 0.0, intervals: 0 });
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };

    let mut heap = BinaryHeap::with_capacity(64);
    let mut value = 0.0;
    let mut error = 0.0;
    let width = (hi - lo) / INITIAL_SLICES as f64;
    for i in 0..INITIAL_SLICES {
        let pa = lo + i as f64 * width;
        let pb = if i + 1 == INITIAL_SLICES { hi } else { lo + (i + 1) as f64 * width };
        let (v, e) = gk15(&mut f, pa, pb)?;
        value += v;
        error += e;
        heap.push(Panel { a: pa, b: pb, value: v, error: e });
    }

    while error > atol.max(rtol * value.abs()) {
        if heap.len() >= MAX_INTERVALS {
            return Err(Error::NonConvergence(format!(
                "quadrature used {MAX_INTERVALS} subintervals without reaching \
                 tolerance (value {value:.6e}, error {error:.3e})"
            )));
        }
        let worst = heap.pop().expect("heap holds at least the initial slices");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // The worst panel spans adjacent floats, so no further bisection
            // can shrink the estimate below the requested tolerance.
            return Err(Error::NonConvergence(format!(
                "quadrature hit floating point resolution near {:.6e} with \
                 error {error:.3e} still above tolerance",
                worst.a
            )));
        }
        let (v1, e1) = gk15(&mut f, worst.a, mid)?;
        let (v2, e2) = gk15(&mut f, mid, worst.b)?;
        value += v1 + v2 - worst.value;
        error += e1 + e2 - worst.error;
        heap.push(Panel { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Panel { a: mid, b: worst.b, value: v2, error: e2 });
    }

    // Counter drift from incremental updates: rebuild the sums once.
    let value: f64 = heap.iter().map(|p| p.value).sum();
    let error: f64 = heap.iter().map(|p| p.error).sum::<f64>().abs();
    Ok(Quadrature { value: sign * value, error, intervals: heap.len() })
}

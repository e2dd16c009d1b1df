//! Derivative-free minimization with a quasi-Newton polish.
//!
//! The likelihood surface is smooth but anisotropic and only available
//! through function values, so fitting runs a Nelder-Mead search to get
//! near a minimum and then a BFGS refinement with finite difference
//! gradients to tighten it. Objectives may return non-finite values for
//! infeasible points; those are treated as positively infinite.

/// Outcome of a minimization run.
#[derive(Debug, Clone)]
pub struct OptResult {
    /// Best point found.
    pub x: Vec<f64>,
    /// Objective value at `x`.
    pub value: f64,
    /// Iterations actually used.
    pub iterations: usize,
    /// Whether a convergence test was met before the iteration budget.
    pub converged: bool,
}

fn guarded<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64]) -> f64 {
    let v = f(x);
    if v.is_finite() {
        v
    } else {
        f64::INFINITY
    }
}

/// Classic Nelder-Mead simplex minimization.
///
/// `scale` sets the initial simplex edge along each coordinate; a zero entry
/// falls back to a small absolute step.
pub fn nelder_mead<F: Fn(&[f64]) -> f64>(
    f: F,
    x0: &[f64],
    scale: &[f64],
    max_iter: usize,
) -> OptResult {
    assert_eq!(x0.len(), scale.len(), "scale must match the dimension");
    let n = x0.len();
    assert!(n > 0, "cannot optimize a zero-dimensional point");

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        let step = if scale[i] != 0.0 { scale[i] } else { 1e-3 };
        v[i] += step;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| guarded(&f, v)).collect();

    let (alpha, gamma, beta, delta) = (1.0, 2.0, 0.5, 0.5);
    let mut iterations = 0;
    let mut converged = false;

    while iterations < max_iter {
        iterations += 1;
        // Order the simplex best to worst.
        let mut idx: Vec<usize> = (0..=n).collect();
        idx.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
        let best = idx[0];
        let worst = idx[n];
        let second_worst = idx[n - 1];

        let f_best = values[best];
        let f_worst = values[worst];
        let spread = f_worst - f_best;
        let diameter = simplex
            .iter()
            .map(|v| {
                v.iter()
                    .zip(&simplex[best])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0f64, f64::max)
            })
            .fold(0.0f64, f64::max);
        if (spread.is_finite() && spread <= 1e-10 * (f_best.abs() + 1e-10)) || diameter <= 1e-8 {
            converged = true;
            break;
        }

        let mut centroid = vec![0.0; n];
        for &i in idx.iter().take(n) {
            for k in 0..n {
                centroid[k] += simplex[i][k];
            }
        }
        for c in centroid.iter_mut() {
            *c /= n as f64;
        }

        let point_at = |t: f64| -> Vec<f64> {
            (0..n).map(|k| centroid[k] + t * (centroid[k] - simplex[worst][k])).collect()
        };

        let reflected = point_at(alpha);
        let f_reflected = guarded(&f, &reflected);
        if f_reflected < values[best] {
            let expanded = point_at(gamma);
            let f_expanded = guarded(&f, &expanded);
            if f_expanded < f_reflected {
                simplex[worst] = expanded;
                values[worst] = f_expanded;
            } else {
                simplex[worst] = reflected;
                values[worst] = f_reflected;
            }
        } else if f_reflected < values[second_worst] {
            simplex[worst] = reflected;
            values[worst] = f_reflected;
        } else {
            let (contracted, f_contracted) = if f_reflected < values[worst] {
                let p = point_at(alpha * beta);
                let v = guarded(&f, &p);
                (p, v)
            } else {
                let p = point_at(-beta);
                let v = guarded(&f, &p);
                (p, v)
            };
            if f_contracted < values[worst].min(f_reflected) {
                simplex[worst] = contracted;
                values[worst] = f_contracted;
            } else {
                // Shrink toward the best vertex.
                let anchor = simplex[best].clone();
                for i in 0..=n {
                    if i == best {
                        continue;
                    }
                    for k in 0..n {
                        simplex[i][k] = anchor[k] + delta * (simplex[i][k] - anchor[k]);
                    }
                    values[i] = guarded(&f, &simplex[i]);
                }
            }
        }
    }

    let mut best = 0;
    for i in 1..=n {
        if values[i].total_cmp(&values[best]).is_lt() {
            best = i;
        }
    }
    OptResult { x: simplex.swap_remove(best), value: values[best], iterations, converged }
}

fn fd_gradient<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut pt = x.to_vec();
    for i in 0..x.len() {
        let h = (1e-6 * x[i].abs()).max(1e-9);
        pt[i] = x[i] + h;
        let up = guarded(f, &pt);
        pt[i] = x[i] - h;
        let down = guarded(f, &pt);
        pt[i] = x[i];
        g[i] = if up.is_finite() && down.is_finite() { (up - down) / (2.0 * h) } else { 0.0 };
    }
    g
}

/// BFGS refinement with central finite difference gradients and Armijo
/// backtracking. Intended to start close to a minimum.
pub fn bfgs_polish<F: Fn(&[f64]) -> f64>(f: F, x0: &[f64], max_iter: usize) -> OptResult {
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut fx = guarded(&f, &x);
    if !fx.is_finite() {
        return OptResult { x, value: fx, iterations: 0, converged: false };
    }
    let mut g = fd_gradient(&f, &x);
    // Inverse Hessian approximation, dense row-major identity.
    let mut h = vec![0.0; n * n];
    for i in 0..n {
        h[i * n + i] = 1.0;
    }

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let gnorm = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if gnorm <= 1e-7 * (1.0 + fx.abs()) {
            converged = true;
            break;
        }
        // Direction d = -H g.
        let mut d = vec![0.0; n];
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                s += h[i * n + j] * g[j];
            }
            d[i] = -s;
        }
        let slope: f64 = d.iter().zip(&g).map(|(a, b)| a * b).sum();
        if slope >= 0.0 {
            // Reset to steepest descent if curvature information went bad.
            for i in 0..n {
                for j in 0..n {
                    h[i * n + j] = if i == j { 1.0 } else { 0.0 };
                }
                d[i] = -g[i];
            }
        }
        let slope: f64 = d.iter().zip(&g).map(|(a, b)| a * b).sum();

        let mut t = 1.0;
        let mut accepted = false;
        let mut x_new = x.clone();
        let mut f_new = fx;
        for _ in 0..40 {
            for i in 0..n {
                x_new[i] = x[i] + t * d[i];
            }
            f_new = guarded(&f, &x_new);
            if f_new <= fx + 1e-4 * t * slope {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted || f_new >= fx {
            // No descent achievable along this direction at any step size:
            // the point is as good as the gradient model can make it.
            converged = true;
            break;
        }

        let g_new = fd_gradient(&f, &x_new);
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        let ss = s.iter().map(|v| v * v).sum::<f64>().sqrt();
        let yy = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if sy > 1e-10 * ss * yy {
            // Standard BFGS inverse update.
            let rho = 1.0 / sy;
            let mut hy = vec![0.0; n];
            for i in 0..n {
                let mut acc = 0.0;
                for j in 0..n {
                    acc += h[i * n + j] * y[j];
                }
                hy[i] = acc;
            }
            let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
            for i in 0..n {
                for j in 0..n {
                    h[i * n + j] += rho * rho * (sy + yhy) * s[i] * s[j]
                        - rho * (hy[i] * s[j] + s[i] * hy[j]);
                }
            }
        }
        x = x_new;
        fx = f_new;
        g = g_new;
        if ss <= 1e-12 * (1.0 + x.iter().fold(0.0f64, |m, v| m.max(v.abs()))) {
            converged = true;
            break;
        }
    }
    OptResult { x, value: fx, iterations, converged }
}

/// Nelder-Mead followed by a BFGS polish.
pub fn minimize<F: Fn(&[f64]) -> f64>(f: F, x0: &[f64], scale: &[f64]) -> OptResult {
    let coarse = nelder_mead(&f, x0, scale, 2000);
    let fine = bfgs_polish(&f, &coarse.x, 200);
    if fine.value <= coarse.value {
        OptResult {
            x: fine.x,
            value: fine.value,
            iterations: coarse.iterations + fine.iterations,
            converged: coarse.converged || fine.converged,
        }
    } else {
        coarse
    }
}

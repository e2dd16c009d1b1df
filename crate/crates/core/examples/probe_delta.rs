use ssalt_core::fixtures::{aluminum_mle, reference_plan};
use ssalt_core::model::{ig_cdf, ig_pdf, stress_ratio, use_level_drifts};
use ssalt_core::planner::{percentile, sensitivity_vector};

fn main() {
    let theta = aluminum_mle();
    let plan = reference_plan(400.0);
    let alpha = stress_ratio(&plan).unwrap();
    let (mu0, _) = use_level_drifts(&theta, alpha).unwrap();
    let xi = percentile(0.1, mu0, theta.sigma_x2, plan.threshold).unwrap();
    let f = ig_pdf(xi, mu0, theta.sigma_x2, plan.threshold).unwrap();
    let h = 1e-4 * xi;
    let fd = (ig_cdf(xi + h, mu0, theta.sigma_x2, plan.threshold).unwrap()
        - ig_cdf(xi - h, mu0, theta.sigma_x2, plan.threshold).unwrap())
        / (2.0 * h);
    println!("pdf vs dG/dt at xi={xi:.4}: pdf={f:.10e} fd={fd:.10e} rel={:.3e}", (f - fd).abs() / fd.abs());

    // Direct gradient of the percentile through the chain, against -H/f.
    let hv = sensitivity_vector(xi, &theta, alpha, &plan).unwrap();
    let (m1, m2, s) = (theta.mu_x[0], theta.mu_x[1], theta.sigma_x2);
    let xi_of = |mu1: f64, mu2: f64, sv: f64| -> f64 {
        let m0 = ((mu1.ln() - alpha * mu2.ln()) / (1.0 - alpha)).exp();
        percentile(0.1, m0, sv, plan.threshold).unwrap()
    };
    for (idx, name, base) in [(0usize, "mu1", m1), (1, "mu2", m2), (4, "sigma", s)] {
        let hstep = 1e-6 * base;
        let (a, b) = match idx {
            0 => (xi_of(base + hstep, m2, s), xi_of(base - hstep, m2, s)),
            1 => (xi_of(m1, base + hstep, s), xi_of(m1, base - hstep, s)),
            _ => (xi_of(m1, m2, base + hstep), xi_of(m1, m2, base - hstep)),
        };
        let fd_xi = (a - b) / (2.0 * hstep);
        let pred = -hv[idx] / f;
        println!("{name}: fd dxi = {fd_xi:.6e}  -H/f = {pred:.6e}  rel={:.3e}", (fd_xi - pred).abs() / pred.abs().max(1e-300));
    }

    // Exact versus linearized propagation on identical draws.
    use nalgebra::{DMatrix, DVector};
    use rand::Rng;
    use rand_distr::StandardNormal;
    use ssalt_core::fisher::fisher_matrix;
    use ssalt_core::rng::StreamRng;

    let n = 2900usize;
    let mut plan_tau = plan.clone();
    plan_tau.change_times[0] = 570.66;
    let info = fisher_matrix(&theta, &plan_tau, n).unwrap();
    let m = DMatrix::from_fn(7, 7, |r, c| 0.5 * (info.matrix[r][c] + info.matrix[c][r]));
    let cov = m.clone().try_inverse().unwrap();
    let chol = nalgebra::Cholesky::new(0.5 * (&cov + cov.transpose())).unwrap();
    let grad = DVector::from_row_slice(&[-hv[0] / f, -hv[1] / f, 0.0, 0.0, -hv[4] / f, 0.0, 0.0]);
    let predicted = grad.dot(&(&cov * &grad));
    println!("\nn={n}: predicted avar = {predicted:.6e}");
    for seed in [1u64, 2, 3] {
        let mut rng = StreamRng::from_path(0x64656c74, &[seed]);
        let mut exact = Vec::new();
        let mut lin = Vec::new();
        for _ in 0..4000 {
            let z = DVector::from_fn(7, |_, _| rng.sample::<f64, _>(StandardNormal));
            let dev = chol.l() * z;
            let mu1 = m1 + dev[0];
            let mu2 = m2 + dev[1];
            let sv = s + dev[4];
            if !(mu1 > 0.0 && mu2 > 0.0 && sv > 0.0) {
                continue;
            }
            exact.push(xi_of(mu1, mu2, sv));
            lin.push(xi + grad.dot(&dev));
        }
        let var = |v: &[f64]| {
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64
        };
        println!(
            "seed {seed}: kept={} var_exact={:.4e} var_lin={:.4e} ratios {:.4} / {:.4}",
            exact.len(),
            var(&exact),
            var(&lin),
            var(&exact) / predicted,
            var(&lin) / predicted
        );
    }
}

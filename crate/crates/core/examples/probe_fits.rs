use ssalt_core::fixtures::{reference_link_theta, reference_plan, simulated_dataset};
use ssalt_core::likelihood::{fit_mle, log_likelihood, Parameterization};
use ssalt_core::model::{link_to_natural, stress_ratio, use_level_drifts};
use ssalt_core::planner::percentile;
use ssalt_core::rng::StreamRng;
use ssalt_core::simulate::simulate_dataset;

fn main() {
    let plan = reference_plan(400.0);
    let truth = link_to_natural(&reference_link_theta(), &plan).unwrap();
    let alpha = stress_ratio(&plan).unwrap();
    println!(
        "truth: mux=({:.6e},{:.6e}) muy=({:.6e},{:.6e}) sx2={:.6e} sy2={:.6e} rho={:.4}",
        truth.mu_x[0], truth.mu_x[1], truth.mu_y[0], truth.mu_y[1], truth.sigma_x2, truth.sigma_y2, truth.rho
    );
    let ll_truth_label = "logL(truth)";

    for r in 0..8u64 {
        let parent = StreamRng::from_path(0x706c616e, &[r]);
        let ds = simulate_dataset(30, &truth, &plan, &parent).unwrap();
        let l0 = log_likelihood(&truth, &ds).unwrap();
        let fit = fit_mle(&ds, Parameterization::LinkSpace, None, r).unwrap();
        let hat = &fit.theta_hat;
        let l1 = log_likelihood(hat, &ds).unwrap();
        let fit_mu = fit_mle(&ds, Parameterization::MuSpace, None, r).unwrap();
        let hatm = &fit_mu.theta_hat;
        let l2 = log_likelihood(hatm, &ds).unwrap();
        let (mu0, _) = use_level_drifts(hat, alpha).unwrap_or((f64::NAN, f64::NAN));
        let xi = percentile(0.5, mu0, hat.sigma_x2, plan.threshold).unwrap_or(f64::NAN);
        let (mu0m, _) = use_level_drifts(hatm, alpha).unwrap_or((f64::NAN, f64::NAN));
        let xim = percentile(0.5, mu0m, hatm.sigma_x2, plan.threshold).unwrap_or(f64::NAN);
        println!(
            "rep {r}: {ll_label}={l0:.3} link: logL={l1:.3} mux=({:.3e},{:.3e}) xi={xi:.1} | mu: logL={l2:.3} mux=({:.3e},{:.3e}) xi={xim:.1}",
            hat.mu_x[0], hat.mu_x[1], hatm.mu_x[0], hatm.mu_x[1],
            ll_label = ll_truth_label,
        );
        if let Some(link) = &fit.theta_link_hat {
            println!(
                "        link params: a={:.3} b={:.1} c={:.3} d={:.1}",
                link.a, link.b, link.c, link.d
            );
        }
    }
}

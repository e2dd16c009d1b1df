use ssalt_core::bayes::{rw_mh, summarize_chain, BayesConfig};
use ssalt_core::fixtures::{reference_link_theta, simulated_dataset};
use ssalt_core::likelihood::{fit_mle, Parameterization};

fn report(tag: &str, chain: &ssalt_core::bayes::Chain) {
    let s = summarize_chain(chain).unwrap();
    println!(
        "{tag}: rate {:.3} | a {:+.4} b {:+.1} c {:+.4} d {:+.1} | sx2 {:.7} sy2 {:.7} rho {:.5}",
        chain.acceptance_rate(),
        s.mean[0],
        s.mean[1],
        s.mean[2],
        s.mean[3],
        s.mean[4],
        s.mean[5],
        s.mean[6]
    );
    println!(
        "      std: b {:.1} d {:.1} sx2 {:.2e} sy2 {:.2e} rho {:.4}",
        s.std[1], s.std[3], s.std[4], s.std[5], s.std[6]
    );
}

fn main() {
    let ds = simulated_dataset(400);
    let mle = fit_mle(&ds, Parameterization::LinkSpace, None, 17).unwrap();
    let mle_link = mle.theta_link_hat.unwrap();
    println!(
        "MLE init: a {:+.3} b {:+.1} c {:+.3} d {:+.1} sx2 {:.6} sy2 {:.6} rho {:.4}",
        mle_link.a, mle_link.b, mle_link.c, mle_link.d, mle_link.sigma_x2, mle_link.sigma_y2, mle_link.rho
    );

    let truth = reference_link_theta();

    for (tag, init, total, burn) in [
        ("mle   50k", &mle_link, 50_000usize, 10_000usize),
        ("mle  150k", &mle_link, 150_000, 50_000),
        ("truth 50k", &truth, 50_000, 10_000),
        ("truth150k", &truth, 150_000, 50_000),
    ] {
        let cfg = BayesConfig { total, burn_in: burn, ..BayesConfig::default() };
        let t0 = std::time::Instant::now();
        let chain = rw_mh(&ds, init, &cfg, 2024).unwrap();
        println!("--- {tag} ({:?})", t0.elapsed());
        report(tag, &chain);
        // Last-quarter means show where the chain is heading.
        let q = chain.draws.len() / 4;
        let tail = &chain.draws[3 * q..];
        let n = tail.len() as f64;
        let mb = tail.iter().map(|r| r[1]).sum::<f64>() / n;
        let mrho = tail.iter().map(|r| r[6]).sum::<f64>() / n;
        let msx = tail.iter().map(|r| r[4]).sum::<f64>() / n;
        println!("      tail quarter: b {mb:+.1} sx2 {msx:.7} rho {mrho:.5}");
    }
}

use nalgebra::{DMatrix, DVector};
use ssalt_core::fisher::{fisher_matrix, varphi, zeta};
use ssalt_core::fixtures::{aluminum_mle, reference_link_theta, reference_plan};
use ssalt_core::likelihood::{fit_mle, Parameterization};
use ssalt_core::model::{
    category_probabilities, ig_pdf, link_to_natural, stress_ratio, use_level_drifts,
};
use ssalt_core::planner::{avar, percentile, sensitivity_vector};
use ssalt_core::rng::StreamRng;
use ssalt_core::simulate::simulate_dataset;
use ssalt_core::{StressPlan, ThetaNatural};

fn with_tau(plan: &StressPlan, tau: f64) -> StressPlan {
    let mut p = plan.clone();
    p.change_times[0] = tau;
    p
}

fn neg_alpha(theta: &ThetaNatural) -> [f64; 3] {
    let s = theta.sigma_x2;
    let w = theta.sigma_y2;
    let rho = theta.rho;
    let omr = 1.0 - rho * rho;
    [
        1.0 / (2.0 * s * s),
        1.0 / (2.0 * w * w),
        (1.0 + rho * rho) / (omr * omr),
    ]
}

fn channels(theta: &ThetaNatural, plan: &StressPlan) -> ([[f64; 7]; 7], [[f64; 7]; 7], [[f64; 7]; 7]) {
    let mut z1 = [[0.0; 7]; 7];
    let mut z2 = [[0.0; 7]; 7];
    let mut ph = [[0.0; 7]; 7];
    for r in 1..=7 {
        for s in r..=7 {
            let a = zeta(1, r, s, theta, plan).unwrap();
            let b = zeta(2, r, s, theta, plan).unwrap();
            let c = varphi(r, s, theta, plan).unwrap();
            z1[r - 1][s - 1] = a;
            z1[s - 1][r - 1] = a;
            z2[r - 1][s - 1] = b;
            z2[s - 1][r - 1] = b;
            ph[r - 1][s - 1] = c;
            ph[s - 1][r - 1] = c;
        }
    }
    (z1, z2, ph)
}

fn avar_of(info: &[[f64; 7]; 7], h: &[f64; 7], f: f64) -> f64 {
    let m = DMatrix::from_fn(7, 7, |r, c| info[r][c]);
    let hv = DVector::from_row_slice(h);
    match m.lu().solve(&hv) {
        Some(x) => hv.dot(&x) / (f * f),
        None => f64::INFINITY,
    }
}

fn main() {
    let theta = aluminum_mle();
    let plan0 = reference_plan(400.0);
    let alpha = stress_ratio(&plan0).unwrap();
    let (mu0, _) = use_level_drifts(&theta, alpha).unwrap();
    let n = 29.0;

    let p = 0.1;
    let xi = percentile(p, mu0, theta.sigma_x2, plan0.threshold).unwrap();
    let h = sensitivity_vector(xi, &theta, alpha, &plan0).unwrap();
    let f = ig_pdf(xi, mu0, theta.sigma_x2, plan0.threshold).unwrap();
    println!("xi_0.1 = {xi:.4}  f = {f:.6e}  H = {h:?}");

    let tau = 570.66;
    let plan = with_tau(&plan0, tau);
    let probs = category_probabilities(&theta, &plan).unwrap();
    let (p1, p2) = (probs[0], probs[1]);
    let qs = probs[2];
    println!("tau=570.66: p1={p1:.6} p2={p2:.6} qs={qs:.6}");

    let (z1, z2, ph) = channels(&theta, &plan);
    let na = neg_alpha(&theta);

    // Variant assemblies of the information matrix at one candidate design.
    // kind 0: the corrected assembly the library uses.
    // kind 1: curvature prefactor weighted by n*p1*G1(tau) = n*p1^2.
    // kind 2: whole matrix scaled by the total failure mass.
    // kind 5: squared-mass weights on the conditional channels.
    // kind 6: censored channel dropped.
    let assemble = |kind: u32, tau: f64| -> [[f64; 7]; 7] {
        let plan_tau = with_tau(&plan0, tau);
        let probs = category_probabilities(&theta, &plan_tau).unwrap();
        let (p1, p2, qs) = (probs[0], probs[1], probs[2]);
        let (z1, z2, ph) = channels(&theta, &plan_tau);
        let na = neg_alpha(&theta);
        let mut m = [[0.0; 7]; 7];
        let (w1, w2, wc) = match kind {
            5 => (p1 * p1, p2 * p2, qs * qs),
            6 | 9 => (p1, p2, 0.0),
            _ => (p1, p2, qs),
        };
        for r in 0..7 {
            for c in 0..7 {
                m[r][c] = n * (w1 * z1[r][c] + w2 * z2[r][c] + wc * ph[r][c]);
            }
        }
        let aw = match kind {
            1 => p1 * p1,
            7 | 9 => 0.0,
            _ => p1 + p2,
        };
        for (i, a) in na.iter().enumerate() {
            m[4 + i][4 + i] -= n * aw * a;
        }
        if kind == 2 {
            for r in 0..7 {
                for c in 0..7 {
                    m[r][c] *= p1 + p2;
                }
            }
        }
        m
    };

    let v0 = assemble(0, tau);
    let lib = fisher_matrix(&theta, &plan, 29).unwrap();
    let mut max_rel: f64 = 0.0;
    for r in 0..7 {
        for c in 0..7 {
            let d = (v0[r][c] - lib.matrix[r][c]).abs();
            let s = lib.matrix[r][c].abs().max(1e-300);
            max_rel = max_rel.max(d / s);
        }
    }
    println!("probe assembly vs fisher_matrix max rel diff = {max_rel:.3e}");

    println!("\nvariant tau profiles, p=0.1 (cv shown):");
    let taus = [520.0, 535.0, 550.0, 560.0, 570.66, 575.0, 585.0, 600.0];
    for kind in [0u32, 1, 2, 5, 6, 7, 9] {
        print!("  kind {kind}:");
        for &t in &taus {
            let m = assemble(kind, t);
            let a = avar_of(&m, &h, f);
            print!(" {t:.0}:{:.4}", a.sqrt() / xi);
        }
        println!();
    }

    // The same profiles at the median level for the most promising variants.
    let p5 = 0.5;
    let xi5 = percentile(p5, mu0, theta.sigma_x2, plan0.threshold).unwrap();
    let h5 = sensitivity_vector(xi5, &theta, alpha, &plan0).unwrap();
    let f5 = ig_pdf(xi5, mu0, theta.sigma_x2, plan0.threshold).unwrap();
    println!("\nlibrary avar profiles across p (cv shown):");
    for (pp, xx, hh, ff) in [(0.1, xi, h, f), (0.5, xi5, h5, f5)] {
        print!("  p={pp}:");
        for t in [440.0, 470.0, 500.0, 520.0, 535.0, 545.0, 555.0, 565.0, 580.0, 600.0, 620.0] {
            let a = avar(t, pp, &theta, &plan0, 29).unwrap();
            print!(" {t:.0}:{:.4}", a.sqrt() / xx);
        }
        println!();
        let _ = (hh, ff);
    }
    let xi9 = percentile(0.9, mu0, theta.sigma_x2, plan0.threshold).unwrap();
    print!("  p=0.9 (xi={xi9:.1}):");
    for t in [440.0, 470.0, 500.0, 520.0, 535.0, 545.0, 555.0, 565.0, 580.0, 600.0, 620.0] {
        let a = avar(t, 0.9, &theta, &plan0, 29).unwrap();
        print!(" {t:.0}:{:.4}", a.sqrt() / xi9);
    }
    println!();

    // Where does the avar actually live on the grid?
    println!("\ngrid scan p=0.1:");
    for tau in [1.0, 12.0, 56.0, 100.0, 200.0, 300.0, 400.0, 500.0, 550.0, 570.66, 600.0, 650.0, 690.0, 699.0] {
        let a = avar(tau, p, &theta, &plan0, 29);
        let pr = category_probabilities(&theta, &with_tau(&plan0, tau)).unwrap();
        match a {
            Ok(v) => println!("  tau={tau:7.2}  avar={v:.6e}  cv={:.4}  p1={:.3e} p2={:.3e}", v.sqrt() / xi, pr[0], pr[1]),
            Err(e) => println!("  tau={tau:7.2}  ERR {e}"),
        }
    }

    // Raw quadratic-form sign at tau=1.
    let plan_edge = with_tau(&plan0, 1.0);
    if let Ok(info) = fisher_matrix(&theta, &plan_edge, 29) {
        let m = DMatrix::from_fn(7, 7, |r, c| info.matrix[r][c]);
        let hv = DVector::from_row_slice(&h);
        if let Some(x) = m.clone().lu().solve(&hv) {
            println!("tau=1: H'I^-1H = {:.6e}  I11={:.6e}  I55={:.6e}", hv.dot(&x), info.matrix[0][0], info.matrix[4][4]);
        } else {
            println!("tau=1: singular");
        }
        let eig = m.symmetric_eigenvalues();
        println!("tau=1 eigen min/max: {:.3e} / {:.3e}", eig.min(), eig.max());
    } else {
        println!("tau=1: fisher error");
    }

}

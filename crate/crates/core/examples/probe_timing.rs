use std::time::Instant;
use ssalt_core::fixtures::{aluminum_mle, reference_plan};
use ssalt_core::planner::avar;

fn main() {
    let theta = aluminum_mle();
    let plan = reference_plan(400.0);
    for tau in [23.0, 34.0, 45.0, 56.0, 67.0, 78.0, 100.0, 200.0, 400.0, 570.66, 680.0, 699.0] {
        let t0 = Instant::now();
        let a = avar(tau, 0.1, &theta, &plan, 29);
        println!("tau={tau:7.2}  {:>10.3?}  {a:?}", t0.elapsed());
    }
}

//! Embedded reference inputs.
//!
//! Small datasets and parameter sets used by tests and available to the
//! CLI as ready-made examples: three simulated two level datasets (one per
//! stress change time), a real marker dataset from aluminum reduction
//! cells, and the parameter values that pair with them.

use crate::data::Dataset;
use crate::io;
use crate::params::{ThetaLink, ThetaNatural};
use crate::plan::StressPlan;

const SIM_TAU300: &str = include_str!("../data/sim_tau300.csv");
const SIM_TAU400: &str = include_str!("../data/sim_tau400.csv");
const SIM_TAU500: &str = include_str!("../data/sim_tau500.csv");
const ALUMINUM: &str = include_str!("../data/aluminum.csv");

/// Link scale parameters used to generate the simulated datasets.
pub fn reference_link_theta() -> ThetaLink {
    ThetaLink::new(
        -2.817991,
        -4996.008,
        -1.644788,
        -4995.996,
        0.001729986,
        0.0020806801,
        0.5893698756,
    )
    .expect("reference link parameters are valid")
}

/// The two level plan shared by the embedded datasets: use level 950,
/// accelerated levels 1200 and 1400, censoring at 700, threshold 1.
///
/// Panics if `tau` is outside (0, 700).
pub fn reference_plan(tau: f64) -> StressPlan {
    StressPlan::two_level(950.0, 1200.0, 1400.0, tau, 700.0, 1.0)
        .expect("change time must lie strictly inside (0, 700)")
}

/// One of the three embedded simulated datasets, keyed by its stress
/// change time (300, 400, or 500).
///
/// Panics for any other key.
pub fn simulated_dataset(tau: u32) -> Dataset {
    let text = match tau {
        300 => SIM_TAU300,
        400 => SIM_TAU400,
        500 => SIM_TAU500,
        other => panic!("no embedded simulated dataset with change time {other}"),
    };
    io::parse_dataset_str(text, None)
        .expect("embedded dataset parses")
        .dataset
}

/// Failure ages and horizontal distortion of 29 aluminum reduction cells,
/// mapped onto the reference plan with change time 400. All cells failed.
pub fn aluminum_dataset() -> Dataset {
    io::parse_dataset_str(ALUMINUM, None)
        .expect("embedded dataset parses")
        .dataset
}

/// Drift scale estimates for the aluminum data under the reference plan,
/// with the scale entries read as variances.
pub fn aluminum_mle() -> ThetaNatural {
    ThetaNatural::new(
        vec![0.0005, 0.0007],
        vec![0.0005, 0.0006],
        0.0011,
        0.0188,
        0.9422,
    )
    .expect("aluminum estimates are valid")
}

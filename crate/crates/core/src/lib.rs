//! Core library for a bivariate Wiener degradation model observed under a
//! step-stress accelerated life test.
//!
//! A latent degradation process decides failure by first passage over a
//! threshold while a correlated marker process is what the experimenter
//! actually records. Stress is raised at scheduled change times, which bends
//! the drift of both processes piecewise. The crate covers the full loop:
//!
//! * exact simulation of failure times and markers ([`simulate`]),
//! * maximum likelihood fitting ([`likelihood`]),
//! * posterior sampling by random walk Metropolis within Gibbs ([`bayes`]),
//! * the expected (Fisher) information matrix in closed form ([`fisher`]),
//! * optimal choice of the stress change time ([`planner`]).

pub mod bayes;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod fisher;
pub mod fixtures;
pub mod io;
pub mod likelihood;
pub mod model;
pub mod normal;
pub mod opt;
pub mod params;
pub mod plan;
pub mod planner;
pub mod quad;
pub mod rng;
pub mod simulate;

pub use error::Error;
pub use params::{ThetaLink, ThetaNatural};
pub use plan::StressPlan;

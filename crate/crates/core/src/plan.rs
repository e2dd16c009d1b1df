//! Step stress test plans.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Layout of a step stress experiment.
///
/// Items start under `stresses[0]` and the stress is raised to level
/// `stresses[j]` at `change_times[j - 1]`. Observation stops at
/// `censor_time`; an item fails when its latent degradation first reaches
/// `threshold`. `use_stress` is the normal operating level that estimation
/// ultimately extrapolates to.
///
/// Throughout the crate the change times are bracketed by the conventions
/// τ_0 = 0 and τ_m = C, giving m left-open pieces (τ_{j-1}, τ_j].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StressPlan {
    /// Accelerated stress levels S_1 < ... < S_m in degrees Celsius.
    pub stresses: Vec<f64>,
    /// Normal use level S_0, strictly below S_1.
    pub use_stress: f64,
    /// Stress change times τ_1 < ... < τ_{m-1}, all inside (0, C).
    pub change_times: Vec<f64>,
    /// Censoring time C.
    pub censor_time: f64,
    /// Failure threshold D of the degradation process.
    pub threshold: f64,
}

impl StressPlan {
    /// Build and validate a plan.
    pub fn new(
        stresses: Vec<f64>,
        use_stress: f64,
        change_times: Vec<f64>,
        censor_time: f64,
        threshold: f64,
    ) -> Result<Self> {
        let plan = StressPlan { stresses, use_stress, change_times, censor_time, threshold };
        plan.validate()?;
        Ok(plan)
    }

    /// Convenience constructor for the common two level design.
    pub fn two_level(
        use_stress: f64,
        stress1: f64,
        stress2: f64,
        change_time: f64,
        censor_time: f64,
        threshold: f64,
    ) -> Result<Self> {
        StressPlan::new(
            vec![stress1, stress2],
            use_stress,
            vec![change_time],
            censor_time,
            threshold,
        )
    }

    /// Check every structural invariant, reporting the first violation.
    pub fn validate(&self) -> Result<()> {
        let m = self.stresses.len();
        if m == 0 {
            return Err(Error::Plan("at least one stress level is required".into()));
        }
        if self.change_times.len() != m - 1 {
            return Err(Error::Plan(format!(
                "{} stress levels need {} change times, got {}",
                m,
                m - 1,
                self.change_times.len()
            )));
        }
        if !self.censor_time.is_finite() || self.censor_time <= 0.0 {
            return Err(Error::Plan(format!(
                "censor time must be positive and finite, got {}",
                self.censor_time
            )));
        }
        if !self.threshold.is_finite() || self.threshold <= 0.0 {
            return Err(Error::Plan(format!(
                "threshold must be positive and finite, got {}",
                self.threshold
            )));
        }
        let mut prev = self.use_stress;
        if !prev.is_finite() {
            return Err(Error::Plan("use stress must be finite".into()));
        }
        for (j, &s) in self.stresses.iter().enumerate() {
            if !s.is_finite() || s <= prev {
                return Err(Error::Plan(format!(
                    "stress levels must be finite and strictly increasing above the \
                     use level; level {} (= {s}) violates that",
                    j + 1
                )));
            }
            prev = s;
        }
        let mut prev_tau = 0.0;
        for (j, &tau) in self.change_times.iter().enumerate() {
            if !tau.is_finite() || tau <= prev_tau || tau >= self.censor_time {
                return Err(Error::Plan(format!(
                    "change times must be strictly increasing inside (0, {}); \
                     τ_{} (= {tau}) violates that",
                    self.censor_time,
                    j + 1
                )));
            }
            prev_tau = tau;
        }
        Ok(())
    }

    /// Number of stress levels m.
    pub fn m(&self) -> usize {
        self.stresses.len()
    }

    /// Piece boundary τ_j for j = 0..=m, with τ_0 = 0 and τ_m = C.
    pub fn boundary(&self, j: usize) -> f64 {
        if j == 0 {
            0.0
        } else if j >= self.m() {
            self.censor_time
        } else {
            self.change_times[j - 1]
        }
    }

    /// The 1-based piece holding time `t` under the (τ_{j-1}, τ_j]
    /// convention: a time exactly at a change point belongs to the earlier
    /// piece, and t = C belongs to piece m.
    pub fn piece_of(&self, t: f64) -> Result<usize> {
        if !t.is_finite() || t <= 0.0 || t > self.censor_time {
            return Err(Error::Domain(format!(
                "time {t} is outside the observation window (0, {}]",
                self.censor_time
            )));
        }
        for j in 1..self.m() {
            if t <= self.change_times[j - 1] {
                return Ok(j);
            }
        }
        Ok(self.m())
    }

    /// Replace the single change time of a two level plan, keeping the rest.
    pub fn with_change_time(&self, tau: f64) -> Result<StressPlan> {
        if self.m() != 2 {
            return Err(Error::Unsupported(format!(
                "change-time substitution needs a two level plan, this one has {} levels",
                self.m()
            )));
        }
        StressPlan::new(
            self.stresses.clone(),
            self.use_stress,
            vec![tau],
            self.censor_time,
            self.threshold,
        )
    }
}

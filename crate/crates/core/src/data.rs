//! Observed outcomes and datasets.

use crate::error::{Error, Result};
use crate::plan::StressPlan;
use serde::{Deserialize, Serialize};

/// One tested item: either a failure inside some stress piece, with the
/// marker read at the failure time, or survival to the censoring time, with
/// the marker read there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Observation {
    Failed {
        /// 1-based index of the stress piece the failure time falls in.
        piece: usize,
        /// Failure time inside (τ_{piece-1}, τ_piece].
        time: f64,
        /// Marker level at the failure time.
        marker: f64,
    },
    Censored {
        /// Marker level at the censoring time.
        marker: f64,
    },
}

impl Observation {
    /// Wire code δ: the piece index for a failure, m + 1 for a censored item.
    pub fn delta(&self, m: usize) -> usize {
        match self {
            Observation::Failed { piece, .. } => *piece,
            Observation::Censored { .. } => m + 1,
        }
    }

    /// The recorded time: failure time, or the censoring time of `plan`.
    pub fn time(&self, plan: &StressPlan) -> f64 {
        match self {
            Observation::Failed { time, .. } => *time,
            Observation::Censored { .. } => plan.censor_time,
        }
    }

    /// The recorded marker level.
    pub fn marker(&self) -> f64 {
        match self {
            Observation::Failed { marker, .. } | Observation::Censored { marker } => *marker,
        }
    }

    /// Decode a wire triple (δ, t, y) against a plan.
    pub fn from_wire(plan: &StressPlan, delta: usize, time: f64, marker: f64) -> Result<Self> {
        let m = plan.m();
        if !marker.is_finite() {
            return Err(Error::Domain(format!("marker must be finite, got {marker}")));
        }
        if delta == m + 1 {
            return Ok(Observation::Censored { marker });
        }
        if delta == 0 || delta > m {
            return Err(Error::Domain(format!(
                "δ = {delta} is outside 1..={} for a {m}-level plan",
                m + 1
            )));
        }
        let obs = Observation::Failed { piece: delta, time, marker };
        obs.check_against(plan)?;
        Ok(obs)
    }

    /// Verify the observation is representable under `plan`.
    pub fn check_against(&self, plan: &StressPlan) -> Result<()> {
        match self {
            Observation::Censored { marker } => {
                if !marker.is_finite() {
                    return Err(Error::Domain("censored marker must be finite".into()));
                }
            }
            Observation::Failed { piece, time, marker } => {
                if !marker.is_finite() {
                    return Err(Error::Domain("failure marker must be finite".into()));
                }
                let m = plan.m();
                if *piece == 0 || *piece > m {
                    return Err(Error::Domain(format!(
                        "piece {piece} is outside 1..={m}"
                    )));
                }
                let lo = plan.boundary(piece - 1);
                let hi = plan.boundary(*piece);
                if !time.is_finite() || *time <= lo || *time > hi {
                    return Err(Error::Domain(format!(
                        "failure time {time} is outside piece {piece}'s interval ({lo}, {hi}]"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A plan together with the outcomes observed under it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub plan: StressPlan,
    pub observations: Vec<Observation>,
}

impl Dataset {
    /// Build a dataset, validating every observation against the plan.
    pub fn new(plan: StressPlan, observations: Vec<Observation>) -> Result<Self> {
        plan.validate()?;
        for (i, obs) in observations.iter().enumerate() {
            obs.check_against(&plan)
                .map_err(|e| Error::Domain(format!("observation {i}: {e}")))?;
        }
        Ok(Dataset { plan, observations })
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// Failure counts per piece (ν_1..ν_m).
    pub fn failure_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.plan.m()];
        for obs in &self.observations {
            if let Observation::Failed { piece, .. } = obs {
                counts[piece - 1] += 1;
            }
        }
        counts
    }

    /// Number of censored items.
    pub fn censored_count(&self) -> usize {
        self.observations
            .iter()
            .filter(|o| matches!(o, Observation::Censored { .. }))
            .count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan() -> StressPlan {
        StressPlan::two_level(950.0, 1200.0, 1400.0, 400.0, 700.0, 1.0).unwrap()
    }

    #[test]
    fn wire_codes_round_trip() {
        let p = plan();
        let failed = Observation::from_wire(&p, 1, 350.0, 2.5).unwrap();
        assert_eq!(failed.delta(p.m()), 1);
        assert_eq!(failed.time(&p), 350.0);
        let censored = Observation::from_wire(&p, 3, 700.0, 4.0).unwrap();
        assert_eq!(censored.delta(p.m()), 3);
        assert_eq!(censored.time(&p), 700.0, "censored items carry the censor time");
    }

    #[test]
    fn boundary_times_belong_to_the_earlier_piece() {
        let p = plan();
        assert!(Observation::from_wire(&p, 1, 400.0, 1.0).is_ok());
        assert!(
            Observation::from_wire(&p, 2, 400.0, 1.0).is_err(),
            "a failure exactly at τ must carry the earlier piece index"
        );
        assert!(Observation::from_wire(&p, 2, 700.0, 1.0).is_ok());
    }

    #[test]
    fn invalid_wire_rows_are_rejected() {
        let p = plan();
        assert!(Observation::from_wire(&p, 0, 10.0, 1.0).is_err());
        assert!(Observation::from_wire(&p, 4, 10.0, 1.0).is_err());
        assert!(Observation::from_wire(&p, 1, 450.0, 1.0).is_err(), "time outside piece 1");
        assert!(Observation::from_wire(&p, 2, 300.0, 1.0).is_err(), "time outside piece 2");
        assert!(Observation::from_wire(&p, 1, f64::NAN, 1.0).is_err());
        assert!(Observation::from_wire(&p, 1, 10.0, f64::INFINITY).is_err());
    }

    #[test]
    fn dataset_counts_pieces_and_censoring() {
        let p = plan();
        let data = Dataset::new(
            p.clone(),
            vec![
                Observation::Failed { piece: 1, time: 100.0, marker: 1.0 },
                Observation::Failed { piece: 2, time: 500.0, marker: 2.0 },
                Observation::Failed { piece: 2, time: 600.0, marker: 2.5 },
                Observation::Censored { marker: 3.0 },
            ],
        )
        .unwrap();
        assert_eq!(data.failure_counts(), vec![1, 2]);
        assert_eq!(data.censored_count(), 1);
        assert_eq!(data.len(), 4);
    }

    #[test]
    fn dataset_rejects_inconsistent_observations() {
        let p = plan();
        let bad = Dataset::new(
            p,
            vec![Observation::Failed { piece: 1, time: 450.0, marker: 1.0 }],
        );
        assert!(bad.is_err(), "a time outside its declared piece must be rejected");
    }
}

//! Parameter vectors in the two standard coordinate systems.
//!
//! The natural vector θ carries one drift per stress level for each of the
//! two processes plus the shared variance rates and correlation. The link
//! vector θ* replaces the per-level drifts by the four coefficients of the
//! temperature model that generates them. For a two level plan both have
//! seven coordinates and the fixed index order
//! (μ_X1, μ_X2, μ_Y1, μ_Y2, σ_X², σ_Y², ρ) respectively
//! (a, b, c, d, σ_X², σ_Y², ρ).

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Temperature-model parameterization (a, b, c, d, σ_X², σ_Y², ρ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaLink {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub sigma_x2: f64,
    pub sigma_y2: f64,
    pub rho: f64,
}

impl ThetaLink {
    pub fn new(a: f64, b: f64, c: f64, d: f64, sigma_x2: f64, sigma_y2: f64, rho: f64) -> Result<Self> {
        let theta = ThetaLink { a, b, c, d, sigma_x2, sigma_y2, rho };
        theta.validate()?;
        Ok(theta)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("a", self.a), ("b", self.b), ("c", self.c), ("d", self.d)] {
            if !v.is_finite() {
                return Err(Error::Theta(format!("coefficient {name} must be finite, got {v}")));
            }
        }
        validate_scale_block(self.sigma_x2, self.sigma_y2, self.rho)
    }

    /// The seven coordinates in their fixed order.
    pub fn as_array(&self) -> [f64; 7] {
        [self.a, self.b, self.c, self.d, self.sigma_x2, self.sigma_y2, self.rho]
    }

    pub fn from_array(v: [f64; 7]) -> Result<Self> {
        ThetaLink::new(v[0], v[1], v[2], v[3], v[4], v[5], v[6])
    }
}

/// Per-level drift parameterization θ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaNatural {
    /// Degradation drifts μ_X1..μ_Xm, all positive.
    pub mu_x: Vec<f64>,
    /// Marker drifts μ_Y1..μ_Ym.
    pub mu_y: Vec<f64>,
    pub sigma_x2: f64,
    pub sigma_y2: f64,
    pub rho: f64,
}

impl ThetaNatural {
    pub fn new(mu_x: Vec<f64>, mu_y: Vec<f64>, sigma_x2: f64, sigma_y2: f64, rho: f64) -> Result<Self> {
        let theta = ThetaNatural { mu_x, mu_y, sigma_x2, sigma_y2, rho };
        theta.validate()?;
        Ok(theta)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mu_x.is_empty() || self.mu_x.len() != self.mu_y.len() {
            return Err(Error::Theta(format!(
                "need matching nonempty drift vectors, got {} and {}",
                self.mu_x.len(),
                self.mu_y.len()
            )));
        }
        for (j, &mu) in self.mu_x.iter().enumerate() {
            if !mu.is_finite() || mu <= 0.0 {
                return Err(Error::Theta(format!(
                    "degradation drifts must be positive and finite; μ_X{} = {mu}",
                    j + 1
                )));
            }
        }
        for (j, &mu) in self.mu_y.iter().enumerate() {
            if !mu.is_finite() {
                return Err(Error::Theta(format!("marker drift μ_Y{} must be finite, got {mu}", j + 1)));
            }
        }
        validate_scale_block(self.sigma_x2, self.sigma_y2, self.rho)
    }

    /// Number of stress levels this vector covers.
    pub fn m(&self) -> usize {
        self.mu_x.len()
    }

    pub fn sigma_x(&self) -> f64 {
        self.sigma_x2.sqrt()
    }

    pub fn sigma_y(&self) -> f64 {
        self.sigma_y2.sqrt()
    }

    /// 1 - ρ², the shared shrink factor of the conditional variances.
    pub fn one_minus_rho2(&self) -> f64 {
        1.0 - self.rho * self.rho
    }

    /// Precision-like factor multiplying squared marker residuals:
    /// 1 / (2 σ_Y² (1 - ρ²)).
    pub fn eta1(&self) -> f64 {
        0.5 / (self.sigma_y2 * self.one_minus_rho2())
    }

    /// Regression slope of the marker on the degradation, ρ σ_Y / σ_X.
    pub fn eta2(&self) -> f64 {
        self.rho * self.sigma_y() / self.sigma_x()
    }

    /// Reverse slope ρ σ_X / σ_Y.
    pub fn kappa(&self) -> f64 {
        self.rho * self.sigma_x() / self.sigma_y()
    }

    /// Scale factor of the censored-density arguments for a horizon `c`:
    /// 1 / (σ_X sqrt((1 - ρ²) c)).
    pub fn eta3(&self, c: f64) -> f64 {
        1.0 / (self.sigma_x() * (self.one_minus_rho2() * c).sqrt())
    }

    /// ρ / (1 - ρ²).
    pub fn eta4(&self) -> f64 {
        self.rho / self.one_minus_rho2()
    }

    /// 1 / (ρ (1 - ρ²)).
    pub fn eta5(&self) -> f64 {
        1.0 / (self.rho * self.one_minus_rho2())
    }

    /// (1 + ρ²) / (ρ (1 - ρ²)).
    pub fn eta6(&self) -> f64 {
        (1.0 + self.rho * self.rho) / (self.rho * self.one_minus_rho2())
    }

    /// The seven coordinates of a two level vector in their fixed order.
    pub fn as_array(&self) -> Result<[f64; 7]> {
        if self.m() != 2 {
            return Err(Error::Unsupported(format!(
                "the flat seven-coordinate layout needs exactly two levels, got {}",
                self.m()
            )));
        }
        Ok([
            self.mu_x[0],
            self.mu_x[1],
            self.mu_y[0],
            self.mu_y[1],
            self.sigma_x2,
            self.sigma_y2,
            self.rho,
        ])
    }

    pub fn from_array(v: [f64; 7]) -> Result<Self> {
        ThetaNatural::new(vec![v[0], v[1]], vec![v[2], v[3]], v[4], v[5], v[6])
    }
}

fn validate_scale_block(sigma_x2: f64, sigma_y2: f64, rho: f64) -> Result<()> {
    if !sigma_x2.is_finite() || sigma_x2 <= 0.0 {
        return Err(Error::Theta(format!("σ_X² must be positive and finite, got {sigma_x2}")));
    }
    if !sigma_y2.is_finite() || sigma_y2 <= 0.0 {
        return Err(Error::Theta(format!("σ_Y² must be positive and finite, got {sigma_y2}")));
    }
    if !rho.is_finite() || rho.abs() >= 1.0 {
        return Err(Error::Theta(format!("ρ must lie strictly inside (-1, 1), got {rho}")));
    }
    Ok(())
}

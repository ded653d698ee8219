//! Model parameters of the ellipsoidal relaxation operator.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// The three model parameters (ν, θ, δ).
///
/// * `nu` ∈ (−1/2, 1) shapes the velocity relaxation tensor (ν = 0 is the
///   classical BGK limit, ν ≠ 0 the ellipsoidal correction towards the
///   stress tensor).
/// * `theta` ∈ [0, 1] governs the exchange between translational and
///   internal energy (θ = 0: no exchange, θ = 1: full equilibration).
/// * `delta` > 0 counts effective internal degrees of freedom.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub nu: f64,
    pub theta: f64,
    pub delta: f64,
}

impl ModelParams {
    pub fn new(nu: f64, theta: f64, delta: f64) -> Result<Self> {
        if !(nu > -0.5 && nu < 1.0) {
            return Err(Error::Param(format!("nu must lie in (-1/2, 1), got {nu}")));
        }
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::Param(format!("theta must lie in [0, 1], got {theta}")));
        }
        if !(delta > 0.0) {
            return Err(Error::Param(format!("delta must be positive, got {delta}")));
        }
        let p = Self { nu, theta, delta };
        debug_assert!(p.relax_denom() > 0.0);
        Ok(p)
    }

    /// The denominator 1 − ν + θν of the relaxation frequency; positive on
    /// the whole admissible parameter range.
    pub fn relax_denom(&self) -> f64 {
        1.0 - self.nu + self.theta * self.nu
    }
}

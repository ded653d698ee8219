//! Deterministic simulator and verification workbench for the ellipsoidal
//! BGK model of a polyatomic gas on the reduced phase space 𝕋¹ × ℝ³_v × ℝ⁺_I.
//!
//! The kinetic equation is
//!
//! ```text
//!   ∂t F + v₁ ∂x F = A_{ν,θ} ( M_{ν,θ}[F] − F ),
//! ```
//!
//! where `F(t,x,v,I)` carries a continuous internal-energy variable `I`
//! (internal energy I^{2/δ}, δ > 0 effective internal degrees of freedom),
//! `M_{ν,θ}[F]` is the ellipsoidal Maxwellian built from the moments of `F`,
//! and `A_{ν,θ} = ρ T_δ / (1 − ν + θν)` is the collision frequency.
//!
//! The crate has two halves that share one discretization:
//!
//! * a positivity-preserving semi-implicit solver ([`solver`]) with
//!   finite-volume upwind transport and exact discrete conservation through
//!   moment-matched Maxwellians, and
//! * a verification workbench for the linearized theory ([`linearized`],
//!   [`micro_macro`]): the four macroscopic projections, the relaxation
//!   operator L, its dissipation identity and coercivity dichotomy in θ,
//!   kernel ranks, and hypocoercive decay diagnostics.
//!
//! Everything is deterministic: seeded random fields, fixed summation
//! orders, and no run-to-run variation with thread count.

pub mod grid;
pub mod init;
pub mod linalg;
pub mod linearized;
pub mod maxwellian;
pub mod micro_macro;
pub mod moments;
pub mod params;
pub mod report;
pub mod solver;
#[cfg(test)]
pub(crate) mod testutil;

pub use grid::{GridSpec, PhaseGrid, ScalarField};
pub use params::ModelParams;

use thiserror::Error;

/// Unified error type for grid construction, moment evaluation, and solver runs.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model parameter: {0}")]
    Param(String),
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("non-positive density rho={rho:.3e} in cell {cell}")]
    NonPositiveDensity { cell: usize, rho: f64 },
    #[error("relaxation tensor not positive definite in cell {cell}: lambda_min={lambda_min:.3e}")]
    TensorNotSpd { cell: usize, lambda_min: f64 },
    #[error("internal temperature T_theta={t_theta:.3e} not positive in cell {cell}")]
    NonPositiveTemperature { cell: usize, t_theta: f64 },
    #[error("moment matching failed in cell {cell}: residual {residual:.3e} after {iterations} iterations")]
    MomentMatch { cell: usize, iterations: usize, residual: f64 },
    #[error("CFL violation: dt={dt:.3e} exceeds bound {bound:.3e}")]
    Cfl { dt: f64, bound: f64 },
    #[error("negative distribution value {value:.3e} at node {node} (H-functional undefined)")]
    NegativeValue { node: usize, value: f64 },
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("{0}")]
    Domain(String),
}

pub type Result<T> = std::result::Result<T, Error>;

//! Initial data builders: equilibria, anisotropic Gaussians, and seeded
//! near-equilibrium perturbations whose global mass, momentum and energy
//! match the reference Maxwellian m.

use crate::grid::{PhaseGrid, ScalarField};
use crate::linearized::ProjectionBasis;
use crate::params::ModelParams;
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialCondition {
    /// The reference Maxwellian m in every cell.
    Equilibrium,
    /// A drifting Maxwellian with bulk velocity `u0`, unit density and unit
    /// temperatures.
    ShiftedMaxwellian { u0: [f64; 3] },
    /// Zero-drift Gaussian with anisotropic translational temperatures
    /// `theta_diag` and internal temperature `t_internal`; space-homogeneous.
    Anisotropic {
        theta_diag: [f64; 3],
        t_internal: f64,
    },
    /// F = m + amplitude·√m·f with f a seeded smooth random field carried by
    /// the x-Fourier modes in `modes`, projected so its global mass,
    /// momentum and energy vanish, then normalized to unit size.
    Perturbation {
        amplitude: f64,
        seed: u64,
        modes: Vec<usize>,
    },
    /// F = m·(1 + amplitude·sin(2πx/L)·v₂): a transverse momentum wave. It
    /// carries no density, pressure or energy perturbation, so no acoustic
    /// mode is excited and the norm decay is a clean exponential. The wave
    /// is a macroscopic (momentum) mode: the relaxation operator alone does
    /// not touch it, and its decay happens entirely through the microscopic
    /// shear components that transport generates.
    TransverseWave { amplitude: f64 },
}

/// One smooth random velocity/energy profile: a few Gaussian bumps in v
/// times an exponential profile in E, carried on √m.
pub fn random_cell_field(grid: &PhaseGrid, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n_bumps = 4;
    let mut spec = Vec::with_capacity(n_bumps);
    for _ in 0..n_bumps {
        let amp: f64 = rng.gen_range(-1.0..1.0);
        let mu = [
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
        ];
        let inv_two_sig_sq = 1.0 / (2.0 * rng.gen_range(0.7..1.5f64).powi(2));
        let inv_tau = 1.0 / rng.gen_range(0.7..2.0f64);
        spec.push((amp, mu, inv_two_sig_sq, inv_tau));
    }
    let n = grid.cell_len();
    let mut f = vec![0.0; n];
    for i in 0..n {
        let (v1, v2, v3, e) = (grid.v1[i], grid.v2[i], grid.v3[i], grid.e_int[i]);
        let mut acc = 0.0;
        for &(amp, mu, isig, itau) in &spec {
            let d2 = (v1 - mu[0]).powi(2) + (v2 - mu[1]).powi(2) + (v3 - mu[2]).powi(2);
            acc += amp * (-d2 * isig - e * itau).exp();
        }
        f[i] = acc * grid.sqrt_m[i];
    }
    f
}

/// Subtracts the uniform-in-x span of the five conserved modes so the
/// field's global mass, momentum and energy integrals vanish.
pub fn make_admissible(grid: &PhaseGrid, basis: &ProjectionBasis, f: &mut ScalarField) {
    for phi in &basis.pooled {
        let mut global = 0.0;
        for ix in 0..f.nx {
            global += grid.dx * grid.dot(f.cell(ix), phi);
        }
        let per_cell = global / grid.length;
        for ix in 0..f.nx {
            for (dst, p) in f.cell_mut(ix).iter_mut().zip(phi) {
                *dst -= per_cell * p;
            }
        }
    }
}

fn field_norm(grid: &PhaseGrid, f: &ScalarField) -> f64 {
    let mut acc = 0.0;
    for ix in 0..f.nx {
        acc += grid.dx * grid.norm_sq(f.cell(ix));
    }
    acc.sqrt()
}

/// Builds the full distribution for an initial-condition description.
/// Every variant yields strictly positive data; the perturbation variants
/// reject amplitudes large enough to break positivity.
pub fn build_initial(
    grid: &PhaseGrid,
    params: &ModelParams,
    ic: &InitialCondition,
) -> Result<ScalarField> {
    let n = grid.cell_len();
    let norm = grid.lambda * TWO_PI.powf(-1.5); // Λ_δ (2π)^{−3/2}
    let mut field = ScalarField::zeros(grid);
    match ic {
        InitialCondition::Equilibrium => {
            for ix in 0..grid.nx {
                field.cell_mut(ix).copy_from_slice(&grid.m);
            }
        }
        InitialCondition::ShiftedMaxwellian { u0 } => {
            let mut cell = vec![0.0; n];
            for i in 0..n {
                let d2 = (grid.v1[i] - u0[0]).powi(2)
                    + (grid.v2[i] - u0[1]).powi(2)
                    + (grid.v3[i] - u0[2]).powi(2);
                cell[i] = norm * (-0.5 * d2 - grid.e_int[i]).exp();
            }
            for ix in 0..grid.nx {
                field.cell_mut(ix).copy_from_slice(&cell);
            }
        }
        InitialCondition::Anisotropic {
            theta_diag,
            t_internal,
        } => {
            let [t1, t2, t3] = *theta_diag;
            if !(t1 > 0.0 && t2 > 0.0 && t3 > 0.0 && *t_internal > 0.0) {
                return Err(Error::Param(
                    "anisotropic initial temperatures must be positive".into(),
                ));
            }
            let pref = norm / (t1 * t2 * t3).sqrt() / t_internal.powf(0.5 * params.delta);
            let mut cell = vec![0.0; n];
            for i in 0..n {
                let q = grid.v1[i] * grid.v1[i] / t1
                    + grid.v2[i] * grid.v2[i] / t2
                    + grid.v3[i] * grid.v3[i] / t3;
                cell[i] = pref * (-0.5 * q - grid.e_int[i] / t_internal).exp();
            }
            for ix in 0..grid.nx {
                field.cell_mut(ix).copy_from_slice(&cell);
            }
        }
        InitialCondition::Perturbation {
            amplitude,
            seed,
            modes,
        } => {
            if modes.is_empty() {
                return Err(Error::Param("perturbation needs at least one x-mode".into()));
            }
            let basis = ProjectionBasis::build(grid, params)?;
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut pert = ScalarField::zeros(grid);
            for &k in modes {
                let gsin = random_cell_field(grid, &mut rng);
                let gcos = random_cell_field(grid, &mut rng);
                let kk = TWO_PI * k as f64 / grid.length;
                for ix in 0..grid.nx {
                    let (s, c) = (kk * grid.x_center(ix)).sin_cos();
                    for (j, dst) in pert.cell_mut(ix).iter_mut().enumerate() {
                        *dst += s * gsin[j] + c * gcos[j];
                    }
                }
            }
            make_admissible(grid, &basis, &mut pert);
            let nrm = field_norm(grid, &pert);
            if nrm < 1e-14 {
                return Err(Error::Param(
                    "seeded perturbation collapsed to zero after the invariant projection".into(),
                ));
            }
            let scale = amplitude / nrm;
            for ix in 0..grid.nx {
                let cell = field.cell_mut(ix);
                let p = pert.cell(ix);
                for j in 0..n {
                    cell[j] = grid.m[j] + scale * grid.sqrt_m[j] * p[j];
                }
            }
            let fmin = field.data.iter().copied().fold(f64::INFINITY, f64::min);
            if fmin <= 0.0 {
                return Err(Error::Param(format!(
                    "perturbation amplitude {amplitude} breaks positivity (min F = {fmin:e})"
                )));
            }
        }
        InitialCondition::TransverseWave { amplitude } => {
            if amplitude.abs() * grid.v_max >= 1.0 {
                return Err(Error::Param(format!(
                    "transverse wave amplitude must satisfy |a|·v_max < 1, got {amplitude}"
                )));
            }
            for ix in 0..grid.nx {
                let s = (TWO_PI * grid.x_center(ix) / grid.length).sin();
                for (j, dst) in field.cell_mut(ix).iter_mut().enumerate() {
                    *dst = grid.m[j] * (1.0 + amplitude * s * grid.v2[j]);
                }
            }
        }
    }
    Ok(field)
}

/// Perturbation form of [`build_initial`] for the linear-theory
/// experiments: returns f with F = m + √m f.
pub fn build_perturbation(
    grid: &PhaseGrid,
    params: &ModelParams,
    ic: &InitialCondition,
) -> Result<ScalarField> {
    let field = build_initial(grid, params, ic)?;
    Ok(crate::linearized::to_perturbation(grid, &field))
}

//! Macroscopic coefficient extraction and the macro-vs-micro control ratio.
//!
//! A perturbation f(x, v, I) splits into its projection onto the local
//! conserved directions (the "macro" part) and the rest (the "micro" part).
//! This module extracts the per-cell expansion coefficients of the macro
//! part for either decomposition, evaluates the derivative-weighted norms
//! behind the decay diagnostics, and reports how large the macro part is
//! relative to the micro part along a trajectory.

use crate::grid::{Kahan, PhaseGrid, ScalarField};
use crate::linearized::{Projection, ProjectionBasis};
use crate::{Error, Result};

/// Highest x-derivative order the diagnostics take.
pub const MAX_DERIV_ORDER: usize = 2;

/// Per-cell macroscopic coefficients of a perturbation.
///
/// Coefficients are inner products with the orthonormalized basis tables,
/// so `‖P f‖² = a² + Σ bᵢ² + c² (+ d²)` holds cell by cell to rounding.
/// For θ > 0 the energy coefficient `c` belongs to the pooled energy mode
/// and `d` is absent; for θ = 0 the energy splits into a translational
/// part `c` and an internal part `d`.
#[derive(Debug, Clone)]
pub struct MacroCoeffs {
    /// Mass-mode coefficient per cell.
    pub a: Vec<f64>,
    /// Momentum-mode coefficients per cell, one vector per axis.
    pub b: [Vec<f64>; 3],
    /// Energy coefficient per cell (pooled for θ > 0, translational for θ = 0).
    pub c: Vec<f64>,
    /// Internal-energy coefficient per cell, present only for θ = 0.
    pub d: Option<Vec<f64>>,
}

impl MacroCoeffs {
    /// ã = a − 3/√6 · c, the substituted mass variable of the θ = 0
    /// macroscopic system.
    pub fn a_tilde(&self) -> Vec<f64> {
        let k = 3.0 / 6.0f64.sqrt();
        self.a
            .iter()
            .zip(&self.c)
            .map(|(a, c)| a - k * c)
            .collect()
    }

    /// c̃ = c/√6.
    pub fn c_tilde(&self) -> Vec<f64> {
        let k = 6.0f64.sqrt();
        self.c.iter().map(|c| c / k).collect()
    }
}

/// Expands the macro part of f in the decomposition matching the basis
/// parameters: pooled modes for θ > 0, split modes for θ = 0.
pub fn extract_coeffs(grid: &PhaseGrid, basis: &ProjectionBasis, f: &ScalarField) -> MacroCoeffs {
    let nx = f.nx;
    let theta = basis.params().theta;
    let set = if theta > 0.0 {
        basis.set(Projection::Pooled)
    } else {
        basis.set(Projection::Split)
    };
    let mut a = vec![0.0; nx];
    let mut b = [vec![0.0; nx], vec![0.0; nx], vec![0.0; nx]];
    let mut c = vec![0.0; nx];
    let mut d = if theta > 0.0 {
        None
    } else {
        Some(vec![0.0; nx])
    };
    for ix in 0..nx {
        let cell = f.cell(ix);
        a[ix] = grid.dot(cell, &set[0]);
        for k in 0..3 {
            b[k][ix] = grid.dot(cell, &set[1 + k]);
        }
        c[ix] = grid.dot(cell, &set[4]);
        if let Some(d) = d.as_mut() {
            d[ix] = grid.dot(cell, &set[5]);
        }
    }
    MacroCoeffs { a, b, c, d }
}

/// Periodic central difference in x, (f[i+1] − f[i−1])/(2Δx), matching the
/// second-order transport stencil.
pub fn x_derivative(grid: &PhaseGrid, f: &ScalarField) -> ScalarField {
    let nx = f.nx;
    let inv = 1.0 / (2.0 * grid.dx);
    let mut out = ScalarField::zeros(grid);
    for ix in 0..nx {
        let left = f.cell((ix + nx - 1) % nx);
        let right = f.cell((ix + 1) % nx);
        let dst = out.cell_mut(ix);
        for j in 0..dst.len() {
            dst[j] = (right[j] - left[j]) * inv;
        }
    }
    out
}

// Σ_ix dx·⟨g², weights⟩ for the k-th central difference of f, streamed cell
// by cell so no derivative field is materialized. The second derivative is
// the composed stencil (f[i+2] − 2f[i] + f[i−2])/(4Δx²), i.e. exactly the
// central difference applied twice.
fn derivative_norm_sq(grid: &PhaseGrid, f: &ScalarField, order: usize, scratch: &mut [f64]) -> f64 {
    let nx = f.nx;
    let mut total = Kahan::new();
    for ix in 0..nx {
        match order {
            0 => {
                total.add(grid.dx * grid.norm_sq(f.cell(ix)));
                continue;
            }
            1 => {
                let inv = 1.0 / (2.0 * grid.dx);
                let left = f.cell((ix + nx - 1) % nx);
                let right = f.cell((ix + 1) % nx);
                for j in 0..scratch.len() {
                    scratch[j] = (right[j] - left[j]) * inv;
                }
            }
            _ => {
                let inv = 1.0 / (4.0 * grid.dx * grid.dx);
                let ll = f.cell((ix + nx - 2) % nx);
                let mid = f.cell(ix);
                let rr = f.cell((ix + 2) % nx);
                for j in 0..scratch.len() {
                    scratch[j] = (rr[j] - 2.0 * mid[j] + ll[j]) * inv;
                }
            }
        }
        total.add(grid.dx * grid.norm_sq(scratch));
    }
    total.value()
}

/// Σ_{k ≤ order} ‖∂ₓᵏ f‖², the instantaneous part of the energy functional.
pub fn instantaneous_norm(grid: &PhaseGrid, f: &ScalarField, order: usize) -> Result<f64> {
    if order > MAX_DERIV_ORDER {
        return Err(Error::Param(format!(
            "derivative order {order} exceeds the supported maximum {MAX_DERIV_ORDER}"
        )));
    }
    let mut scratch = vec![0.0; grid.cell_len()];
    let mut total = 0.0;
    for k in 0..=order {
        total += derivative_norm_sq(grid, f, k, &mut scratch);
    }
    Ok(total)
}

/// ℰ(t_k) = ½ Σ‖∂ᵏf(t_k)‖² + ∫₀^{t_k} Σ‖∂ᵏf(s)‖² ds with the integral
/// accumulated by the trapezoid rule over the sampled trajectory.
pub fn energy_functional(
    grid: &PhaseGrid,
    times: &[f64],
    traj: &[ScalarField],
    order: usize,
) -> Result<Vec<f64>> {
    if times.len() != traj.len() {
        return Err(Error::Param(format!(
            "trajectory has {} samples but {} time stamps",
            traj.len(),
            times.len()
        )));
    }
    let inst: Vec<f64> = traj
        .iter()
        .map(|f| instantaneous_norm(grid, f, order))
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(inst.len());
    let mut integral = 0.0;
    for k in 0..inst.len() {
        if k > 0 {
            integral += 0.5 * (times[k] - times[k - 1]) * (inst[k] + inst[k - 1]);
        }
        out.push(0.5 * inst[k] + integral);
    }
    Ok(out)
}

/// R(t) = Σ_{k≤order}‖P ∂ᵏf‖² / Σ_{k≤order}‖(I−P) ∂ᵏf‖² per trajectory
/// sample, with P the macro projection matching the basis (pooled for
/// θ > 0, split for θ = 0). A sample whose micro part falls below 1e-14
/// has no meaningful ratio and reports NaN.
pub fn control_ratio(
    grid: &PhaseGrid,
    basis: &ProjectionBasis,
    traj: &[ScalarField],
    order: usize,
) -> Result<Vec<f64>> {
    if order > MAX_DERIV_ORDER {
        return Err(Error::Param(format!(
            "derivative order {order} exceeds the supported maximum {MAX_DERIV_ORDER}"
        )));
    }
    let which = if basis.params().theta > 0.0 {
        Projection::Pooled
    } else {
        Projection::Split
    };
    let n = grid.cell_len();
    let mut stencil = vec![0.0; n];
    let mut proj = vec![0.0; n];
    let mut out = Vec::with_capacity(traj.len());
    for f in traj {
        let nx = f.nx;
        let mut num = Kahan::new();
        let mut den = Kahan::new();
        for k in 0..=order {
            for ix in 0..nx {
                let g: &[f64] = match k {
                    0 => f.cell(ix),
                    1 => {
                        let inv = 1.0 / (2.0 * grid.dx);
                        let left = f.cell((ix + nx - 1) % nx);
                        let right = f.cell((ix + 1) % nx);
                        for j in 0..n {
                            stencil[j] = (right[j] - left[j]) * inv;
                        }
                        &stencil
                    }
                    _ => {
                        let inv = 1.0 / (4.0 * grid.dx * grid.dx);
                        let ll = f.cell((ix + nx - 2) % nx);
                        let mid = f.cell(ix);
                        let rr = f.cell((ix + 2) % nx);
                        for j in 0..n {
                            stencil[j] = (rr[j] - 2.0 * mid[j] + ll[j]) * inv;
                        }
                        &stencil
                    }
                };
                basis.project_cell(grid, which, g, &mut proj);
                let macro_part = grid.norm_sq(&proj);
                num.add(grid.dx * macro_part);
                den.add(grid.dx * (grid.norm_sq(g) - macro_part));
            }
        }
        let den = den.value();
        out.push(if den < 1e-14 {
            f64::NAN
        } else {
            num.value() / den
        });
    }
    Ok(out)
}

/// Least-squares fit of ln y against t.
#[derive(Debug, Clone, Copy)]
pub struct LogLinearFit {
    /// Decay rate λ from y ≈ y₀·exp(−λt); positive when y shrinks.
    pub rate: f64,
    /// ln y₀.
    pub intercept: f64,
    /// Coefficient of determination of the line in (t, ln y) space.
    pub r_squared: f64,
}

/// Fits ln y = intercept − rate·t. Samples with y ≤ 0 are rejected since
/// the data is expected to be a positive decaying norm.
pub fn log_linear_fit(times: &[f64], values: &[f64]) -> Result<LogLinearFit> {
    if times.len() != values.len() || times.len() < 2 {
        return Err(Error::Param(format!(
            "fit needs at least two matched samples, got {} times and {} values",
            times.len(),
            values.len()
        )));
    }
    if let Some(bad) = values.iter().find(|&&y| !(y > 0.0)) {
        return Err(Error::Param(format!(
            "log fit requires positive values, got {bad}"
        )));
    }
    let n = times.len() as f64;
    let logs: Vec<f64> = values.iter().map(|y| y.ln()).collect();
    let st: f64 = times.iter().sum();
    let sy: f64 = logs.iter().sum();
    let stt: f64 = times.iter().map(|t| t * t).sum();
    let sty: f64 = times.iter().zip(&logs).map(|(t, y)| t * y).sum();
    let denom = n * stt - st * st;
    if denom == 0.0 {
        return Err(Error::Param(
            "fit times are all identical".to_string(),
        ));
    }
    let slope = (n * sty - st * sy) / denom;
    let intercept = (sy - slope * st) / n;
    let mean = sy / n;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for (t, y) in times.iter().zip(&logs) {
        let pred = intercept + slope * t;
        ss_res += (y - pred) * (y - pred);
        ss_tot += (y - mean) * (y - mean);
    }
    let r_squared = if ss_tot == 0.0 {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };
    Ok(LogLinearFit {
        rate: -slope,
        intercept,
        r_squared,
    })
}

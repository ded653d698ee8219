//! Linear theory around the global Maxwellian: the perturbation map
//! f = (F − m)/√m, four orthogonal projections of the weighted moment
//! space, the linearized relaxation operator built from them, and the
//! verification checks (dissipation identity, coercivity dichotomy,
//! kernel dimensions, quadratic linearization residuals).
//!
//! All projectors use basis tables orthonormalized in the discrete inner
//! product, so the operator identities hold discretely by algebra;
//! quadrature accuracy only affects how close the discrete basis is to its
//! continuum counterpart.

use crate::grid::{PhaseGrid, ScalarField};
use crate::linalg::sym_eigen;
use crate::maxwellian::ellipsoidal_maxwellian;
use crate::moments::compute_moments;
use crate::params::ModelParams;
use crate::report::CheckResult;
use crate::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// |eigenvalue| threshold below which a mode of the restricted operator
/// counts as kernel.
pub const KERNEL_EIG_TOL: f64 = 1e-10;

/// The four orthogonal projections.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Projection {
    /// Span of √m, v_i√m and the pooled energy mode (translational and
    /// internal energy combined into one direction); 5-dimensional.
    Pooled,
    /// Span of √m, v_i√m and both energy modes kept separate;
    /// 6-dimensional.
    Split,
    /// Diagonal stress deviators (3v_i²−|v|²)√m; rank 2, the three raw
    /// vectors sum to zero.
    DiagStress,
    /// Off-diagonal stress modes v_iv_j√m, i < j.
    Shear,
}

/// Orthonormalized basis tables for the four projections, the raw energy
/// modes, and the eleven moment weights entering the collision-frequency
/// linearization. Immutable after construction.
pub struct ProjectionBasis {
    pub pooled: Vec<Vec<f64>>,
    pub split: Vec<Vec<f64>>,
    pub diag_stress: Vec<Vec<f64>>,
    pub shear: Vec<Vec<f64>>,
    /// (|v|²−3)/√6·√m with continuum normalization (discrete norm 1 only up
    /// to quadrature accuracy).
    pub energy_tr: Vec<f64>,
    /// (2E−δ)/√(2δ)·√m.
    pub energy_int: Vec<f64>,
    /// ((|v|²−3)+(2E−δ))/√(2(3+δ))·√m, the pooled direction. Satisfies
    /// energy_pooled = √(3/(3+δ))·energy_tr + √(δ/(3+δ))·energy_int
    /// exactly nodewise.
    pub energy_pooled: Vec<f64>,
    /// Moment weights e₁…e₁₁ of the second-order remainder machinery; only
    /// e₅…e₇ and e₁₁ carry nonzero coefficients at the equilibrium point.
    pub moment_weights: Vec<Vec<f64>>,
    params: ModelParams,
}

fn gram(grid: &PhaseGrid, set: &[Vec<f64>]) -> Vec<f64> {
    let n = set.len();
    let mut g = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = grid.dot(&set[i], &set[j]);
            g[i * n + j] = v;
            g[j * n + i] = v;
        }
    }
    g
}

/// Symmetric (Löwdin) orthonormalization: φ = raw · G^{−1/2}. Requires the
/// raw set to be safely independent.
fn loewdin(grid: &PhaseGrid, raw: &[Vec<f64>], label: &str) -> Result<Vec<Vec<f64>>> {
    let n = raw.len();
    let g = gram(grid, raw);
    let (vals, vecs) = sym_eigen(&g, n);
    if vals[0] <= 1e-8 * vals[n - 1].max(1e-300) {
        return Err(Error::Grid(format!(
            "{label} basis set is numerically dependent (gram eigenvalues {:?})",
            vals
        )));
    }
    // W = V diag(λ^{-1/2}) Vᵀ, then φ_i = Σ_k W_{ki} raw_k.
    let mut w = vec![0.0; n * n];
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                w[i * n + j] += vecs[i * n + k] * vecs[j * n + k] / vals[k].sqrt();
            }
        }
    }
    let len = raw[0].len();
    let mut out = vec![vec![0.0; len]; n];
    for i in 0..n {
        for k in 0..n {
            let c = w[k * n + i];
            for (o, r) in out[i].iter_mut().zip(&raw[k]) {
                *o += c * r;
            }
        }
    }
    Ok(out)
}

/// Canonical orthonormalization for a possibly rank-deficient set: keep
/// the gram eigenvectors with eigenvalue above `drop_tol`·λ_max.
fn canonical_orth(grid: &PhaseGrid, raw: &[Vec<f64>], drop_tol: f64) -> Vec<Vec<f64>> {
    let n = raw.len();
    let g = gram(grid, raw);
    let (vals, vecs) = sym_eigen(&g, n);
    let lam_max = vals[n - 1].max(1e-300);
    let len = raw[0].len();
    let mut out = Vec::new();
    // Descending order so the dominant mode comes first.
    for k in (0..n).rev() {
        if vals[k] <= drop_tol * lam_max {
            continue;
        }
        let scale = 1.0 / vals[k].sqrt();
        let mut phi = vec![0.0; len];
        for i in 0..n {
            let c = vecs[i * n + k] * scale;
            for (o, r) in phi.iter_mut().zip(&raw[i]) {
                *o += c * r;
            }
        }
        out.push(phi);
    }
    out
}

impl ProjectionBasis {
    pub fn build(grid: &PhaseGrid, params: &ModelParams) -> Result<ProjectionBasis> {
        let n = grid.cell_len();
        let delta = params.delta;
        let mk = |f: &dyn Fn(usize) -> f64| -> Vec<f64> {
            (0..n).map(|i| f(i) * grid.sqrt_m[i]).collect()
        };
        let sqm = grid.sqrt_m.clone();
        let v1 = mk(&|i| grid.v1[i]);
        let v2 = mk(&|i| grid.v2[i]);
        let v3 = mk(&|i| grid.v3[i]);
        let c_tr = 1.0 / 6.0f64.sqrt();
        let energy_tr = mk(&|i| (grid.vsq[i] - 3.0) * c_tr);
        let c_int = 1.0 / (2.0 * delta).sqrt();
        let energy_int = mk(&|i| (2.0 * grid.e_int[i] - delta) * c_int);
        let c_pool = 1.0 / (2.0 * (3.0 + delta)).sqrt();
        let energy_pooled = mk(&|i| ((grid.vsq[i] - 3.0) + (2.0 * grid.e_int[i] - delta)) * c_pool);

        let pooled_raw = vec![
            sqm.clone(),
            v1.clone(),
            v2.clone(),
            v3.clone(),
            energy_pooled.clone(),
        ];
        let split_raw = vec![
            sqm.clone(),
            v1.clone(),
            v2.clone(),
            v3.clone(),
            energy_tr.clone(),
            energy_int.clone(),
        ];
        let c_dev = 1.0 / (3.0 * 2.0f64.sqrt());
        let diag_raw: Vec<Vec<f64>> = (0..3)
            .map(|ax| {
                let vv = [&grid.v1, &grid.v2, &grid.v3][ax];
                (0..n)
                    .map(|i| (3.0 * vv[i] * vv[i] - grid.vsq[i]) * c_dev * grid.sqrt_m[i])
                    .collect()
            })
            .collect();
        let shear_raw = vec![
            mk(&|i| grid.v1[i] * grid.v2[i]),
            mk(&|i| grid.v2[i] * grid.v3[i]),
            mk(&|i| grid.v3[i] * grid.v1[i]),
        ];

        let pooled = loewdin(grid, &pooled_raw, "pooled")?;
        let split = loewdin(grid, &split_raw, "split")?;
        let diag_stress = canonical_orth(grid, &diag_raw, 1e-6);
        if diag_stress.len() != 2 {
            return Err(Error::Grid(format!(
                "diagonal stress set has rank {} (expected 2)",
                diag_stress.len()
            )));
        }
        let shear = loewdin(grid, &shear_raw, "shear")?;

        // Collision-frequency weights. The quadratic ones depend on (ν, θ);
        // their defining identity e₅+e₆+e₇+δe₁₁ = (|v|²+2E)√m holds for
        // every parameter choice.
        let (nu, theta) = (params.nu, params.theta);
        let pool_quad = |i: usize| (grid.vsq[i] + 2.0 * grid.e_int[i]) / (3.0 + delta);
        let mut moment_weights: Vec<Vec<f64>> = Vec::with_capacity(11);
        moment_weights.push(sqm.clone());
        moment_weights.push(v1);
        moment_weights.push(v2);
        moment_weights.push(v3);
        for ax in 0..3 {
            let vv = [&grid.v1, &grid.v2, &grid.v3][ax];
            moment_weights.push(mk(&|i| {
                theta * pool_quad(i)
                    + (1.0 - theta) * ((1.0 - nu) / 3.0 * grid.vsq[i] + nu * vv[i] * vv[i])
            }));
        }
        moment_weights.push(mk(&|i| nu * (1.0 - theta) * grid.v1[i] * grid.v2[i]));
        moment_weights.push(mk(&|i| nu * (1.0 - theta) * grid.v2[i] * grid.v3[i]));
        moment_weights.push(mk(&|i| nu * (1.0 - theta) * grid.v3[i] * grid.v1[i]));
        moment_weights.push(mk(&|i| {
            theta * pool_quad(i) + (1.0 - theta) * 2.0 * grid.e_int[i] / delta
        }));

        Ok(ProjectionBasis {
            pooled,
            split,
            diag_stress,
            shear,
            energy_tr,
            energy_int,
            energy_pooled,
            moment_weights,
            params: *params,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn set(&self, which: Projection) -> &[Vec<f64>] {
        match which {
            Projection::Pooled => &self.pooled,
            Projection::Split => &self.split,
            Projection::DiagStress => &self.diag_stress,
            Projection::Shear => &self.shear,
        }
    }

    /// Coefficients ⟨f, φ_k⟩ of one cell against an orthonormalized set.
    pub fn coeffs_cell(&self, grid: &PhaseGrid, which: Projection, f: &[f64]) -> Vec<f64> {
        self.set(which).iter().map(|phi| grid.dot(f, phi)).collect()
    }

    /// Writes Σ_k ⟨f, φ_k⟩ φ_k into `out`.
    pub fn project_cell(&self, grid: &PhaseGrid, which: Projection, f: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for phi in self.set(which) {
            let c = grid.dot(f, phi);
            for (o, p) in out.iter_mut().zip(phi) {
                *o += c * p;
            }
        }
    }

    pub fn project(&self, grid: &PhaseGrid, which: Projection, f: &ScalarField) -> ScalarField {
        let mut out = ScalarField::zeros(grid);
        for ix in 0..f.nx {
            self.project_cell(grid, which, f.cell(ix), out.cell_mut(ix));
        }
        out
    }

    /// The combined projection θ·Pooled + (1−θ)·{Split + ν(DiagStress + Shear)}.
    pub fn apply_p_cell(&self, grid: &PhaseGrid, f: &[f64], out: &mut [f64]) {
        let (nu, theta) = (self.params.nu, self.params.theta);
        out.fill(0.0);
        let mut add = |set: &[Vec<f64>], scale: f64| {
            if scale == 0.0 {
                return;
            }
            for phi in set {
                let c = scale * grid.dot(f, phi);
                for (o, p) in out.iter_mut().zip(phi) {
                    *o += c * p;
                }
            }
        };
        add(&self.pooled, theta);
        add(&self.split, 1.0 - theta);
        add(&self.diag_stress, (1.0 - theta) * nu);
        add(&self.shear, (1.0 - theta) * nu);
    }

    /// The linearized relaxation operator on one cell:
    /// Lf = (P_{ν,θ}f − f)/(1 − ν + θν).
    pub fn apply_l_cell(&self, grid: &PhaseGrid, f: &[f64], out: &mut [f64]) {
        self.apply_p_cell(grid, f, out);
        let inv_denom = 1.0 / self.params.relax_denom();
        for (o, x) in out.iter_mut().zip(f) {
            *o = (*o - x) * inv_denom;
        }
    }

    pub fn apply_l(&self, grid: &PhaseGrid, f: &ScalarField) -> ScalarField {
        let mut out = ScalarField::zeros(grid);
        for ix in 0..f.nx {
            self.apply_l_cell(grid, f.cell(ix), out.cell_mut(ix));
        }
        out
    }

    /// Worst deviation of any of the four orthonormalized sets from exact
    /// orthonormality (max |⟨φ_i, φ_j⟩ − δ_ij|).
    pub fn orthonormality_defect(&self, grid: &PhaseGrid) -> f64 {
        let mut worst = 0.0f64;
        for which in [
            Projection::Pooled,
            Projection::Split,
            Projection::DiagStress,
            Projection::Shear,
        ] {
            let set = self.set(which);
            let g = gram(grid, set);
            let n = set.len();
            for i in 0..n {
                for j in 0..n {
                    let target = if i == j { 1.0 } else { 0.0 };
                    worst = worst.max((g[i * n + j] - target).abs());
                }
            }
        }
        worst
    }

    /// Residual of the pooled energy direction against the split span,
    /// ‖(I − P_split) φ_pool‖ for the orthonormalized pooled energy mode.
    /// Zero in exact arithmetic because the pooled mode is a nodewise
    /// combination of the split ones.
    pub fn pooled_span_residual(&self, grid: &PhaseGrid) -> f64 {
        let phi = &self.pooled[4];
        let mut proj = vec![0.0; phi.len()];
        self.project_cell(grid, Projection::Split, phi, &mut proj);
        let resid: Vec<f64> = phi.iter().zip(&proj).map(|(a, b)| a - b).collect();
        grid.norm_sq(&resid).sqrt()
    }
}

/// f = (F − m)/√m nodewise.
pub fn to_perturbation(grid: &PhaseGrid, field: &ScalarField) -> ScalarField {
    let mut out = ScalarField::zeros(grid);
    for ix in 0..field.nx {
        let src = field.cell(ix);
        let dst = out.cell_mut(ix);
        for j in 0..src.len() {
            dst[j] = (src[j] - grid.m[j]) / grid.sqrt_m[j];
        }
    }
    out
}

/// F = m + √m f nodewise.
pub fn from_perturbation(grid: &PhaseGrid, f: &ScalarField) -> ScalarField {
    let mut out = ScalarField::zeros(grid);
    for ix in 0..f.nx {
        let src = f.cell(ix);
        let dst = out.cell_mut(ix);
        for j in 0..src.len() {
            dst[j] = grid.m[j] + grid.sqrt_m[j] * src[j];
        }
    }
    out
}

/// The three pieces of the dissipation identity for one cell:
/// `lhs` = −(1−ν+θν)⟨Lf, f⟩, `pooled_defect` = ‖(I−P_pooled)f‖², and
/// `split_defect` = ‖(I−P_split)f‖² − ν‖(P_diag+P_shear)f‖². The identity
/// states lhs = θ·pooled_defect + (1−θ)·split_defect.
#[derive(Debug, Clone, Copy)]
pub struct Dissipation {
    pub lhs: f64,
    pub pooled_defect: f64,
    pub split_defect: f64,
}

pub fn dissipation_terms(
    grid: &PhaseGrid,
    basis: &ProjectionBasis,
    f: &[f64],
) -> Dissipation {
    let n = f.len();
    let mut buf = vec![0.0; n];
    basis.apply_l_cell(grid, f, &mut buf);
    let lhs = -basis.params.relax_denom() * grid.dot(&buf, f);

    basis.project_cell(grid, Projection::Pooled, f, &mut buf);
    for (b, x) in buf.iter_mut().zip(f) {
        *b = x - *b;
    }
    let pooled_defect = grid.norm_sq(&buf);

    basis.project_cell(grid, Projection::Split, f, &mut buf);
    for (b, x) in buf.iter_mut().zip(f) {
        *b = x - *b;
    }
    let split_resid = grid.norm_sq(&buf);

    let mut nd = vec![0.0; n];
    basis.project_cell(grid, Projection::DiagStress, f, &mut buf);
    basis.project_cell(grid, Projection::Shear, f, &mut nd);
    for (b, d) in buf.iter_mut().zip(&nd) {
        *b += d;
    }
    let nondiag = grid.norm_sq(&buf);
    Dissipation {
        lhs,
        pooled_defect,
        split_defect: split_resid - basis.params.nu * nondiag,
    }
}

/// Coercivity margin of the dichotomy for one cell: for θ > 0 the excess of
/// the dissipation over θ‖(I−P_pooled)f‖², for θ = 0 over
/// (1−|ν|)‖(I−P_split)f‖². Nonnegative (up to rounding) on the admissible
/// parameter range.
pub fn coercivity_margin(grid: &PhaseGrid, basis: &ProjectionBasis, f: &[f64]) -> f64 {
    let d = dissipation_terms(grid, basis, f);
    let params = basis.params;
    if params.theta > 0.0 {
        d.lhs - params.theta * d.pooled_defect
    } else {
        let n = f.len();
        let mut buf = vec![0.0; n];
        basis.project_cell(grid, Projection::Split, f, &mut buf);
        for (b, x) in buf.iter_mut().zip(f) {
            *b = x - *b;
        }
        d.lhs - (1.0 - params.nu.abs()) * grid.norm_sq(&buf)
    }
}

/// Dimension of the kernel of the linearized operator, computed as the
/// number of near-zero eigenvalues of its restriction to the 11-dimensional
/// moment subspace (which contains every projection range, so the
/// restriction captures the whole kernel). Expected: 5 for θ > 0 and 6 for
/// θ = 0.
pub fn kernel_dimension(grid: &PhaseGrid, basis: &ProjectionBasis) -> Result<usize> {
    let n = grid.cell_len();
    let mk = |f: &dyn Fn(usize) -> f64| -> Vec<f64> {
        (0..n).map(|i| f(i) * grid.sqrt_m[i]).collect()
    };
    let delta = basis.params.delta;
    let raw: Vec<Vec<f64>> = vec![
        grid.sqrt_m.clone(),
        mk(&|i| grid.v1[i]),
        mk(&|i| grid.v2[i]),
        mk(&|i| grid.v3[i]),
        mk(&|i| grid.v1[i] * grid.v1[i]),
        mk(&|i| grid.v2[i] * grid.v2[i]),
        mk(&|i| grid.v3[i] * grid.v3[i]),
        mk(&|i| grid.v1[i] * grid.v2[i]),
        mk(&|i| grid.v2[i] * grid.v3[i]),
        mk(&|i| grid.v3[i] * grid.v1[i]),
        mk(&|i| 2.0 * grid.e_int[i] / delta),
    ];
    let ortho = loewdin(grid, &raw, "moment subspace")?;
    let k = ortho.len();
    let mut lphi: Vec<Vec<f64>> = Vec::with_capacity(k);
    for phi in &ortho {
        let mut out = vec![0.0; n];
        basis.apply_l_cell(grid, phi, &mut out);
        lphi.push(out);
    }
    let mut mat = vec![0.0; k * k];
    for i in 0..k {
        for j in i..k {
            // L is self-adjoint; symmetrize to kill rounding asymmetry.
            let v = 0.5 * (grid.dot(&ortho[i], &lphi[j]) + grid.dot(&ortho[j], &lphi[i]));
            mat[i * k + j] = v;
            mat[j * k + i] = v;
        }
    }
    let (vals, _) = sym_eigen(&mat, k);
    Ok(vals.iter().filter(|x| x.abs() <= KERNEL_EIG_TOL).count())
}

/// ‖L e_tr‖ for the raw translational energy mode (|v|²−3)/√6·√m. The
/// continuum value is θ/(1−ν+θν)·√(δ/(3+δ)): strictly positive for θ > 0
/// (the mode is damped), zero for θ = 0 (the mode joins the kernel).
pub fn split_mode_l_norm(grid: &PhaseGrid, basis: &ProjectionBasis) -> f64 {
    let mut out = vec![0.0; grid.cell_len()];
    basis.apply_l_cell(grid, &basis.energy_tr, &mut out);
    grid.norm_sq(&out).sqrt()
}

/// Closed form of the damping rate measured by [`split_mode_l_norm`].
pub fn split_mode_rate(params: &ModelParams) -> f64 {
    params.theta / params.relax_denom() * (params.delta / (3.0 + params.delta)).sqrt()
}

/// One point of the linearization study.
#[derive(Debug, Clone, Copy)]
pub struct LinearizationPoint {
    pub eps: f64,
    /// ‖(M(m+ε√m f) − m)/√m − ε P_{ν,θ} f‖.
    pub maxwellian_residual: f64,
    /// |(1−ν+θν)·A(m+ε√m f) − 1 − ε Σ aᵢ⟨f, eᵢ⟩|.
    pub frequency_residual: f64,
}

#[derive(Debug, Clone)]
pub struct LinearizationFit {
    pub points: Vec<LinearizationPoint>,
    /// Log-log least-squares slope of the Maxwellian residual; NaN when
    /// fewer than two points survive the floor filter.
    pub slope_maxwellian: f64,
    pub slope_frequency: f64,
}

fn log_slope(points: &[(f64, f64)], floor: f64) -> f64 {
    let data: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, y)| *y > floor)
        .map(|&(x, y)| (x.ln(), y.ln()))
        .collect();
    if data.len() < 2 {
        return f64::NAN;
    }
    let n = data.len() as f64;
    let sx: f64 = data.iter().map(|p| p.0).sum();
    let sy: f64 = data.iter().map(|p| p.1).sum();
    let sxx: f64 = data.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = data.iter().map(|p| p.0 * p.1).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Measures how fast the full relaxation Maxwellian and collision frequency
/// approach their linearizations as the perturbation amplitude shrinks.
/// Both residuals should scale like ε² (slopes near 2).
pub fn linearization_residual(
    grid: &PhaseGrid,
    basis: &ProjectionBasis,
    f: &[f64],
    eps_list: &[f64],
) -> Result<LinearizationFit> {
    let params = basis.params;
    let n = grid.cell_len();
    let delta = params.delta;
    let f_norm = grid.norm_sq(f).sqrt();

    let mut pf = vec![0.0; n];
    basis.apply_p_cell(grid, f, &mut pf);
    // a₅..a₇ = 1/(3+δ), a₁₁ = δ/(3+δ); the transitional-field coefficients
    // a₁..a₄ vanish at the expansion point.
    let mut lin_freq = 0.0;
    for ax in 0..3 {
        lin_freq += grid.dot(f, &basis.moment_weights[4 + ax]) / (3.0 + delta);
    }
    lin_freq += delta / (3.0 + delta) * grid.dot(f, &basis.moment_weights[10]);

    let mut points = Vec::with_capacity(eps_list.len());
    let mut big_f = vec![0.0; n];
    let mut resid = vec![0.0; n];
    for &eps in eps_list {
        if !(eps > 0.0) {
            return Err(Error::Param(format!("eps must be positive, got {eps}")));
        }
        for i in 0..n {
            big_f[i] = grid.m[i] + eps * grid.sqrt_m[i] * f[i];
        }
        let state = compute_moments(grid, &params, &big_f, 0)?;
        let maxw = ellipsoidal_maxwellian(grid, &params, &state, 0)?;
        for i in 0..n {
            resid[i] = (maxw[i] - grid.m[i]) / grid.sqrt_m[i] - eps * pf[i];
        }
        let r = grid.norm_sq(&resid).sqrt();
        let rho_t_delta = state.a_freq * params.relax_denom();
        let s = (rho_t_delta - 1.0 - eps * lin_freq).abs();
        points.push(LinearizationPoint {
            eps,
            maxwellian_residual: r,
            frequency_residual: s,
        });
    }
    // Residuals at or below the quadrature self-consistency defect carry no
    // information about the ε-scaling (the Maxwellian rebuilt from m's own
    // discrete moments already misses the stored table by that much), so
    // such points stay reported but are excluded from the slope fit. The
    // production grids keep that defect under ~1e-10.
    let floor_r = 1e-10 * f_norm.max(1.0);
    let slope_r = log_slope(
        &points
            .iter()
            .map(|p| (p.eps, p.maxwellian_residual))
            .collect::<Vec<_>>(),
        floor_r,
    );
    let slope_s = log_slope(
        &points
            .iter()
            .map(|p| (p.eps, p.frequency_residual))
            .collect::<Vec<_>>(),
        1e-10,
    );
    Ok(LinearizationFit {
        points,
        slope_maxwellian: slope_r,
        slope_frequency: slope_s,
    })
}

/// Runs the full battery of linear-theory checks for one parameter point.
/// Every result follows the same convention: pass ⇔ worst_margin ≤
/// tolerance, where worst_margin measures the largest observed violation
/// (normalized by ‖f‖² where a scale is involved).
pub fn run_checks(
    grid: &PhaseGrid,
    basis: &ProjectionBasis,
    samples: usize,
    seed: u64,
) -> Result<Vec<CheckResult>> {
    let params = basis.params;
    let n = grid.cell_len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fields: Vec<Vec<f64>> = (0..samples)
        .map(|_| crate::init::random_cell_field(grid, &mut rng))
        .collect();
    let mut out = Vec::new();
    let mut push = |name: &str, samples: usize, worst: f64, tol: f64| {
        out.push(CheckResult {
            check: name.to_string(),
            samples,
            worst_margin: worst,
            tolerance: tol,
            pass: worst <= tol,
        });
    };

    push(
        "basis_orthonormality",
        1,
        basis.orthonormality_defect(grid),
        1e-13,
    );
    push(
        "pooled_energy_in_split_span",
        1,
        basis.pooled_span_residual(grid),
        1e-12,
    );

    let all = [
        Projection::Pooled,
        Projection::Split,
        Projection::DiagStress,
        Projection::Shear,
    ];
    let mut idem = 0.0f64;
    let mut products = 0.0f64;
    let mut selfadj = 0.0f64;
    let mut dissip = 0.0f64;
    let mut split_neg = f64::NEG_INFINITY;
    let mut coerciv = f64::NEG_INFINITY;
    let mut buf = vec![0.0; n];
    let mut buf2 = vec![0.0; n];
    for pair in fields.chunks(2) {
        let f = &pair[0];
        let g = pair.get(1).unwrap_or(&pair[0]);
        let fn2 = grid.norm_sq(f);
        let fnorm = fn2.sqrt();
        let gnorm = grid.norm_sq(g).sqrt();
        for which in all {
            basis.project_cell(grid, which, f, &mut buf);
            basis.project_cell(grid, which, &buf, &mut buf2);
            for (a, b) in buf2.iter_mut().zip(&buf) {
                *a -= b;
            }
            idem = idem.max(grid.norm_sq(&buf2).sqrt() / fnorm);
            // Self-adjointness ⟨Pf, g⟩ = ⟨f, Pg⟩.
            let left = grid.dot(&buf, g);
            basis.project_cell(grid, which, g, &mut buf2);
            let right = grid.dot(f, &buf2);
            selfadj = selfadj.max((left - right).abs() / (fnorm * gnorm));
        }
        // Vanishing products among split, diag, shear (pairwise orthogonal
        // ranges).
        let zero_pairs = [
            (Projection::Split, Projection::DiagStress),
            (Projection::DiagStress, Projection::Split),
            (Projection::Split, Projection::Shear),
            (Projection::Shear, Projection::Split),
            (Projection::DiagStress, Projection::Shear),
            (Projection::Shear, Projection::DiagStress),
        ];
        for (a, b) in zero_pairs {
            basis.project_cell(grid, b, f, &mut buf);
            basis.project_cell(grid, a, &buf, &mut buf2);
            products = products.max(grid.norm_sq(&buf2).sqrt() / fnorm);
        }
        // L self-adjoint.
        basis.apply_l_cell(grid, f, &mut buf);
        let left = grid.dot(&buf, g);
        basis.apply_l_cell(grid, g, &mut buf2);
        let right = grid.dot(f, &buf2);
        selfadj = selfadj.max((left - right).abs() / (fnorm * gnorm));

        let d = dissipation_terms(grid, basis, f);
        let rhs = params.theta * d.pooled_defect + (1.0 - params.theta) * d.split_defect;
        dissip = dissip.max((d.lhs - rhs).abs() / fn2);
        split_neg = split_neg.max(-d.split_defect / fn2);
        coerciv = coerciv.max(-coercivity_margin(grid, basis, f) / fn2);
    }
    push("projection_idempotent", fields.len(), idem, 1e-12);
    push("projection_zero_products", fields.len(), products, 1e-12);
    push("self_adjointness", fields.len(), selfadj, 1e-12);
    push("dissipation_identity", fields.len(), dissip, 1e-10);
    push("split_defect_nonnegative", fields.len(), split_neg, 1e-12);
    push("coercivity_margin", fields.len(), coerciv, 1e-10);

    let dim = kernel_dimension(grid, basis)?;
    let expected = if params.theta > 0.0 { 5 } else { 6 };
    push(
        "kernel_dimension",
        1,
        (dim as f64 - expected as f64).abs(),
        0.5,
    );

    // Kernel modes are annihilated: the pooled set always, plus both split
    // energy modes when θ = 0.
    let mut kernel_worst = 0.0f64;
    let mut kernel_modes: Vec<&Vec<f64>> = basis.pooled.iter().collect();
    if params.theta == 0.0 {
        kernel_modes.push(&basis.split[4]);
        kernel_modes.push(&basis.split[5]);
    }
    let n_kernel = kernel_modes.len();
    for k in kernel_modes {
        basis.apply_l_cell(grid, k, &mut buf);
        kernel_worst = kernel_worst.max(grid.norm_sq(&buf).sqrt());
    }
    push("kernel_annihilated", n_kernel, kernel_worst, 1e-12);

    let measured = split_mode_l_norm(grid, basis);
    push(
        "split_energy_damping_rate",
        1,
        (measured - split_mode_rate(&params)).abs(),
        1e-8,
    );

    let eps_list = [1e-2, 5e-3, 2.5e-3, 1.25e-3];
    let mut worst_r = 0.0f64;
    let mut worst_s = 0.0f64;
    let n_lin = samples.min(3).max(1);
    // The quadratic term of the frequency residual is proportional to the
    // squared momentum moment of the sample. A field whose momentum moment
    // happens to be near zero would sink that term to the quadrature defect
    // and wreck the slope fit, so each fit sample is the normalized random
    // field plus a unit momentum mode, which keeps the moment in [0.5, 1.5].
    let mut flin = vec![0.0; n];
    for f in fields.iter().take(n_lin) {
        let inv = 0.5 / grid.norm_sq(f).sqrt();
        for j in 0..n {
            flin[j] = f[j] * inv + basis.pooled[1][j];
        }
        let fit = linearization_residual(grid, basis, &flin, &eps_list)?;
        worst_r = worst_r.max((fit.slope_maxwellian - 2.0).abs());
        worst_s = worst_s.max((fit.slope_frequency - 2.0).abs());
    }
    push("maxwellian_linearization_order", n_lin, worst_r, 0.1);
    push("frequency_linearization_order", n_lin, worst_s, 0.1);

    Ok(out)
}

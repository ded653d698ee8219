//! Phase-space discretization of 𝕋¹ × ℝ³_v × ℝ⁺_I.
//!
//! Space is a periodic interval split into Nx finite-volume cells. Velocity
//! is a per-axis uniform grid on [−v_max, v_max] with trapezoid weights,
//! tensored to 3-D. The internal-energy variable I lives on (0, I_max] with
//! midpoint-type nodes placed through an exponential map so that the energy
//! levels E = I^{2/δ} cover the Boltzmann weight e^{−E} evenly for every δ;
//! the raw weights are then calibrated (a rank-2 correction, see
//! [`build`](PhaseGrid::build)) so the discrete mass and mean internal
//! energy of the global Maxwellian are exact to rounding. Without that
//! correction the plain midpoint rule carries an O(h²) defect around 1e−2
//! at N_I = 32, far above what the equilibrium fixed-point tests need.
//!
//! All inner products use compensated (Kahan) summation in a fixed node
//! order, so results are bit-stable across runs and thread counts.

use crate::params::ModelParams;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Tail exponent both extents must reach: the discarded tail factor
/// e^{−v_max²/2} resp. e^{−E_max} is at most e^{−27.6} ≈ 1.0e−12.
/// The auto extents sit exactly at (I) or well past (v) this threshold.
pub const TAIL_EXPONENT: f64 = 27.6;

/// Quadrature tolerance the default grids are designed to meet for the
/// moment identities of the global Maxwellian.
pub const TOL_QUAD: f64 = 1e-8;

/// Steepness of the energy map in units of δ/2; chosen so the node energies
/// resolve both the e^{−E} bulk and the far tail at N_I = 32.
const ENERGY_MAP_RATE: f64 = 3.5;

/// User-facing grid description. `v_max`/`i_max` of `None` mean "auto":
/// v_max = 8 and I_max = 27.6^{δ/2}.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct GridSpec {
    pub nx: usize,
    pub length: f64,
    pub nv: usize,
    pub ni: usize,
    #[serde(default)]
    pub v_max: Option<f64>,
    #[serde(default)]
    pub i_max: Option<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            nx: 32,
            length: 1.0,
            nv: 24,
            ni: 32,
            v_max: None,
            i_max: None,
        }
    }
}

/// The discretized phase space plus per-node lookup tables.
///
/// Node layout inside one spatial cell: index = ((iv1·Nv + iv2)·Nv + iv3)·N_I + ii,
/// so the I-variable is fastest and a fixed-x slice is contiguous.
#[derive(Debug, Clone)]
pub struct PhaseGrid {
    pub params: ModelParams,
    pub nx: usize,
    pub length: f64,
    pub dx: f64,
    pub nv: usize,
    pub v_max: f64,
    pub ni: usize,
    pub i_max: f64,
    /// Λ_δ, the normalizing factor of the internal-energy weight.
    pub lambda: f64,
    /// Per-axis velocity nodes (exactly antisymmetric: v[k] = −v[nv−1−k]).
    pub v_axis: Vec<f64>,
    /// Per-axis trapezoid weights.
    pub wv_axis: Vec<f64>,
    /// Internal-energy nodes I_j in increasing order, all in (0, I_max].
    pub i_nodes: Vec<f64>,
    /// Calibrated I-weights, strictly positive.
    pub wi: Vec<f64>,
    /// Energy levels E_j = I_j^{2/δ}, evaluated directly from the node map.
    pub e_nodes: Vec<f64>,
    /// Residual of the discrete mass of m against 1 (diagnostic).
    pub mass_defect: f64,
    // Flattened per-node tables over one spatial cell (length nv³·ni):
    pub w: Vec<f64>,
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
    pub v3: Vec<f64>,
    pub vsq: Vec<f64>,
    pub e_int: Vec<f64>,
    /// Global Maxwellian m(v,I), strictly positive nodewise.
    pub m: Vec<f64>,
    pub sqrt_m: Vec<f64>,
}

impl PhaseGrid {
    pub fn build(params: ModelParams, spec: &GridSpec) -> Result<PhaseGrid> {
        if spec.nx < 4 || spec.nv < 4 || spec.ni < 4 {
            return Err(Error::Grid(format!(
                "all counts must be at least 4 (got nx={}, nv={}, ni={})",
                spec.nx, spec.nv, spec.ni
            )));
        }
        if !(spec.length > 0.0) {
            return Err(Error::Grid(format!("length must be positive, got {}", spec.length)));
        }
        let delta = params.delta;
        let v_max = spec.v_max.unwrap_or(8.0);
        let i_max = spec.i_max.unwrap_or_else(|| TAIL_EXPONENT.powf(delta / 2.0));
        if !(v_max > 0.0) || !(i_max > 0.0) {
            return Err(Error::Grid("extents must be positive".into()));
        }
        // Tail criterion: discarded weight at the box edge must not exceed
        // e^{−27.6} ≈ 1e−12. The small slack absorbs the powf round trip of
        // the auto I_max.
        if 0.5 * v_max * v_max < TAIL_EXPONENT - 1e-9 {
            return Err(Error::Grid(format!(
                "v_max={v_max} leaves a velocity tail above e^{{-{TAIL_EXPONENT}}}"
            )));
        }
        let e_max = i_max.powf(2.0 / delta);
        if e_max < TAIL_EXPONENT - 1e-9 {
            return Err(Error::Grid(format!(
                "i_max={i_max} leaves an internal-energy tail above e^{{-{TAIL_EXPONENT}}}"
            )));
        }

        let lambda = lambda_delta(delta)?;

        // Velocity axis: uniform, endpoints included, mirrored so the node
        // set is exactly antisymmetric in floating point. That exactness is
        // what makes odd-moment Gram entries cancel to rounding noise in the
        // projection tests.
        let nv = spec.nv;
        let hv = 2.0 * v_max / (nv - 1) as f64;
        let mut v_axis = vec![0.0; nv];
        for k in 0..nv / 2 {
            let v = -v_max + k as f64 * hv;
            v_axis[k] = v;
            v_axis[nv - 1 - k] = -v;
        }
        if nv % 2 == 1 {
            v_axis[nv / 2] = 0.0;
        }
        let mut wv_axis = vec![hv; nv];
        wv_axis[0] = 0.5 * hv;
        wv_axis[nv - 1] = 0.5 * hv;

        // Internal-energy nodes through the exponential map
        //   I(u) = I_max · exp(−c (1/u − 1)),  u = (j+½)/N_I,  c = 3.5·δ/2,
        // so E(u) = E_max · exp(−3.5 (1/u − 1)) independently of δ. The raw
        // midpoint weight is dI/du · h = I · c/u² · h.
        let ni = spec.ni;
        let c = ENERGY_MAP_RATE * delta / 2.0;
        let h_u = 1.0 / ni as f64;
        let mut i_nodes = vec![0.0; ni];
        let mut wi = vec![0.0; ni];
        let mut e_nodes = vec![0.0; ni];
        for j in 0..ni {
            let u = (j as f64 + 0.5) * h_u;
            let stretch = 1.0 / u - 1.0;
            i_nodes[j] = i_max * (-c * stretch).exp();
            e_nodes[j] = e_max * (-ENERGY_MAP_RATE * stretch).exp();
            wi[j] = i_nodes[j] * c / (u * u) * h_u;
        }

        // Calibrate the I-weights so the discrete moments Σ w e^{−E} and
        // Σ w E e^{−E} hit their exact values Γ(δ/2+1) = 1/Λ_δ and
        // (δ/2)·Γ(δ/2+1). A multiplicative correction w → w(1 + α + βE)
        // with a 2×2 solve leaves positivity intact (α, β are O(map error),
        // around 1e−10 at the defaults).
        let (mut s0, mut s1, mut s2) = (Kahan::new(), Kahan::new(), Kahan::new());
        for j in 0..ni {
            let boltz = (-e_nodes[j]).exp();
            s0.add(wi[j] * boltz);
            s1.add(wi[j] * e_nodes[j] * boltz);
            s2.add(wi[j] * e_nodes[j] * e_nodes[j] * boltz);
        }
        let t0 = 1.0 / lambda;
        let t1 = 0.5 * delta * t0;
        let gram = [s0.value(), s1.value(), s1.value(), s2.value()];
        let rhs = [t0 - s0.value(), t1 - s1.value()];
        let corr = crate::linalg::solve_dense(&gram, &rhs, 2).ok_or_else(|| {
            Error::Grid("internal-energy weight calibration system is singular".into())
        })?;
        for j in 0..ni {
            wi[j] *= 1.0 + corr[0] + corr[1] * e_nodes[j];
            if !(wi[j] > 0.0) {
                return Err(Error::Grid(format!(
                    "internal-energy weight {} at node {j} is not strictly positive \
                     (extents too wide for N_I={ni} at delta={delta})",
                    wi[j]
                )));
            }
        }

        // Per-node tables over one spatial cell.
        let cell_len = nv * nv * nv * ni;
        let mut w = vec![0.0; cell_len];
        let mut v1 = vec![0.0; cell_len];
        let mut v2 = vec![0.0; cell_len];
        let mut v3 = vec![0.0; cell_len];
        let mut vsq = vec![0.0; cell_len];
        let mut e_int = vec![0.0; cell_len];
        let mut m = vec![0.0; cell_len];
        let mut sqrt_m = vec![0.0; cell_len];
        let norm = lambda * (2.0 * std::f64::consts::PI).powf(-1.5);
        let mut idx = 0;
        for a in 0..nv {
            let (va, wa) = (v_axis[a], wv_axis[a]);
            let ga = (-0.5 * va * va).exp();
            for b in 0..nv {
                let (vb, wb) = (v_axis[b], wv_axis[b]);
                let gb = (-0.5 * vb * vb).exp();
                for d in 0..nv {
                    let (vd, wd) = (v_axis[d], wv_axis[d]);
                    let gd = (-0.5 * vd * vd).exp();
                    let wv = wa * wb * wd;
                    let gv = norm * ga * gb * gd;
                    for j in 0..ni {
                        v1[idx] = va;
                        v2[idx] = vb;
                        v3[idx] = vd;
                        vsq[idx] = va * va + vb * vb + vd * vd;
                        e_int[idx] = e_nodes[j];
                        w[idx] = wv * wi[j];
                        let mval = gv * (-e_nodes[j]).exp();
                        m[idx] = mval;
                        sqrt_m[idx] = mval.sqrt();
                        idx += 1;
                    }
                }
            }
        }
        debug_assert_eq!(idx, cell_len);
        if m.iter().any(|&x| !(x > 0.0)) {
            return Err(Error::Grid(
                "global Maxwellian underflowed to zero at a node; shrink the extents".into(),
            ));
        }

        let mut grid = PhaseGrid {
            params,
            nx: spec.nx,
            length: spec.length,
            dx: spec.length / spec.nx as f64,
            nv,
            v_max,
            ni,
            i_max,
            lambda,
            v_axis,
            wv_axis,
            i_nodes,
            wi,
            e_nodes,
            mass_defect: 0.0,
            w,
            v1,
            v2,
            v3,
            vsq,
            e_int,
            m,
            sqrt_m,
        };
        let mut mass = Kahan::new();
        for (wn, mn) in grid.w.iter().zip(&grid.m) {
            mass.add(wn * mn);
        }
        grid.mass_defect = mass.value() - 1.0;
        Ok(grid)
    }

    /// Number of (v, I) nodes in one spatial cell.
    pub fn cell_len(&self) -> usize {
        self.nv * self.nv * self.nv * self.ni
    }

    pub fn node_index(&self, iv1: usize, iv2: usize, iv3: usize, ii: usize) -> usize {
        ((iv1 * self.nv + iv2) * self.nv + iv3) * self.ni + ii
    }

    /// Center coordinate of spatial cell `ix`.
    pub fn x_center(&self, ix: usize) -> f64 {
        (ix as f64 + 0.5) * self.dx
    }

    /// Weighted L² inner product over one fixed-x slice: Σ w_v w_I a b.
    pub fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), self.w.len());
        debug_assert_eq!(b.len(), self.w.len());
        let mut acc = Kahan::new();
        for ((wn, an), bn) in self.w.iter().zip(a).zip(b) {
            acc.add(wn * an * bn);
        }
        acc.value()
    }

    pub fn norm_sq(&self, a: &[f64]) -> f64 {
        self.dot(a, a)
    }

    /// Plain weighted integral Σ w a over one fixed-x slice.
    pub fn integrate(&self, a: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), self.w.len());
        let mut acc = Kahan::new();
        for (wn, an) in self.w.iter().zip(a) {
            acc.add(wn * an);
        }
        acc.value()
    }
}

/// Distribution values over the whole grid, one contiguous slice per x-cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub nx: usize,
    pub cell_len: usize,
    pub data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &PhaseGrid) -> ScalarField {
        ScalarField {
            nx: grid.nx,
            cell_len: grid.cell_len(),
            data: vec![0.0; grid.nx * grid.cell_len()],
        }
    }

    pub fn cell(&self, ix: usize) -> &[f64] {
        &self.data[ix * self.cell_len..(ix + 1) * self.cell_len]
    }

    pub fn cell_mut(&mut self, ix: usize) -> &mut [f64] {
        &mut self.data[ix * self.cell_len..(ix + 1) * self.cell_len]
    }

    /// Splits the field into per-cell mutable slices, for disjoint parallel
    /// writes.
    pub fn cells_mut(&mut self) -> std::slice::ChunksMut<'_, f64> {
        self.data.chunks_mut(self.cell_len)
    }
}

/// Compensated (Kahan) accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    pub fn new() -> Self {
        Kahan::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let y = x - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// Normalizing factor Λ_δ = 1 / ∫₀^∞ e^{−I^{2/δ}} dI of the equilibrium
/// internal-energy weight, to relative accuracy 1e−12.
///
/// The integral equals Γ(δ/2+1); substituting t = s⁴ in the Euler integral
/// gives 4∫₀^∞ s^{2δ+3} e^{−s⁴} ds whose integrand is smooth at the origin
/// for every δ > 0, so adaptive Simpson converges without endpoint tricks.
pub fn lambda_delta(delta: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::Param(format!("delta must be positive, got {delta}")));
    }
    let p = 2.0 * delta + 3.0;
    let f = |s: f64| 4.0 * s.powf(p) * (-s.powi(4)).exp();
    let s_max = (50.0 + 10.0 * delta).powf(0.25);
    let gamma = adaptive_simpson(&f, 0.0, s_max, 1e-13)?;
    Ok(1.0 / gamma)
}

fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
    h / 6.0 * (fa + 4.0 * fm + fb)
}

/// Adaptive Simpson with Richardson acceptance, relative tolerance `rel_tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(fa, fm, fb, b - a);
    let scale = whole.abs().max(1e-300);
    let mut out = 0.0;
    adaptive_step(f, a, b, fa, fm, fb, whole, rel_tol * scale, 0, &mut out)?;
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn adaptive_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
    out: &mut f64,
) -> Result<()> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(fa, flm, fm, m - a);
    let right = simpson(fm, frm, fb, b - m);
    let diff = left + right - whole;
    if diff.abs() <= 15.0 * tol || (b - a) < 1e-14 {
        *out += left + right + diff / 15.0;
        return Ok(());
    }
    if depth >= 50 {
        return Err(Error::Quadrature(format!(
            "adaptive Simpson hit depth 50 on [{a}, {b}]"
        )));
    }
    adaptive_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1, out)?;
    adaptive_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1, out)
}

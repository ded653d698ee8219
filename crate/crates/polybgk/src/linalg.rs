//! Small dense linear algebra: symmetric 3×3 tensors with a closed-form
//! eigensolver, Jacobi iteration for small symmetric matrices, and a pivoted
//! Gauss solver for the Newton systems.
//!
//! Everything here is at most 16×16, so hand-rolled routines beat pulling in
//! a matrix library and keep the numeric behavior fully under our control.

/// Symmetric 3×3 tensor stored as [xx, yy, zz, xy, yz, zx].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sym3(pub [f64; 6]);

impl Sym3 {
    pub const IDENTITY: Sym3 = Sym3([1.0, 1.0, 1.0, 0.0, 0.0, 0.0]);

    pub fn zero() -> Self {
        Sym3([0.0; 6])
    }

    pub fn from_diag(d: [f64; 3]) -> Self {
        Sym3([d[0], d[1], d[2], 0.0, 0.0, 0.0])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match (i, j) {
            (0, 0) => self.0[0],
            (1, 1) => self.0[1],
            (2, 2) => self.0[2],
            (0, 1) | (1, 0) => self.0[3],
            (1, 2) | (2, 1) => self.0[4],
            (0, 2) | (2, 0) => self.0[5],
            _ => panic!("index out of range"),
        }
    }

    pub fn trace(&self) -> f64 {
        self.0[0] + self.0[1] + self.0[2]
    }

    pub fn det(&self) -> f64 {
        let [a, b, c, d, e, f] = self.0; // [xx, yy, zz, xy, yz, zx]
        a * (b * c - e * e) - d * (d * c - e * f) + f * (d * e - b * f)
    }

    /// Inverse through the adjugate; caller guarantees non-singularity.
    pub fn inverse(&self) -> Sym3 {
        let [a, b, c, d, e, f] = self.0;
        let det = self.det();
        Sym3([
            (b * c - e * e) / det,
            (a * c - f * f) / det,
            (a * b - d * d) / det,
            (e * f - d * c) / det,
            (d * f - a * e) / det,
            (d * e - b * f) / det,
        ])
    }

    /// Quadratic form qᵀ A q.
    pub fn quad_form(&self, q: [f64; 3]) -> f64 {
        let [a, b, c, d, e, f] = self.0;
        a * q[0] * q[0]
            + b * q[1] * q[1]
            + c * q[2] * q[2]
            + 2.0 * (d * q[0] * q[1] + e * q[1] * q[2] + f * q[0] * q[2])
    }

    pub fn scale(&self, s: f64) -> Sym3 {
        let mut out = self.0;
        for x in &mut out {
            *x *= s;
        }
        Sym3(out)
    }

    pub fn add(&self, other: &Sym3) -> Sym3 {
        let mut out = self.0;
        for (x, y) in out.iter_mut().zip(other.0) {
            *x += y;
        }
        Sym3(out)
    }

    pub fn sub(&self, other: &Sym3) -> Sym3 {
        let mut out = self.0;
        for (x, y) in out.iter_mut().zip(other.0) {
            *x -= y;
        }
        Sym3(out)
    }

    pub fn frobenius(&self) -> f64 {
        let [a, b, c, d, e, f] = self.0;
        (a * a + b * b + c * c + 2.0 * (d * d + e * e + f * f)).sqrt()
    }

    /// Eigenvalues in ascending order.
    ///
    /// Uses the closed-form trigonometric solution of the characteristic
    /// cubic. Near a triple eigenvalue the deviatoric scale p² collapses and
    /// the acos argument loses all significance, so below a relative
    /// discriminant of 1e−12 the computation falls back to Jacobi iteration.
    pub fn eigenvalues(&self) -> [f64; 3] {
        let [a, b, c, d, e, f] = self.0;
        let q = self.trace() / 3.0;
        let p1 = d * d + e * e + f * f;
        let p2 = (a - q).powi(2) + (b - q).powi(2) + (c - q).powi(2) + 2.0 * p1;
        let scale = self.frobenius().max(1e-300);
        if p2 <= 1e-12 * scale * scale {
            // Nearly spherical tensor: the trig formula is ill-conditioned.
            let mut m = [[a, d, f], [d, b, e], [f, e, c]];
            let mut eig = jacobi_eigenvalues(&mut m, 3);
            eig.sort_by(|x, y| x.partial_cmp(y).unwrap());
            return [eig[0], eig[1], eig[2]];
        }
        let p = (p2 / 6.0).sqrt();
        // B = (A - q I)/p, r = det(B)/2 in [-1, 1] up to rounding.
        let bm = Sym3([(a - q) / p, (b - q) / p, (c - q) / p, d / p, e / p, f / p]);
        let r = (bm.det() / 2.0).clamp(-1.0, 1.0);
        let phi = r.acos() / 3.0;
        let e1 = q + 2.0 * p * phi.cos();
        let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
        let e2 = 3.0 * q - e1 - e3;
        let mut eig = [e1, e2, e3];
        eig.sort_by(|x, y| x.partial_cmp(y).unwrap());
        eig
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }
}

/// Maximum size of the dense symmetric problems handled here (basis Grams
/// and the 11-mode operator matrix).
pub const MAX_DENSE: usize = 16;

/// Eigenvalues of a small symmetric matrix by cyclic Jacobi rotations.
/// `m` is overwritten. Returns unsorted eigenvalues (the diagonal).
pub fn jacobi_eigenvalues(m: &mut [[f64; 3]], n: usize) -> Vec<f64> {
    // Convenience wrapper for the 3x3 fallback path.
    assert!(n <= 3);
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = m[i][j];
        }
    }
    let (eig, _) = sym_eigen(&a, n);
    eig
}

/// Full symmetric eigendecomposition A = V diag(λ) Vᵀ by cyclic Jacobi.
///
/// `a` is row-major n×n with n ≤ [`MAX_DENSE`]. Returns eigenvalues in
/// ascending order with the matching eigenvector columns flattened
/// row-major into `v` (v[i*n + k] is component i of eigenvector k).
pub fn sym_eigen(a: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n <= MAX_DENSE && a.len() == n * n);
    let mut m = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    for _sweep in 0..60 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[i * n + j] * m[i * n + j];
            }
        }
        let scale: f64 = (0..n).map(|i| m[i * n + i] * m[i * n + i]).sum::<f64>() + off;
        if off <= 1e-30 * scale.max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| m[i * n + i]).collect();
    // Sort ascending, permuting eigenvector columns alongside.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig[x].partial_cmp(&eig[y]).unwrap());
    let eig_sorted: Vec<f64> = order.iter().map(|&k| eig[k]).collect();
    let mut v_sorted = vec![0.0; n * n];
    for (new_k, &old_k) in order.iter().enumerate() {
        for i in 0..n {
            v_sorted[i * n + new_k] = v[i * n + old_k];
        }
    }
    eig = eig_sorted;
    (eig, v_sorted)
}

/// Solve A x = b for a small dense system by Gaussian elimination with
/// partial pivoting. Returns None on (numerical) singularity.
pub fn solve_dense(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    assert!(a.len() == n * n && b.len() == n);
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    for col in 0..n {
        let mut piv = col;
        for r in (col + 1)..n {
            if m[r * n + col].abs() > m[piv * n + col].abs() {
                piv = r;
            }
        }
        if m[piv * n + col] == 0.0 {
            return None;
        }
        if piv != col {
            for k in 0..n {
                m.swap(col * n + k, piv * n + k);
            }
            x.swap(col, piv);
        }
        let d = m[col * n + col];
        for r in (col + 1)..n {
            let factor = m[r * n + col] / d;
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                m[r * n + k] -= factor * m[col * n + k];
            }
            x[r] -= factor * x[col];
        }
    }
    for col in (0..n).rev() {
        let mut s = x[col];
        for k in (col + 1)..n {
            s -= m[col * n + k] * x[k];
        }
        x[col] = s / m[col * n + col];
    }
    Some(x)
}

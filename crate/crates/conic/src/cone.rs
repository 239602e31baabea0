//! Cones handled by the splitting solver and their Euclidean projections.
//!
//! Symmetric matrices live in `svec` form: the lower triangle stored column by
//! column, with off-diagonal entries scaled by `√2`. This makes `svec` an
//! isometry, so `⟨svec A, svec B⟩ = tr(AB)` and Euclidean projection in `svec`
//! space is Frobenius projection in matrix space.

use nalgebra::{DMatrix, SymmetricEigen};
use std::f64::consts::SQRT_2;

/// A closed convex cone block of the slack vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cone {
    /// `{0}ᵈ`, used for equality rows.
    Zero(usize),
    /// Nonnegative orthant `ℝᵈ₊`.
    Nonnegative(usize),
    /// Second-order cone `{(t, v) : ‖v‖₂ ≤ t}` of total dimension `d`.
    SecondOrder(usize),
    /// Positive semidefinite `m×m` matrices in `svec` form (dimension `m(m+1)/2`).
    Psd(usize),
}

impl Cone {
    /// Number of slack entries occupied by this block.
    pub fn dim(&self) -> usize {
        match *self {
            Cone::Zero(d) | Cone::Nonnegative(d) | Cone::SecondOrder(d) => d,
            Cone::Psd(m) => svec_len(m),
        }
    }

    /// Blocks whose membership is not invariant under per-row rescaling.
    pub(crate) fn needs_uniform_scaling(&self) -> bool {
        matches!(self, Cone::SecondOrder(_) | Cone::Psd(_))
    }

    /// Projects `v` (of length `self.dim()`) onto the cone in place.
    pub(crate) fn project(&self, v: &mut [f64]) {
        debug_assert_eq!(v.len(), self.dim());
        match *self {
            Cone::Zero(_) => v.iter_mut().for_each(|e| *e = 0.0),
            Cone::Nonnegative(_) => v.iter_mut().for_each(|e| *e = e.max(0.0)),
            Cone::SecondOrder(_) => project_soc(v),
            Cone::Psd(m) => project_psd(v, m),
        }
    }
}

/// Length of the `svec` representation of an `m×m` symmetric matrix.
pub fn svec_len(m: usize) -> usize {
    m * (m + 1) / 2
}

/// Position of entry `(i, j)` (either triangle) in the `svec` of an `m×m` matrix.
pub fn svec_index(i: usize, j: usize, m: usize) -> usize {
    let (r, c) = if i >= j { (i, j) } else { (j, i) };
    debug_assert!(r < m);
    c * m - c * (c.saturating_sub(1)) / 2 - c + r
}

/// Scale applied to entry `(i, j)` when packing into `svec`.
#[inline]
pub fn svec_scale(i: usize, j: usize) -> f64 {
    if i == j {
        1.0
    } else {
        SQRT_2
    }
}

/// Unpacks an `svec` vector into a dense symmetric matrix.
pub fn svec_to_mat(v: &[f64], m: usize) -> DMatrix<f64> {
    assert_eq!(v.len(), svec_len(m), "svec length mismatch");
    let mut out = DMatrix::zeros(m, m);
    let mut k = 0;
    for j in 0..m {
        for i in j..m {
            let x = if i == j { v[k] } else { v[k] / SQRT_2 };
            out[(i, j)] = x;
            out[(j, i)] = x;
            k += 1;
        }
    }
    out
}

/// Packs the lower triangle of a symmetric matrix into `out`.
pub fn mat_to_svec(a: &DMatrix<f64>, out: &mut [f64]) {
    let m = a.nrows();
    assert_eq!(out.len(), svec_len(m), "svec length mismatch");
    let mut k = 0;
    for j in 0..m {
        for i in j..m {
            out[k] = if i == j {
                a[(i, i)]
            } else {
                SQRT_2 * 0.5 * (a[(i, j)] + a[(j, i)])
            };
            k += 1;
        }
    }
}

fn project_soc(v: &mut [f64]) {
    let t = v[0];
    let norm = v[1..].iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm <= t {
        return;
    }
    if norm <= -t {
        v.iter_mut().for_each(|e| *e = 0.0);
        return;
    }
    let a = 0.5 * (norm + t);
    v[0] = a;
    let s = a / norm;
    v[1..].iter_mut().for_each(|e| *e *= s);
}

fn project_psd(v: &mut [f64], m: usize) {
    if m == 1 {
        v[0] = v[0].max(0.0);
        return;
    }
    let a = svec_to_mat(v, m);
    let eig = SymmetricEigen::new(a);
    let n_pos = eig.eigenvalues.iter().filter(|&&l| l > 0.0).count();
    if n_pos == m {
        return;
    }
    let mut out = DMatrix::zeros(m, m);
    if n_pos > 0 {
        // V₊ Λ₊ V₊ᵀ over the positive part only
        let mut scaled = DMatrix::zeros(m, n_pos);
        let mut plain = DMatrix::zeros(m, n_pos);
        let mut c = 0;
        for (k, &lam) in eig.eigenvalues.iter().enumerate() {
            if lam > 0.0 {
                let col = eig.eigenvectors.column(k);
                plain.set_column(c, &col);
                scaled.set_column(c, &(col * lam));
                c += 1;
            }
        }
        out = &scaled * plain.transpose();
    }
    mat_to_svec(&out, v);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svec_index_matches_packing_order() {
        let m = 4;
        let mut k = 0;
        for j in 0..m {
            for i in j..m {
                assert_eq!(svec_index(i, j, m), k);
                assert_eq!(svec_index(j, i, m), k);
                k += 1;
            }
        }
        assert_eq!(k, svec_len(m));
    }

    #[test]
    fn svec_is_an_isometry() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 0.5, -1.0, 3.0, 0.25, 0.5, 0.25, 1.0]);
        let b = DMatrix::from_row_slice(3, 3, &[1.0, 0.3, -0.2, 0.3, -2.0, 0.7, -0.2, 0.7, 0.4]);
        let mut va = vec![0.0; 6];
        let mut vb = vec![0.0; 6];
        mat_to_svec(&a, &mut va);
        mat_to_svec(&b, &mut vb);
        let dot: f64 = va.iter().zip(&vb).map(|(x, y)| x * y).sum();
        assert!((dot - (&a * &b).trace()).abs() < 1e-12);
        assert_eq!(svec_to_mat(&va, 3), a);
    }

    #[test]
    fn psd_projection_clips_negative_eigenvalues() {
        // diag(2, -3) rotated by 45 degrees
        let a = DMatrix::from_row_slice(2, 2, &[-0.5, 2.5, 2.5, -0.5]);
        let mut v = vec![0.0; 3];
        mat_to_svec(&a, &mut v);
        Cone::Psd(2).project(&mut v);
        let p = svec_to_mat(&v, 2);
        let expected = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!((p - expected).norm() < 1e-12);
    }

    #[test]
    fn soc_projection_cases() {
        let mut inside = vec![2.0, 1.0, 1.0];
        Cone::SecondOrder(3).project(&mut inside);
        assert_eq!(inside, vec![2.0, 1.0, 1.0]);

        let mut polar = vec![-2.0, 1.0, 0.0];
        Cone::SecondOrder(3).project(&mut polar);
        assert_eq!(polar, vec![0.0, 0.0, 0.0]);

        let mut v = vec![0.0, 3.0, 4.0];
        Cone::SecondOrder(3).project(&mut v);
        assert!((v[0] - 2.5).abs() < 1e-12);
        assert!((v[1] - 1.5).abs() < 1e-12 && (v[2] - 2.0).abs() < 1e-12);
    }
}

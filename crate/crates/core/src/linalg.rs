//! Small dense linear-algebra helpers shared by the model and filter code.

use nalgebra::SymmetricEigen;

use crate::{Matrix, Vector};

/// Tolerance used for PSD and symmetry checks on covariances.
pub const PSD_TOL: f64 = 1e-10;

/// Returns `(m + mᵀ) / 2`.
pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// Largest absolute entry of `m - mᵀ`.
pub fn asymmetry(m: &Matrix) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    let mut worst = 0.0_f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Eigenvalues of the symmetric part of `m`, ascending.
pub fn sym_eigenvalues(m: &Matrix) -> Vector {
    if m.nrows() == 0 {
        return Vector::zeros(0);
    }
    let mut ev = SymmetricEigen::new(symmetrize(m)).eigenvalues;
    ev.as_mut_slice().sort_by(f64::total_cmp);
    ev
}

/// Smallest eigenvalue of the symmetric part of `m` (`+inf` for an empty matrix).
pub fn min_eigenvalue(m: &Matrix) -> f64 {
    sym_eigenvalues(m).iter().copied().fold(f64::INFINITY, f64::min)
}

/// Square, symmetric within `tol`, and no eigenvalue below `-tol`.
pub fn is_psd(m: &Matrix, tol: f64) -> bool {
    m.is_square() && asymmetry(m) <= tol && min_eigenvalue(m) >= -tol
}

/// A factor `F` with `F Fᵀ = m` built from the symmetric eigendecomposition.
/// Eigenvalues down to `-tol` are clamped to zero; anything lower is rejected.
pub fn psd_sqrt(m: &Matrix, tol: f64) -> Option<Matrix> {
    if !m.is_square() {
        return None;
    }
    if m.nrows() == 0 {
        return Some(m.clone());
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let mut q = eig.eigenvectors;
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda < -tol || !lambda.is_finite() {
            return None;
        }
        let s = libm::sqrt(lambda.max(0.0));
        q.column_mut(j).scale_mut(s);
    }
    Some(q)
}

pub fn all_finite(m: &Matrix) -> bool {
    m.iter().all(|v| v.is_finite())
}

//! Small dense complex linear algebra on top of nalgebra.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;

pub fn czero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

/// Singular values in descending order.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Eigen-decomposition of a Hermitian matrix: eigenvalues (clamped at zero
/// from below when `psd` is set) and the unitary matrix of eigenvectors.
pub fn hermitian_eigen(m: &CMat, psd: bool) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    if n == 1 {
        let v = m[(0, 0)].re;
        return (vec![if psd { v.max(0.0) } else { v }], CMat::identity(1, 1));
    }
    let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(h);
    let vals = eig
        .eigenvalues
        .iter()
        .map(|&v| if psd { v.max(0.0) } else { v })
        .collect();
    (vals, eig.eigenvectors)
}

/// Eigenvalues only of a Hermitian matrix, clamped as in [`hermitian_eigen`].
pub fn hermitian_eigenvalues(m: &CMat, psd: bool) -> Vec<f64> {
    let clamp = |v: f64| if psd { v.max(0.0) } else { v };
    if m.nrows() == 1 {
        return vec![clamp(m[(0, 0)].re)];
    }
    let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    h.symmetric_eigenvalues().iter().map(|&v| clamp(v)).collect()
}

/// `A^H A`.
pub fn gram(a: &CMat) -> CMat {
    a.adjoint() * a
}

//! Small helpers for 2x2 complex Hermitian matrices.

use nalgebra::Matrix2;
use num_complex::Complex64;

/// 2x2 complex matrix, the value type of Maxwell weights.
pub type Mat2 = Matrix2<Complex64>;

/// Eigenvalues of a Hermitian 2x2 matrix, ascending. Uses the closed form
/// `(tr +- sqrt(tr^2 - 4 det)) / 2`; the discriminant is clamped at zero so
/// tiny negative round-off cannot produce NaN.
pub fn eigvals_hermitian(m: &Mat2) -> (f64, f64) {
    let tr = m[(0, 0)].re + m[(1, 1)].re;
    let det = (m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]).re;
    let disc = (tr * tr - 4.0 * det).max(0.0).sqrt();
    (0.5 * (tr - disc), 0.5 * (tr + disc))
}

/// Spectral norm of a general 2x2 complex matrix (largest singular value).
pub fn spectral_norm(m: &Mat2) -> f64 {
    let mtm = m.adjoint() * m;
    let (_, hi) = eigvals_hermitian(&mtm);
    hi.max(0.0).sqrt()
}

/// Frobenius distance to the Hermitian part, `||m - m^dagger||_F`.
pub fn hermiticity_defect(m: &Mat2) -> f64 {
    (m - m.adjoint()).norm()
}

/// Inverse of a 2x2 matrix by the adjugate formula.
pub fn inverse(m: &Mat2) -> Mat2 {
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    Mat2::new(m[(1, 1)] / det, -m[(0, 1)] / det, -m[(1, 0)] / det, m[(0, 0)] / det)
}

/// Pointwise Cholesky factor `g` (lower triangular) with `m = g g^dagger`.
/// Requires `m` Hermitian positive definite.
pub fn cholesky(m: &Mat2) -> Mat2 {
    let a = m[(0, 0)].re.sqrt();
    let b = m[(1, 0)] / a;
    let d = (m[(1, 1)].re - b.norm_sqr()).sqrt();
    Mat2::new(
        Complex64::new(a, 0.0),
        Complex64::new(0.0, 0.0),
        b,
        Complex64::new(d, 0.0),
    )
}

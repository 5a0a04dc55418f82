//! Dense Hermitian eigensolves and related helpers shared across modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Hermitian eigendecomposition with eigenvalues sorted ascending and the
/// eigenvector columns permuted to match.
pub(crate) fn eigh_ascending(m: &DMatrix<Complex64>) -> (Vec<f64>, DMatrix<Complex64>) {
    let se = m.clone().symmetric_eigen();
    let n = se.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].partial_cmp(&se.eigenvalues[b]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        vectors.set_column(col, &se.eigenvectors.column(i));
    }
    (values, vectors)
}

/// Smallest singular value of a square complex matrix, computed as the square
/// root of the smallest eigenvalue of `m^dagger m`.
pub(crate) fn smallest_singular_value(m: &DMatrix<Complex64>) -> f64 {
    let gram = m.adjoint() * m;
    let (values, _) = eigh_ascending(&gram);
    values[0].max(0.0).sqrt()
}

/// Operator norm (largest singular value) of a square complex matrix.
pub(crate) fn largest_singular_value(m: &DMatrix<Complex64>) -> f64 {
    let gram = m.adjoint() * m;
    let (values, _) = eigh_ascending(&gram);
    values[values.len() - 1].max(0.0).sqrt()
}

/// Hermiticity defect `||m - m^dagger||_2` (spectral norm).
pub(crate) fn hermiticity_defect(m: &DMatrix<Complex64>) -> f64 {
    largest_singular_value(&(m - m.adjoint()))
}

/// Inner product `x^dagger y`.
pub(crate) fn cdot(x: &DVector<Complex64>, y: &DVector<Complex64>) -> Complex64 {
    x.dotc(y)
}

/// First-order perturbation values `<v, A v>` of eigenpairs under a Hermitian
/// quadratic form `A`, with the degenerate-subspace correction: clusters of
/// eigenvalues closer than `deg_tol` are diagonalized in the form, which also
/// rotates the eigenvector columns to the canonical gauge inside the cluster.
pub(crate) fn cluster_form_values(
    form: &DMatrix<Complex64>,
    values: &[f64],
    vectors: &mut DMatrix<Complex64>,
    deg_tol: f64,
) -> Vec<f64> {
    let n = values.len();
    let dim = vectors.nrows();
    let mut out = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[end] - values[end - 1] < deg_tol {
            end += 1;
        }
        if end - start == 1 {
            let v = vectors.column(start).clone_owned();
            out[start] = cdot(&v, &(form * &v)).re;
        } else {
            let r = end - start;
            let cols: Vec<DVector<Complex64>> =
                (start..end).map(|i| vectors.column(i).clone_owned()).collect();
            let mut sub = DMatrix::zeros(r, r);
            for i in 0..r {
                let fi = form * &cols[i];
                for j in 0..r {
                    sub[(j, i)] = cdot(&cols[j], &fi);
                }
            }
            let (sub_vals, sub_vecs) = eigh_ascending(&sub);
            for (local, value) in sub_vals.iter().enumerate() {
                out[start + local] = *value;
                let mut rotated = DVector::zeros(dim);
                for j in 0..r {
                    rotated += &cols[j] * sub_vecs[(j, local)];
                }
                vectors.set_column(start + local, &rotated);
            }
        }
        start = end;
    }
    out
}

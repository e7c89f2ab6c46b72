//! Dense decompositions. Storage is `nalgebra`; the factorizations run in
//! `faer`, whose symmetric eigensolver is markedly more accurate here.

use faer::complex_native::c64;
use faer::prelude::*;
use faer::{Mat, Side};
use nalgebra::{DMatrix, DVector};

fn to_faer(m: &DMatrix<f64>) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer(m: faer::MatRef<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m.read(i, j))
}

/// Ascending eigenvalues of a symmetric matrix (lower triangle read) and,
/// on request, the matching orthonormal eigenvectors as columns.
pub fn sym_eigen(m: &DMatrix<f64>, vectors: bool) -> (Vec<f64>, Option<DMatrix<f64>>) {
    let f = to_faer(m);
    if !vectors {
        let mut values = f.selfadjoint_eigenvalues(Side::Lower);
        values.sort_by(f64::total_cmp);
        return (values, None);
    }
    let evd = f.selfadjoint_eigendecomposition(Side::Lower);
    let s = evd.s().column_vector();
    let mut order: Vec<usize> = (0..s.nrows()).collect();
    order.sort_by(|&a, &b| s.read(a).total_cmp(&s.read(b)));
    let values = order.iter().map(|&k| s.read(k)).collect();
    let u = evd.u();
    let vecs = DMatrix::from_fn(m.nrows(), order.len(), |i, j| u.read(i, order[j]));
    (values, Some(vecs))
}

/// Eigenvalues of a general real square matrix as `(re, im)` pairs.
pub fn eigenvalues(m: &DMatrix<f64>) -> Vec<(f64, f64)> {
    to_faer(m)
        .eigenvalues::<c64>()
        .into_iter()
        .map(|z| (z.re, z.im))
        .collect()
}

/// Smallest singular value and its right singular vector.
pub fn smallest_singular(m: &DMatrix<f64>) -> (f64, DVector<f64>) {
    let svd = to_faer(m).svd();
    let s = svd.s_diagonal();
    let k = (0..s.nrows())
        .min_by(|&a, &b| s.read(a).total_cmp(&s.read(b)))
        .expect("non-empty matrix");
    let v = svd.v();
    (s.read(k), DVector::from_fn(v.nrows(), |i, _| v.read(i, k)))
}

/// All singular values, nonincreasing.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    to_faer(m).singular_values()
}

/// Determinant through an LU factorization.
pub fn determinant(m: &DMatrix<f64>) -> f64 {
    to_faer(m).determinant()
}

/// LU factorization with partial pivoting for repeated solves.
pub struct Lu(faer::linalg::solvers::PartialPivLu<f64>);

impl Lu {
    pub fn new(m: &DMatrix<f64>) -> Self {
        Lu(to_faer(m).partial_piv_lu())
    }

    pub fn solve(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        from_faer(self.0.solve(to_faer(rhs)).as_ref())
    }
}

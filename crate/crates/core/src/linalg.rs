//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

pub type RMat = DMatrix<f64>;
pub type CMat = DMatrix<C64>;

pub fn singular_values_c(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

pub fn singular_values_r(m: &RMat) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Ratio of largest to smallest singular value (infinite when singular).
pub fn condition_number_c(m: &CMat) -> f64 {
    let s = singular_values_c(m);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

pub fn condition_number_r(m: &RMat) -> f64 {
    let s = singular_values_r(m);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

/// Orthonormal basis (as columns) of the null space of a real matrix,
/// assuming its rank is `ncols - dim`.
pub fn real_kernel(m: &RMat, dim: usize) -> RMat {
    let ncols = m.ncols();
    // Pad rows so the SVD exposes the full right singular basis.
    let mut padded = RMat::zeros(m.nrows().max(ncols), ncols);
    padded.view_mut((0, 0), (m.nrows(), ncols)).copy_from(m);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    let mut basis = RMat::zeros(ncols, dim);
    for (col, &idx) in order.iter().take(dim).enumerate() {
        basis.set_column(col, &v_t.row(idx).transpose());
    }
    basis
}

/// Least-squares solution of a real system via SVD; returns the solution
/// and the residual norm.
pub fn real_lstsq(a: &RMat, b: &DVector<f64>) -> (DVector<f64>, f64) {
    let svd = a.clone().svd(true, true);
    let x = svd.solve(b, 1e-14).expect("svd solve");
    let residual = (a * &x - b).norm();
    (x, residual)
}

/// Least-squares solution of a complex system via SVD with residual norm.
pub fn complex_lstsq(a: &CMat, b: &DVector<C64>) -> (DVector<C64>, f64) {
    let svd = a.clone().svd(true, true);
    let x = svd.solve(b, 1e-14).expect("svd solve");
    let residual = (a * &x - b).norm();
    (x, residual)
}

/// Gram-Schmidt on real vectors, keeping those with residual norm above
/// `tol`, stopping at `limit` outputs.
pub fn gram_schmidt(candidates: &[DVector<f64>], limit: usize, tol: f64) -> Vec<DVector<f64>> {
    let mut out: Vec<DVector<f64>> = Vec::new();
    for v in candidates {
        if out.len() == limit {
            break;
        }
        let mut r = v.clone();
        for _ in 0..2 {
            for q in &out {
                let proj = q.dot(&r);
                r -= q * proj;
            }
        }
        let norm = r.norm();
        if norm > tol {
            out.push(r / norm);
        }
    }
    out
}

/// Complex Gram-Schmidt with the Hermitian inner product.
pub fn gram_schmidt_c(candidates: &[DVector<C64>], limit: usize, tol: f64) -> Vec<DVector<C64>> {
    let mut out: Vec<DVector<C64>> = Vec::new();
    for v in candidates {
        if out.len() == limit {
            break;
        }
        let mut r = v.clone();
        for _ in 0..2 {
            for q in &out {
                let proj = q.dotc(&r);
                r -= q * proj;
            }
        }
        let norm = r.norm();
        if norm > tol {
            out.push(r.unscale(norm));
        }
    }
    out
}

/// Cosines of principal angles between two column spaces (each given by
/// an orthonormal basis), sorted descending.
pub fn principal_cosines(a: &RMat, b: &RMat) -> Vec<f64> {
    singular_values_r(&(a.transpose() * b))
}

/// Orthonormalizes the columns of a real matrix (thin QR).
pub fn orthonormal_columns(m: &RMat) -> RMat {
    let cols: Vec<DVector<f64>> = m.column_iter().map(|c| c.into_owned()).collect();
    let q = gram_schmidt(&cols, cols.len(), 1e-300);
    RMat::from_columns(&q)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_of_projection() {
        let m = RMat::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let k = real_kernel(&m, 2);
        assert!((&m * &k).norm() < 1e-14);
        assert!((k.transpose() * &k - RMat::identity(2, 2)).norm() < 1e-14);
    }

    #[test]
    fn condition_of_identity() {
        let id = CMat::identity(3, 3);
        assert!((condition_number_c(&id) - 1.0).abs() < 1e-14);
        let sing = CMat::zeros(2, 2);
        assert!(condition_number_c(&sing).is_infinite());
    }

    #[test]
    fn principal_angles_of_orthogonal_planes() {
        let a = RMat::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
        let b = RMat::from_column_slice(3, 1, &[0.0, 1.0, 0.0]);
        assert!(principal_cosines(&a, &b)[0].abs() < 1e-15);
    }
}

//! Small dense linear-algebra helpers shared by the solver, greedy search
//! and oracles. Everything here is plain SVD/Gram-Schmidt plumbing on dense
//! matrices of at most a few hundred rows and columns.

use nalgebra::{DMatrix, DVector};

/// Minimum-norm least-squares solution of `a x = b` via a truncated SVD.
/// Returns the solution, the numerical rank and the residual norm.
pub fn min_norm_least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> (DVector<f64>, usize, f64) {
    if a.ncols() == 0 {
        return (DVector::zeros(0), 0, b.norm());
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    let tol = smax * 1e-12 * (a.nrows().max(a.ncols()) as f64);
    let u = svd.u.as_ref().expect("svd with u");
    let vt = svd.v_t.as_ref().expect("svd with v_t");
    let mut x = DVector::zeros(a.ncols());
    let mut rank = 0;
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > tol {
            rank += 1;
            let coeff = u.column(k).dot(b) / s;
            x.axpy(coeff, &vt.row(k).transpose(), 1.0);
        }
    }
    let residual = (a * &x - b).norm();
    (x, rank, residual)
}

/// Orthonormal basis of the nullspace of `a` (columns of the result).
///
/// Uses the full eigendecomposition of `aᵀa`; the thin SVD omits the kernel
/// directions of wide matrices.
pub fn nullspace(a: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let ncols = a.ncols();
    if ncols == 0 {
        return DMatrix::zeros(0, 0);
    }
    if a.nrows() == 0 {
        return DMatrix::identity(ncols, ncols);
    }
    let gram = a.transpose() * a;
    let eig = nalgebra::SymmetricEigen::new(gram);
    let lmax = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    let tol = lmax * rel_tol.max(f64::EPSILON * ncols as f64);
    let cols: Vec<usize> =
        (0..ncols).filter(|&k| eig.eigenvalues[k].abs() <= tol).collect();
    let mut basis = DMatrix::zeros(ncols, cols.len());
    for (out, &k) in cols.iter().enumerate() {
        basis.set_column(out, &eig.eigenvectors.column(k));
    }
    basis
}

/// Indices of a maximal linearly independent subset of rows, found by
/// modified Gram-Schmidt with the given absolute tolerance on the norm of
/// the residual relative to the row norm.
pub fn independent_rows(a: &DMatrix<f64>, tol: f64) -> Vec<usize> {
    let mut kept: Vec<usize> = Vec::new();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for r in 0..a.nrows() {
        let mut v: DVector<f64> = a.row(r).transpose();
        let scale = v.norm().max(1.0);
        for q in &basis {
            let c = q.dot(&v);
            v.axpy(-c, q, 1.0);
        }
        // Second pass for numerical robustness.
        for q in &basis {
            let c = q.dot(&v);
            v.axpy(-c, q, 1.0);
        }
        let nrm = v.norm();
        if nrm > tol * scale {
            v /= nrm;
            basis.push(v);
            kept.push(r);
        }
    }
    kept
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn least_squares_exact_and_min_norm() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 3.0]);
        let b = DVector::from_row_slice(&[4.0, 9.0]);
        let (x, rank, res) = min_norm_least_squares(&a, &b);
        assert_eq!(rank, 2);
        assert!(res < 1e-12);
        assert!((x - DVector::from_row_slice(&[2.0, 3.0])).norm() < 1e-12);

        // Underdetermined: the min-norm solution of x1 + x2 = 2 is (1, 1).
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let b = DVector::from_row_slice(&[2.0]);
        let (x, rank, _) = min_norm_least_squares(&a, &b);
        assert_eq!(rank, 1);
        assert!((x - DVector::from_row_slice(&[1.0, 1.0])).norm() < 1e-12);
    }

    #[test]
    fn nullspace_is_orthonormal_and_annihilated() {
        let a = DMatrix::from_row_slice(2, 4, &[1.0, 2.0, 0.0, -1.0, 0.0, 1.0, 1.0, 1.0]);
        let z = nullspace(&a, 1e-12);
        assert_eq!(z.ncols(), 2);
        assert!((&a * &z).norm() < 1e-12);
        let gram = z.transpose() * &z;
        assert!((gram - DMatrix::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn independent_rows_drops_duplicates() {
        let a = DMatrix::from_row_slice(
            4,
            3,
            &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 5.0],
        );
        assert_eq!(independent_rows(&a, 1e-10), vec![0, 1, 3]);
    }
}

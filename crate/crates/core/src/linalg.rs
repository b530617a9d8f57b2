//! Small dense linear-algebra helpers on top of `nalgebra`.

use crate::{Matrix, Vector};

/// Singular values below `PINV_RELATIVE_CUTOFF * sigma_max` are treated as zero.
pub const PINV_RELATIVE_CUTOFF: f64 = 1e-10;

/// Moore-Penrose pseudo-inverse with a cutoff relative to the largest singular value.
pub fn pseudo_inverse(m: &Matrix) -> Matrix {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Matrix::zeros(cols, rows);
    }
    let svd = m.clone().svd(true, true);
    let (Some(u), Some(v_t)) = (svd.u.as_ref(), svd.v_t.as_ref()) else {
        unreachable!("svd was asked for both singular vector sets");
    };
    let sigma_max = svd.singular_values.max();
    if !(sigma_max > 0.0) {
        return Matrix::zeros(cols, rows);
    }
    let cutoff = PINV_RELATIVE_CUTOFF * sigma_max;

    let mut out = Matrix::zeros(cols, rows);
    for (i, &sigma) in svd.singular_values.iter().enumerate() {
        if sigma > cutoff {
            // out += v_i * u_i^T / sigma
            let v_i = v_t.row(i).transpose();
            let u_i = u.column(i);
            out.ger(1.0 / sigma, &v_i, &u_i, 1.0);
        }
    }
    out
}

/// Pseudo-inverse of a symmetric matrix through its eigendecomposition.
///
/// Singular values of a symmetric matrix are the absolute eigenvalues, so the
/// cutoff matches [`pseudo_inverse`]. The eigen route keeps the Penrose
/// identities at round-off level on rank-deficient covariances where the
/// general SVD can lose several digits. When the eigensolver breaks down
/// (entries spanning hundreds of orders of magnitude can make it return
/// non-finite values) this falls back to [`pseudo_inverse`].
pub fn pseudo_inverse_symmetric(m: &Matrix) -> Matrix {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "symmetric pseudo-inverse needs a square matrix");
    if n == 0 {
        return Matrix::zeros(0, 0);
    }
    let eigen = m.clone().symmetric_eigen();
    if !eigen.eigenvalues.iter().chain(eigen.eigenvectors.iter()).all(|x| x.is_finite()) {
        return pseudo_inverse(m);
    }
    let largest = eigen.eigenvalues.iter().fold(0.0_f64, |acc, l| acc.max(l.abs()));
    if !(largest > 0.0) {
        return Matrix::zeros(n, n);
    }
    let cutoff = PINV_RELATIVE_CUTOFF * largest;
    let mut out = Matrix::zeros(n, n);
    for (i, &lambda) in eigen.eigenvalues.iter().enumerate() {
        if lambda.abs() > cutoff {
            let v = eigen.eigenvectors.column(i);
            out.ger(1.0 / lambda, &v, &v, 1.0);
        }
    }
    out
}

/// Least-squares / least-norm solution of `m x = b` through the pseudo-inverse.
pub fn pinv_solve(m: &Matrix, b: &Vector) -> Vector {
    pseudo_inverse(m) * b
}

pub fn max_abs(v: &Vector) -> f64 {
    v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

pub fn all_finite(v: &Vector) -> bool {
    v.iter().all(|x| x.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn inverts_full_rank() {
        let m = Matrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let p = pseudo_inverse(&m);
        assert_relative_eq!(&m * &p, Matrix::identity(3, 3), epsilon = 1e-12);
    }

    #[test]
    fn penrose_conditions_on_rank_deficient() {
        // rank 1
        let m = Matrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, -1.0, -2.0]);
        let p = pseudo_inverse(&m);
        assert_relative_eq!(&m * &p * &m, m.clone(), epsilon = 1e-12);
        assert_relative_eq!(&p * &m * &p, p.clone(), epsilon = 1e-12);
        let mp = &m * &p;
        assert_relative_eq!(mp.transpose(), mp, epsilon = 1e-12);
        let pm = &p * &m;
        assert_relative_eq!(pm.transpose(), pm, epsilon = 1e-12);
    }

    #[test]
    fn symmetric_route_matches_general_route() {
        let a = Matrix::from_row_slice(3, 2, &[1.0, 2.0, 0.5, -1.0, 3.0, 0.0]);
        // rank-2 symmetric 3x3
        let m = &a * a.transpose();
        let p = pseudo_inverse_symmetric(&m);
        assert_relative_eq!(&m * &p * &m, m.clone(), epsilon = 1e-12);
        assert_relative_eq!(p, pseudo_inverse(&m), epsilon = 1e-10);
    }

    #[test]
    fn symmetric_route_survives_widely_scaled_blocks() {
        let mut m = Matrix::zeros(4, 4);
        m[(0, 0)] = 1.0;
        m[(1, 1)] = 0.5;
        m[(0, 1)] = 0.2;
        m[(1, 0)] = 0.2;
        m[(2, 2)] = 3e-150;
        m[(3, 3)] = 1e-152;
        m[(2, 3)] = 1e-151;
        m[(3, 2)] = 1e-151;
        let p = pseudo_inverse_symmetric(&m);
        assert!(p.iter().all(|x| x.is_finite()));
        assert_relative_eq!(&m * &p * &m, m.clone(), epsilon = 1e-12);
    }

    #[test]
    fn zero_matrix() {
        let p = pseudo_inverse(&Matrix::zeros(2, 3));
        assert_eq!(p.shape(), (3, 2));
        assert!(p.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn least_norm_solution() {
        let m = Matrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let x = pinv_solve(&m, &Vector::from_vec(vec![2.0]));
        assert_relative_eq!(x, Vector::from_vec(vec![1.0, 1.0]), epsilon = 1e-12);
    }
}

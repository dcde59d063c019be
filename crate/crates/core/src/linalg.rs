//! Small dense linear-algebra kernels not covered by `nalgebra` directly.

use crate::chain::Matrix;

/// Eigen-decomposition of a real symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    /// Eigenvalues sorted in descending order.
    pub values: Vec<f64>,
    /// Column `k` is the unit eigenvector of `values[k]`.
    pub vectors: Matrix,
    pub sweeps: usize,
}

const MAX_SWEEPS: usize = 100;

fn off_diagonal_norm(a: &Matrix) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s.sqrt()
}

/// Cyclic Jacobi rotations until the off-diagonal Frobenius norm drops
/// below `tol * max(1, ||A||_F)`.
///
/// The input is symmetrized as `(A + A^T)/2` before rotating; callers are
/// expected to pass matrices that are symmetric up to rounding.
pub fn symmetric_eigen(a: &Matrix, tol: f64) -> SymmetricEigen {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "symmetric_eigen needs a square matrix");
    let mut a = (a + a.transpose()) * 0.5;
    let mut v = Matrix::identity(n, n);
    let threshold = tol * a.norm().max(1.0);

    let mut sweeps = 0;
    while sweeps < MAX_SWEEPS && off_diagonal_norm(&a) > threshold {
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;

                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = Matrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    SymmetricEigen { values, vectors, sweeps }
}

/// Numerical rank from a column-pivoted QR: the number of `|R_kk|` above
/// `rel_tol * N * max|a_ij|`.
pub fn numerical_rank(a: &Matrix, rel_tol: f64) -> usize {
    let n = a.nrows().max(a.ncols());
    let amax = a.amax();
    if amax == 0.0 {
        return 0;
    }
    let threshold = rel_tol * n as f64 * amax;
    let r = a.clone().col_piv_qr().r();
    (0..r.nrows().min(r.ncols())).filter(|&k| r[(k, k)].abs() > threshold).count()
}

/// Divides `m` by its largest absolute entry and returns `ln` of the factor.
/// A zero matrix is left untouched and reports `-inf`.
pub(crate) fn rescale(m: &mut Matrix) -> f64 {
    let s = m.amax();
    if s == 0.0 || !s.is_finite() {
        return f64::NEG_INFINITY;
    }
    *m /= s;
    s.ln()
}

/// `ln(x)` with `ln(0) = -inf`, kept explicit for readability at call sites.
pub(crate) fn ln0(x: f64) -> f64 {
    if x > 0.0 {
        x.ln()
    } else {
        f64::NEG_INFINITY
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn jacobi_diagonal_and_2x2() {
        let a = Matrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let e = symmetric_eigen(&a, 1e-14);
        assert_abs_diff_eq!(e.values[0], 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.values[1], 1.0, epsilon = 1e-14);
        let v0 = e.vectors.column(0);
        assert_abs_diff_eq!(v0[0].abs(), 0.5f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn jacobi_reconstructs_matrix() {
        let a = Matrix::from_row_slice(
            4,
            4,
            &[4.0, 1.0, -2.0, 2.0, 1.0, 2.0, 0.0, 1.0, -2.0, 0.0, 3.0, -2.0, 2.0, 1.0, -2.0, -1.0],
        );
        let e = symmetric_eigen(&a, 1e-15);
        let d = Matrix::from_diagonal(&nalgebra::DVector::from_vec(e.values.clone()));
        let back = &e.vectors * d * e.vectors.transpose();
        assert!((back - &a).amax() < 1e-12);
        let reference = a.clone().symmetric_eigen();
        let mut expected: Vec<f64> = reference.eigenvalues.iter().copied().collect();
        expected.sort_by(|x, y| y.total_cmp(x));
        for (x, y) in e.values.iter().zip(&expected) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn rank_of_singular_matrix() {
        let a = Matrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0, 1.0, 0.0, 1.0]);
        assert_eq!(numerical_rank(&a, 1e-10), 2);
        assert_eq!(numerical_rank(&Matrix::zeros(3, 3), 1e-10), 0);
        assert_eq!(numerical_rank(&Matrix::identity(3, 3), 1e-10), 3);
    }

    #[test]
    fn rescale_tracks_log_factor() {
        let mut m = Matrix::from_row_slice(1, 2, &[0.5, -4.0]);
        let l = rescale(&mut m);
        assert_abs_diff_eq!(l, 4f64.ln(), epsilon = 1e-15);
        assert_eq!(m[(0, 1)], -1.0);
        let mut z = Matrix::zeros(2, 2);
        assert_eq!(rescale(&mut z), f64::NEG_INFINITY);
    }
}

//! Reduced QR decomposition via Householder reflections.

use super::Matrix;
use crate::error::{Error, Result};

/// Reduced QR factorization `b = q * r` with `q` m x r orthonormal and `r`
/// r x r upper triangular with nonnegative diagonal.
///
/// The nonnegative-diagonal convention makes the factorization unique for
/// full-rank input, so repeated decompositions are bitwise identical and
/// golden tests stay stable.
#[derive(Debug, Clone)]
pub struct ReducedQr {
    pub q: Matrix,
    pub r: Matrix,
}

/// Householder QR of an m x r matrix with m >= r.
///
/// Rank-deficient columns produce exact zeros on the diagonal of `r`; no
/// pivoting is performed. Adapter B matrices start at zero during training,
/// so degenerate input is an expected case, not an error.
pub fn reduced_qr(b: &Matrix) -> Result<ReducedQr> {
    let m = b.rows();
    let r = b.cols();
    if m < r {
        return Err(Error::QrShape { rows: m, cols: r });
    }

    // work holds the matrix being triangularized; reflectors stores the
    // Householder vectors (each of length m - k) together with beta = 2/v'v.
    let mut work = b.clone();
    let mut reflectors: Vec<Option<(Vec<f64>, f64)>> = Vec::with_capacity(r);

    for k in 0..r {
        let mut v: Vec<f64> = (k..m).map(|i| work.get(i, k)).collect();
        let alpha = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if alpha == 0.0 {
            // Zero column below the diagonal: nothing to reflect.
            reflectors.push(None);
            continue;
        }
        let sign = if v[0] >= 0.0 { 1.0 } else { -1.0 };
        v[0] += sign * alpha;
        let vtv: f64 = v.iter().map(|x| x * x).sum();
        let beta = 2.0 / vtv;

        // Apply H = I - beta v v' to the trailing block of work.
        for j in k..r {
            let mut proj = 0.0;
            for (offset, vi) in v.iter().enumerate() {
                proj += vi * work.get(k + offset, j);
            }
            proj *= beta;
            for (offset, vi) in v.iter().enumerate() {
                let cur = work.get(k + offset, j);
                work.set(k + offset, j, cur - proj * vi);
            }
        }
        // The pivot is known analytically; store it exactly.
        work.set(k, k, -sign * alpha);
        for i in k + 1..m {
            work.set(i, k, 0.0);
        }
        reflectors.push(Some((v, beta)));
    }

    // R is the top r x r block of work (below-diagonal entries already zero).
    let mut r_mat = Matrix::zeros(r, r);
    for i in 0..r {
        for j in i..r {
            r_mat.set(i, j, work.get(i, j));
        }
    }

    // Q = H_0 H_1 ... H_{r-1} [I_r; 0], applied back to front.
    let mut q = Matrix::zeros(m, r);
    for j in 0..r {
        q.set(j, j, 1.0);
    }
    for k in (0..r).rev() {
        let Some((v, beta)) = &reflectors[k] else {
            continue;
        };
        for j in 0..r {
            let mut proj = 0.0;
            for (offset, vi) in v.iter().enumerate() {
                proj += vi * q.get(k + offset, j);
            }
            proj *= beta;
            for (offset, vi) in v.iter().enumerate() {
                let cur = q.get(k + offset, j);
                q.set(k + offset, j, cur - proj * vi);
            }
        }
    }

    // Sign convention: flip rows/columns so diag(R) >= 0.
    for k in 0..r {
        if r_mat.get(k, k) < 0.0 {
            for j in k..r {
                r_mat.set(k, j, -r_mat.get(k, j));
            }
            for i in 0..m {
                q.set(i, k, -q.get(i, k));
            }
        }
    }

    Ok(ReducedQr { q, r: r_mat })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Vector;

    fn reconstruction_error(qr: &ReducedQr, b: &Matrix) -> f64 {
        let recon = qr.q.matmul(&qr.r).unwrap();
        let mut diff = 0.0;
        for i in 0..b.rows() {
            for j in 0..b.cols() {
                let d = recon.get(i, j) - b.get(i, j);
                diff += d * d;
            }
        }
        diff.sqrt()
    }

    #[test]
    fn identity_factors_as_identity() {
        let b = Matrix::identity(3);
        let qr = reduced_qr(&b).unwrap();
        assert!(qr.q.max_abs_diff(&Matrix::identity(3)) < 1e-15);
        assert!(qr.r.max_abs_diff(&Matrix::identity(3)) < 1e-15);
    }

    #[test]
    fn single_column_normalizes() {
        let b = Matrix::new(2, 1, vec![3.0, 4.0]).unwrap();
        let qr = reduced_qr(&b).unwrap();
        assert!((qr.q.get(0, 0) - 0.6).abs() < 1e-15);
        assert!((qr.q.get(1, 0) - 0.8).abs() < 1e-15);
        assert!((qr.r.get(0, 0) - 5.0).abs() < 1e-15);
    }

    #[test]
    fn random_reconstruction() {
        // Fixed pseudo-random 8x4 input; oracle is direct multiplication q*r.
        let mut vals = Vec::with_capacity(32);
        let mut state = 0x9e3779b97f4a7c15u64;
        for _ in 0..32 {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            vals.push(((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0);
        }
        let b = Matrix::new(8, 4, vals).unwrap();
        let qr = reduced_qr(&b).unwrap();
        assert!(reconstruction_error(&qr, &b) < 1e-12);

        // Orthonormal columns.
        let qtq = qr.q.transpose().matmul(&qr.q).unwrap();
        assert!(qtq.max_abs_diff(&Matrix::identity(4)) < 1e-12);

        // Nonnegative diagonal, exact zeros below.
        for i in 0..4 {
            assert!(qr.r.get(i, i) >= 0.0);
            for j in 0..i {
                assert_eq!(qr.r.get(i, j), 0.0);
            }
        }
    }

    #[test]
    fn rank_deficient_column_gives_zero_diagonal() {
        let b = Matrix::new(3, 2, vec![1.0, 0.0, 2.0, 0.0, 2.0, 0.0]).unwrap();
        let qr = reduced_qr(&b).unwrap();
        assert_eq!(qr.r.get(1, 1), 0.0);
        assert!(reconstruction_error(&qr, &b) < 1e-12);
    }

    #[test]
    fn wide_matrix_rejected() {
        let b = Matrix::new(2, 3, vec![0.0; 6]).unwrap();
        assert!(matches!(reduced_qr(&b), Err(Error::QrShape { .. })));
    }

    #[test]
    fn deterministic_bitwise() {
        let b = Matrix::new(4, 3, (0..12).map(|i| (i as f64).sin()).collect()).unwrap();
        let first = reduced_qr(&b).unwrap();
        let second = reduced_qr(&b).unwrap();
        assert_eq!(first.q.as_slice(), second.q.as_slice());
        assert_eq!(first.r.as_slice(), second.r.as_slice());
    }

    #[test]
    fn norm_preserved_under_q() {
        let b = Matrix::new(5, 2, (0..10).map(|i| (i as f64 * 0.7).cos()).collect()).unwrap();
        let qr = reduced_qr(&b).unwrap();
        let x = Vector::new(vec![0.3, -1.2]).unwrap();
        let qx = crate::linalg::matvec(&qr.q, &x).unwrap();
        let nx = crate::linalg::norm2(&x);
        assert!((crate::linalg::norm2(&qx) - nx).abs() <= 1e-10 * nx);
    }
}

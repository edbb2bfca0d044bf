//! Minimal dense linear algebra for routing-sized matrices.
//!
//! Everything here is double precision, row-major, and sequential: the
//! matrices involved in adapter routing are small (rank x rank up to
//! hidden x rank), and deterministic bitwise-reproducible arithmetic
//! matters more than raw throughput. Summations run in a fixed order so
//! repeated calls on identical inputs give identical bits.

mod qr;
mod svd;

pub use qr::{reduced_qr, ReducedQr};
pub use svd::{thin_svd, thin_svd_rank, ThinSvd};

use crate::error::{Error, Result};

/// Absolute singular-value threshold for numerical rank reporting.
pub const RANK_TOLERANCE: f64 = 1e-8;

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from row-major data, rejecting shape/finiteness violations.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Empty("matrix"));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                context: "matrix data",
                expected: format!("{} values", rows * cols),
                got: format!("{} values", data.len()),
            });
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("matrix"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Convenience constructor from nested rows (used heavily in tests).
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::DimensionMismatch {
                context: "matrix rows",
                expected: format!("{c} columns"),
                got: "ragged rows".to_string(),
            });
        }
        Self::new(r, c, rows.concat())
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.cols + col] = value;
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    /// `self * other`, fixed accumulation order.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                context: "matmul",
                expected: format!("{} inner rows", self.cols),
                got: format!("{}", other.rows),
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                let lhs = i * out.cols;
                let rhs = k * other.cols;
                for j in 0..other.cols {
                    out.data[lhs + j] += a * other.data[rhs + j];
                }
            }
        }
        Ok(out)
    }

    pub fn scale(&self, factor: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Max absolute entrywise difference to another matrix of the same shape.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Dense vector of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector {
    data: Vec<f64>,
}

impl Vector {
    pub fn new(data: Vec<f64>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Empty("vector"));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("vector"));
        }
        Ok(Self { data })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            data: vec![0.0; dim],
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        self.data[i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: f64) {
        self.data[i] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn dot(&self, other: &Vector) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                context: "dot",
                expected: format!("{}", self.dim()),
                got: format!("{}", other.dim()),
            });
        }
        Ok(dot(&self.data, &other.data))
    }

    pub fn scale(&self, factor: f64) -> Vector {
        Vector {
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn add(&self, other: &Vector) -> Result<Vector> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                context: "vector add",
                expected: format!("{}", self.dim()),
                got: format!("{}", other.dim()),
            });
        }
        Ok(Vector {
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

/// Matrix-vector product `a * x`.
pub fn matvec(a: &Matrix, x: &Vector) -> Result<Vector> {
    if a.cols() != x.dim() {
        return Err(Error::DimensionMismatch {
            context: "matvec",
            expected: format!("vector of dim {}", a.cols()),
            got: format!("dim {}", x.dim()),
        });
    }
    let mut out = Vec::with_capacity(a.rows());
    for i in 0..a.rows() {
        out.push(dot(a.row(i), x.as_slice()));
    }
    Ok(Vector { data: out })
}

/// Euclidean norm; zero exactly when `x` is the zero vector.
pub fn norm2(x: &Vector) -> f64 {
    x.as_slice().iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQRT2: f64 = std::f64::consts::SQRT_2;

    #[test]
    fn matvec_identity() {
        let a = Matrix::identity(2);
        let x = Vector::new(vec![3.0, 4.0]).unwrap();
        let y = matvec(&a, &x).unwrap();
        assert_eq!(y.as_slice(), &[3.0, 4.0]);
    }

    #[test]
    fn matvec_principal_direction() {
        // ||Cx||_2 with C = diag(2,1) and x along its top right singular vector.
        let c = Matrix::from_rows(&[&[2.0, 0.0], &[0.0, 1.0]]).unwrap();
        let x = Vector::new(vec![1.0, 0.0]).unwrap();
        let y = matvec(&c, &x).unwrap();
        assert_eq!(y.as_slice(), &[2.0, 0.0]);
    }

    #[test]
    fn matvec_rotated_construction() {
        let d = Matrix::from_rows(&[
            &[3.0 / SQRT2, 3.0 / SQRT2],
            &[1.0 / SQRT2, -1.0 / SQRT2],
        ])
        .unwrap();
        let x = Vector::new(vec![1.0, 0.0]).unwrap();
        let y = matvec(&d, &x).unwrap();
        assert!((y.get(0) - 3.0 / SQRT2).abs() < 1e-15);
        assert!((y.get(1) - 1.0 / SQRT2).abs() < 1e-15);
    }

    #[test]
    fn matvec_rejects_dim_mismatch() {
        let a = Matrix::identity(3);
        let x = Vector::new(vec![1.0, 2.0]).unwrap();
        assert!(matches!(
            matvec(&a, &x),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn norm2_cases() {
        assert_eq!(norm2(&Vector::zeros(3)), 0.0);
        assert_eq!(norm2(&Vector::new(vec![2.0, 0.0]).unwrap()), 2.0);
        let y = Vector::new(vec![3.0 / SQRT2, 1.0 / SQRT2]).unwrap();
        assert!((norm2(&y) - 5.0_f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn constructors_reject_non_finite() {
        assert!(matches!(
            Matrix::new(1, 2, vec![1.0, f64::NAN]),
            Err(Error::NonFinite(_))
        ));
        assert!(matches!(
            Vector::new(vec![f64::INFINITY]),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn constructors_reject_bad_shapes() {
        assert!(Matrix::new(2, 2, vec![1.0; 3]).is_err());
        assert!(Matrix::new(0, 2, vec![]).is_err());
        assert!(Vector::new(vec![]).is_err());
    }

    #[test]
    fn matmul_small() {
        let a = Matrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
        let b = Matrix::from_rows(&[&[5.0, 6.0], &[7.0, 8.0]]).unwrap();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.as_slice(), &[19.0, 22.0, 43.0, 50.0]);
    }

    #[test]
    fn transpose_roundtrip() {
        let a = Matrix::from_rows(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]]).unwrap();
        assert_eq!(a.transpose().transpose(), a);
    }
}

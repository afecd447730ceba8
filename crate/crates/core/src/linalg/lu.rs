//! LU factorization with partial pivoting.

use super::matrix::{DenseMatrix, Scalar};
use super::LinalgError;

/// Pivots smaller than this fraction of `‖A‖∞` are treated as zero.
pub const PIVOT_THRESHOLD: f64 = 1e-13;

/// Packed `PA = LU` factors.
#[derive(Clone, Debug)]
pub struct Lu<T: Scalar> {
    n: usize,
    lu: Vec<T>,
    perm: Vec<usize>,
    sign_flips: usize,
}

impl<T: Scalar> Lu<T> {
    /// Factors `a`, failing with [`LinalgError::Singular`] on a pivot below
    /// `PIVOT_THRESHOLD · ‖A‖∞`.
    pub fn factor(a: &DenseMatrix<T>) -> Result<Self, LinalgError> {
        let lu = Self::factor_unchecked(a)?;
        let threshold = PIVOT_THRESHOLD * a.norm_inf();
        for k in 0..lu.n {
            let p = lu.lu[k * lu.n + k].modulus();
            if !(p > threshold) {
                return Err(LinalgError::Singular { pivot: p, index: k });
            }
        }
        Ok(lu)
    }

    /// Factors without the singularity threshold; exact zero pivots are kept.
    pub fn factor_unchecked(a: &DenseMatrix<T>) -> Result<Self, LinalgError> {
        let n = a.ensure_square()?;
        if !a.is_finite() {
            return Err(LinalgError::NonFinite);
        }
        let mut lu = a.as_slice().to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign_flips = 0;
        for k in 0..n {
            let mut piv = k;
            let mut best = lu[k * n + k].modulus();
            for i in (k + 1)..n {
                let v = lu[i * n + k].modulus();
                if v > best {
                    best = v;
                    piv = i;
                }
            }
            if piv != k {
                for j in 0..n {
                    lu.swap(k * n + j, piv * n + j);
                }
                perm.swap(k, piv);
                sign_flips += 1;
            }
            let pivot = lu[k * n + k];
            if pivot == T::zero() {
                continue;
            }
            for i in (k + 1)..n {
                let factor = lu[i * n + k] / pivot;
                lu[i * n + k] = factor;
                if factor == T::zero() {
                    continue;
                }
                for j in (k + 1)..n {
                    let u = lu[k * n + j];
                    lu[i * n + j] -= factor * u;
                }
            }
        }
        Ok(Self {
            n,
            lu,
            perm,
            sign_flips,
        })
    }

    pub fn determinant(&self) -> T {
        let mut det = if self.sign_flips.is_multiple_of(2) {
            T::one()
        } else {
            -T::one()
        };
        for k in 0..self.n {
            det *= self.lu[k * self.n + k];
        }
        det
    }

    /// Solves `A x = b` for one right-hand side.
    pub fn solve_vec(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut acc = x[i];
            for j in 0..i {
                acc -= self.lu[i * n + j] * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in (i + 1)..n {
                acc -= self.lu[i * n + j] * x[j];
            }
            x[i] = acc / self.lu[i * n + i];
        }
        x
    }

    pub fn solve(&self, b: &DenseMatrix<T>) -> Result<DenseMatrix<T>, LinalgError> {
        if b.rows() != self.n {
            return Err(LinalgError::DimensionMismatch {
                expected: (self.n, b.cols()),
                got: (b.rows(), b.cols()),
            });
        }
        let bt = b.transpose();
        let mut out = DenseMatrix::zeros(self.n, b.cols());
        for j in 0..b.cols() {
            let x = self.solve_vec(bt.row(j));
            for i in 0..self.n {
                out[(i, j)] = x[i];
            }
        }
        Ok(out)
    }
}

/// Solves `A X = B` by LU with partial pivoting.
pub fn solve_linear<T: Scalar>(
    a: &DenseMatrix<T>,
    b: &DenseMatrix<T>,
) -> Result<DenseMatrix<T>, LinalgError> {
    Lu::factor(a)?.solve(b)
}

/// Determinant via LU (no singularity threshold).
pub fn determinant<T: Scalar>(a: &DenseMatrix<T>) -> Result<T, LinalgError> {
    Ok(Lu::factor_unchecked(a)?.determinant())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;

    #[test]
    fn identity_solve_returns_rhs() {
        let b = Matrix::from_rows(&[[1.0, -2.0, 3.5], [0.25, 7.0, -1.0]]).unwrap();
        let x = solve_linear(&Matrix::identity(2), &b).unwrap();
        assert_eq!(x, b);
    }

    #[test]
    fn diagonal_inverse() {
        let a = Matrix::diag(&[2.0, 4.0]);
        let x = solve_linear(&a, &Matrix::identity(2)).unwrap();
        assert_eq!(x, Matrix::diag(&[0.5, 0.25]));
    }

    #[test]
    fn rank_deficient_is_singular() {
        let a = Matrix::from_rows(&[[-1.0, 1.0], [1.0, -1.0]]).unwrap();
        let err = solve_linear(&a, &Matrix::identity(2)).unwrap_err();
        match err {
            LinalgError::Singular { pivot, index } => {
                assert_eq!(index, 1);
                assert!(pivot <= 1e-13 * 2.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn residual_small_on_dense_system() {
        let a = Matrix::from_rows(&[[4.0, -2.0, 1.0], [3.0, 6.0, -4.0], [2.0, 1.0, 8.0]]).unwrap();
        let b = Matrix::from_rows(&[[1.0], [2.0], [3.0]]).unwrap();
        let x = solve_linear(&a, &b).unwrap();
        let r = &(&a * &x) - &b;
        assert!(r.max_abs() <= 1e-10 * b.max_abs());
    }

    #[test]
    fn determinant_with_pivoting() {
        let a = Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
        assert_eq!(determinant(&a).unwrap(), -1.0);
    }
}

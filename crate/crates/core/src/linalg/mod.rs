//! Dense linear algebra kernels: eigenvalues, matrix exponential, linear solves.

mod eigen;
mod expm;
mod lu;
mod matrix;

pub use eigen::{spectral_abscissa, spectral_radius, spectrum, Spectrum, SWEEPS_PER_DIM};
pub use expm::expm;
pub use lu::{determinant, solve_linear, Lu, PIVOT_THRESHOLD};
pub use matrix::{CMatrix, DenseMatrix, Matrix, Scalar};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LinalgError {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: expected {expected:?}, got {got:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("data length mismatch: expected {expected}, got {got}")]
    DataLength { expected: usize, got: usize },
    #[error("matrix is singular to working precision (pivot {pivot:e} at step {index})")]
    Singular { pivot: f64, index: usize },
    #[error("QR iteration failed to converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("matrix exponential overflow (scaled norm {norm:e})")]
    Overflow { norm: f64 },
    #[error("non-finite matrix entry")]
    NonFinite,
}

/// `abs*` transform of a real matrix.
pub fn abs_star(a: &Matrix) -> Result<Matrix, LinalgError> {
    a.abs_star()
}

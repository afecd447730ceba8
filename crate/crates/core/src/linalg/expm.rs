//! Matrix exponential by scaling and squaring with a degree-13 Padé approximant.

use super::lu::Lu;
use super::{LinalgError, Matrix};

/// Padé(13,13) coefficients b₀…b₁₃.
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// 1-norm bound under which Padé(13) is accurate to unit roundoff.
const THETA13: f64 = 5.371920351148152;

/// Squarings beyond this count are treated as overflow.
const MAX_SQUARINGS: i32 = 1024;

/// Returns `exp(scale · A)`.
pub fn expm(a: &Matrix, scale: f64) -> Result<Matrix, LinalgError> {
    let n = a.ensure_square()?;
    if !scale.is_finite() || !a.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    let a = a.scale(scale);
    if n == 0 {
        return Ok(a);
    }
    let norm = a.norm_one();
    if norm == 0.0 {
        return Ok(Matrix::identity(n));
    }
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    if s > MAX_SQUARINGS {
        return Err(LinalgError::Overflow { norm });
    }
    let a = a.scale(2f64.powi(-s));
    let mut r = pade13(&a)?;
    for _ in 0..s {
        r = &r * &r;
        if !r.is_finite() {
            return Err(LinalgError::Overflow { norm });
        }
    }
    Ok(r)
}

fn pade13(a: &Matrix) -> Result<Matrix, LinalgError> {
    let n = a.rows();
    let b = &PADE13;
    let id = Matrix::identity(n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;
    let lincomb = |c6: f64, c4: f64, c2: f64, c0: f64| -> Matrix {
        Matrix::from_fn(n, n, |i, j| {
            c6 * a6[(i, j)] + c4 * a4[(i, j)] + c2 * a2[(i, j)] + c0 * id[(i, j)]
        })
    };
    let u_inner = &a6 * &lincomb(b[13], b[11], b[9], 0.0);
    let u_inner = &u_inner + &lincomb(b[7], b[5], b[3], b[1]);
    let u = a * &u_inner;
    let v_inner = &a6 * &lincomb(b[12], b[10], b[8], 0.0);
    let v = &v_inner + &lincomb(b[6], b[4], b[2], b[0]);
    let p = &v + &u;
    let q = &v - &u;
    let lu = Lu::factor(&q)?;
    let r = lu.solve(&p)?;
    if !r.is_finite() {
        return Err(LinalgError::Overflow { norm: a.norm_one() });
    }
    Ok(r)
}

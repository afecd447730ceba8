//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use delaygauge::linalg::Matrix;
use rand::Rng;

/// Perron root of a nonnegative matrix by power iteration on `(B + I)`,
/// which is primitive whenever `B` is irreducible.
pub fn perron_root(b: &Matrix) -> f64 {
    let n = b.rows();
    let shifted = b.shift_diagonal(1.0);
    let mut v = vec![1.0 / n as f64; n];
    let mut lambda = 0.0;
    for _ in 0..200_000 {
        let w = shifted.mul_vec(&v);
        let norm: f64 = w.iter().sum();
        let next: Vec<f64> = w.iter().map(|x| x / norm).collect();
        let change: f64 = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).sum();
        v = next;
        lambda = norm;
        if change < 1e-15 {
            break;
        }
    }
    lambda - 1.0
}

/// Exact solution of `x' = −x(t − 1)` with `x ≡ 1` on `[−1, 0]`: on
/// `[k, k+1]` it is a polynomial `p_k(t − k)` with `p_0(s) = 1 − s` and
/// `p_k(s) = p_{k−1}(1) − ∫₀ˢ p_{k−1}`.
pub struct NegativeFeedbackOracle {
    pieces: Vec<Vec<f64>>,
}

fn poly_eval(c: &[f64], s: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * s + a)
}

impl NegativeFeedbackOracle {
    pub fn new(intervals: usize) -> Self {
        let mut pieces = vec![vec![1.0, -1.0]];
        for _ in 1..intervals {
            let prev = pieces.last().unwrap();
            let start = poly_eval(prev, 1.0);
            let mut next = vec![start];
            next.extend(prev.iter().enumerate().map(|(j, &a)| -a / (j + 1) as f64));
            pieces.push(next);
        }
        Self { pieces }
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        let k = (t.floor() as usize).min(self.pieces.len() - 1);
        poly_eval(&self.pieces[k], t - k as f64)
    }
}

/// Entrywise uniform on `[0, scale)` with roughly `zero_frac` entries zeroed,
/// plus a cyclic permutation to keep it irreducible.
pub fn random_irreducible(n: usize, scale: f64, zero_frac: f64, rng: &mut impl Rng) -> Matrix {
    let mut m = Matrix::from_fn(n, n, |_, _| {
        if rng.gen::<f64>() < zero_frac {
            0.0
        } else {
            scale * rng.gen::<f64>()
        }
    });
    for i in 0..n {
        let j = (i + 1) % n;
        if m[(i, j)] == 0.0 {
            m[(i, j)] = scale * (0.1 + rng.gen::<f64>());
        }
    }
    m
}

pub fn random_nonnegative(n: usize, scale: f64, rng: &mut impl Rng) -> Matrix {
    Matrix::from_fn(n, n, |_, _| scale * rng.gen::<f64>())
}

/// Metzler matrix with a diagonal in `[−diag, 0)`.
pub fn random_metzler(n: usize, diag: f64, off: f64, rng: &mut impl Rng) -> Matrix {
    Matrix::from_fn(n, n, |i, j| {
        if i == j {
            -diag * rng.gen::<f64>()
        } else {
            off * rng.gen::<f64>()
        }
    })
}

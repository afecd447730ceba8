//! Concrete systems with analytic bound matrices.
//!
//! | name          | right-hand side                                         |
//! |---------------|---------------------------------------------------------|
//! | `nis-example` | `Ax + sin(By)`, `A = −I`, `B = [[−5/4, 1/4], [1/4, −5/4]]` |
//! | `is-example`  | `Ax + sin(By)`, `A = [[−4, 0], [−1, −1]]`, `B = [[−1, 1], [1, 0]]` |
//! | `reservoir1`  | `−g(x + tanh(ρA y + σW u(t)))`                          |
//! | `reservoir2`  | sin² delayed reservoir, in eigen-coordinates `z = S⁻¹x`  |

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{spectral_radius, Lu, Matrix};
use crate::stability::BoundMatrices;

use super::{FnRhs, Rhs, SystemSpec};

/// Scalar input `J(t)`.
pub type ScalarInput = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
/// Vector input `u(t)` written into a buffer.
pub type VectorInput = Arc<dyn Fn(f64, &mut [f64]) + Send + Sync>;

/// Per-variable intervals for `(x, y₁, …, y_r)`, flattened in that order.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleBox {
    pub intervals: Vec<(f64, f64)>,
}

impl SampleBox {
    pub fn cube(half_width: f64, dims: usize) -> Self {
        Self {
            intervals: vec![(-half_width, half_width); dims],
        }
    }
}

/// Named numeric and matrix parameters for [`catalog`].
#[derive(Clone, Debug, Default)]
pub struct CatalogParams {
    values: BTreeMap<String, f64>,
    matrices: BTreeMap<String, Matrix>,
}

impl CatalogParams {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(mut self, key: &str, value: f64) -> Self {
        self.values.insert(key.to_string(), value);
        self
    }

    pub fn set_matrix(mut self, key: &str, value: Matrix) -> Self {
        self.matrices.insert(key.to_string(), value);
        self
    }

    fn get(&self, key: &str, default: f64) -> f64 {
        self.values.get(key).copied().unwrap_or(default)
    }

    fn matrix(&self, key: &str) -> Option<&Matrix> {
        self.matrices.get(key)
    }

    fn reject_unknown(&self, known: &[&str]) -> Result<()> {
        for k in self.values.keys().chain(self.matrices.keys()) {
            if !known.contains(&k.as_str()) {
                return Err(Error::param(
                    k,
                    format!("not a parameter of this system (expected one of {known:?})"),
                ));
            }
        }
        Ok(())
    }
}

pub const CATALOG_NAMES: [&str; 4] = ["nis-example", "is-example", "reservoir1", "reservoir2"];

/// Looks up a catalog system by name.
pub fn catalog(name: &str, params: &CatalogParams) -> Result<SystemSpec> {
    match name {
        "nis-example" | "is-example" => {
            params.reject_unknown(&["T"])?;
            let t = params.get("T", 3.0);
            if name == "nis-example" {
                nis_example(t)
            } else {
                is_example(t)
            }
        }
        "reservoir1" => {
            params.reject_unknown(&["g", "rho", "sigma", "T", "A", "W"])?;
            let a = params.matrix("A").cloned().unwrap_or_else(swap_matrix);
            let n = a.rows();
            let w = params
                .matrix("W")
                .cloned()
                .unwrap_or_else(|| Matrix::identity(n));
            reservoir1(
                params.get("g", 1.0),
                params.get("rho", 0.9),
                &a,
                &w,
                params.get("sigma", 1.0),
                None,
                params.get("T", 1.0),
            )
        }
        "reservoir2" => {
            params.reject_unknown(&["beta", "delta", "phase", "gain", "M", "T"])?;
            let m = params.get("M", 3.0);
            if !(m >= 1.0 && m.fract() == 0.0) {
                return Err(Error::param(
                    "M",
                    format!("delay count must be a positive integer, got {m}"),
                ));
            }
            reservoir2_eigen(
                params.get("beta", 1.0 / 3.0),
                params.get("delta", 1.0 / 8.0),
                params.get("phase", 1.0),
                params.get("gain", 7.0),
                m as usize,
                None,
                params.get("T", 1.0),
            )
        }
        other => Err(Error::UnknownSystem(other.to_string())),
    }
}

fn swap_matrix() -> Matrix {
    Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).expect("2x2")
}

/// Induced 1-norm Lipschitz constant from derivative bounds.
fn lipschitz_from(dx_abs: &Matrix, dy_abs: &[Matrix]) -> f64 {
    dy_abs
        .iter()
        .map(Matrix::norm_one)
        .fold(dx_abs.norm_one(), f64::max)
}

/// `f(t, x, y) = Ax + sin(By)` with `M₀ = abs*(A)`, `M₁ = |B|`.
pub fn sin_delay_system(
    name: &str,
    a: &Matrix,
    b: &Matrix,
    delay_bound: f64,
) -> Result<SystemSpec> {
    let d = a.ensure_square().map_err(Error::from)?;
    if b.rows() != d || b.cols() != d {
        return Err(Error::Dimension {
            what: "B",
            expected: d,
            got: b.rows(),
        });
    }
    let (a2, b2) = (a.clone(), b.clone());
    let rhs = FnRhs::new(d, 1, move |_t, x, y, out| {
        a2.mul_vec_into(x, out);
        for (i, o) in out.iter_mut().enumerate() {
            let by: f64 = b2.row(i).iter().zip(y).map(|(p, q)| p * q).sum();
            *o += by.sin();
        }
    });
    let bounds = BoundMatrices::new(a.abs_star()?, vec![b.abs()])?;
    Ok(SystemSpec::new(name, Arc::new(rhs), delay_bound)?
        .with_bounds(bounds)?
        .with_lipschitz(lipschitz_from(&a.abs(), &[b.abs()]))
        .with_sample_box(SampleBox::cube(2.0, 2 * d)))
}

/// Linear DDE `x' = Ax + Σ Bᵢ yᵢ`; the bounds `abs*(A)`, `|Bᵢ|` are exact.
pub fn linear_system(name: &str, a: &Matrix, b: &[Matrix], delay_bound: f64) -> Result<SystemSpec> {
    let d = a.ensure_square().map_err(Error::from)?;
    if let Some(bad) = b.iter().find(|m| m.rows() != d || m.cols() != d) {
        return Err(Error::Dimension {
            what: "B_i",
            expected: d,
            got: bad.rows().max(bad.cols()),
        });
    }
    let r = b.len();
    let (a2, b2) = (a.clone(), b.to_vec());
    let rhs = FnRhs::new(d, r, move |_t, x, y, out| {
        a2.mul_vec_into(x, out);
        for (i, bi) in b2.iter().enumerate() {
            let yi = &y[i * d..(i + 1) * d];
            for (k, o) in out.iter_mut().enumerate() {
                *o += bi.row(k).iter().zip(yi).map(|(p, q)| p * q).sum::<f64>();
            }
        }
    });
    let abs_b: Vec<Matrix> = b.iter().map(Matrix::abs).collect();
    let bounds = BoundMatrices::new(a.abs_star()?, abs_b.clone())?;
    Ok(SystemSpec::new(name, Arc::new(rhs), delay_bound)?
        .with_bounds(bounds)?
        .with_lipschitz(lipschitz_from(&a.abs(), &abs_b))
        .with_sample_box(SampleBox::cube(2.0, (r + 1) * d)))
}

pub fn nis_example(delay_bound: f64) -> Result<SystemSpec> {
    let a = Matrix::from_rows(&[[-1.0, 0.0], [0.0, -1.0]])?;
    let b = Matrix::from_rows(&[[-1.25, 0.25], [0.25, -1.25]])?;
    sin_delay_system("nis-example", &a, &b, delay_bound)
}

pub fn is_example(delay_bound: f64) -> Result<SystemSpec> {
    let a = Matrix::from_rows(&[[-4.0, 0.0], [-1.0, -1.0]])?;
    let b = Matrix::from_rows(&[[-1.0, 1.0], [1.0, 0.0]])?;
    sin_delay_system("is-example", &a, &b, delay_bound)
}

/// Checks the reservoir-1 structural assumptions: `A ≥ 0` with `ρ(A) = 1`,
/// and `W` injective.
pub fn check_reservoir1_matrices(a: &Matrix, w: &Matrix) -> Result<()> {
    let n = a.ensure_square()?;
    if !a.is_nonnegative() {
        return Err(Error::param(
            "A",
            "reservoir matrix must be entrywise nonnegative",
        ));
    }
    let radius = spectral_radius(a)?;
    if (radius - 1.0).abs() > 1e-8 {
        return Err(Error::Rescaling { radius });
    }
    if w.rows() != n {
        return Err(Error::Dimension {
            what: "W rows",
            expected: n,
            got: w.rows(),
        });
    }
    if w.cols() > w.rows() || Lu::factor(&(&w.transpose() * w)).is_err() {
        return Err(Error::RankDeficient);
    }
    Ok(())
}

/// `x' = −g(x + tanh(ρA x(t−h) + σW u(t)))`.
pub fn reservoir1(
    g: f64,
    rho: f64,
    a: &Matrix,
    w: &Matrix,
    sigma: f64,
    input: Option<VectorInput>,
    delay_bound: f64,
) -> Result<SystemSpec> {
    for (name, v) in [("g", g), ("rho", rho), ("sigma", sigma)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::param(name, format!("must be positive, got {v}")));
        }
    }
    check_reservoir1_matrices(a, w)?;
    let n = a.rows();
    let m = w.cols();
    let (a2, w2) = (a.scale(rho), w.scale(sigma));
    let rhs = FnRhs::new(n, 1, move |t, x, y, out| {
        let mut u = vec![0.0; m];
        if let Some(f) = &input {
            f(t, &mut u);
        }
        for i in 0..n {
            let arg: f64 = a2.row(i).iter().zip(y).map(|(p, q)| p * q).sum::<f64>()
                + w2.row(i).iter().zip(&u).map(|(p, q)| p * q).sum::<f64>();
            out[i] = -g * (x[i] + arg.tanh());
        }
    });
    let m0 = Matrix::identity(n).scale(-g);
    let m1 = a.abs().scale(g * rho);
    let lip = lipschitz_from(&m0.abs(), std::slice::from_ref(&m1));
    let bounds = BoundMatrices::new(m0, vec![m1])?;
    Ok(SystemSpec::new("reservoir1", Arc::new(rhs), delay_bound)?
        .with_bounds(bounds)?
        .with_lipschitz(lip)
        .with_sample_box(SampleBox::cube(2.0, 2 * n)))
}

/// `Δ = √(1 − 4δ)`, requiring `δ < 1/4`.
pub fn reservoir2_delta(delta: f64) -> Result<f64> {
    if !(delta < 0.25) {
        return Err(Error::ComplexDelta { delta });
    }
    Ok((1.0 - 4.0 * delta).sqrt())
}

/// Change of basis `x = S z` diagonalizing the reservoir-2 linear part, with
/// `z₁` the fast mode `(−1−Δ)/2` and `z₂` the slow mode `(−1+Δ)/2`.
pub fn reservoir2_basis(delta: f64) -> Result<Matrix> {
    let dd = reservoir2_delta(delta)?;
    Ok(Matrix::from_rows(&[
        [(-1.0 - dd) / 2.0, (-1.0 + dd) / 2.0],
        [1.0, 1.0],
    ])?)
}

/// Analytic bound matrices of reservoir 2 in eigen-coordinates.
pub fn reservoir2_bounds(beta: f64, delta: f64, delays: usize) -> Result<BoundMatrices> {
    let dd = reservoir2_delta(delta)?;
    if !(delta > 0.0) {
        return Err(Error::param(
            "delta",
            format!("must be positive, got {delta}"),
        ));
    }
    if !(beta >= 0.0) || delays == 0 {
        return Err(Error::param("beta", "beta must be nonnegative and M ≥ 1"));
    }
    let m0 = Matrix::diag(&[(-1.0 - dd) / 2.0, (-1.0 + dd) / 2.0]);
    let c = beta / (2.0 * delays as f64 * dd);
    let mi = Matrix::from_rows(&[
        [c * (1.0 + dd), c * (1.0 - dd)],
        [c * (1.0 + dd), c * (1.0 - dd)],
    ])?;
    BoundMatrices::new(m0, vec![mi; delays])
}

/// Reservoir-2 right-hand side in the original coordinates `(x₁, x₂)`.
pub fn reservoir2_rhs(
    beta: f64,
    delta: f64,
    phase: f64,
    gain: f64,
    delays: usize,
    input: Option<ScalarInput>,
) -> FnRhs {
    let scale = beta / delays as f64;
    FnRhs::new(2, delays, move |t, x, y, out| {
        let j = input.as_ref().map_or(0.0, |f| f(t));
        let drive: f64 = (0..delays)
            .map(|i| (y[2 * i] + phase + gain * j).sin().powi(2))
            .sum();
        out[0] = -x[0] - delta * x[1] + scale * drive;
        out[1] = x[0];
    })
}

/// Reservoir 2 expressed in eigen-coordinates `z = S⁻¹x`, where the
/// analytic bound matrices apply.
pub fn reservoir2_eigen(
    beta: f64,
    delta: f64,
    phase: f64,
    gain: f64,
    delays: usize,
    input: Option<ScalarInput>,
    delay_bound: f64,
) -> Result<SystemSpec> {
    let bounds = reservoir2_bounds(beta, delta, delays)?;
    let s = reservoir2_basis(delta)?;
    let s_inv = crate::linalg::solve_linear(&s, &Matrix::identity(2))?;
    let inner = reservoir2_rhs(beta, delta, phase, gain, delays, input);
    let rhs = FnRhs::new(2, delays, move |t, z, w, out| {
        let x = s.mul_vec(z);
        let y: Vec<f64> = w.chunks(2).flat_map(|wi| s.mul_vec(wi)).collect();
        let mut fx = [0.0; 2];
        inner.eval(t, &x, &y, &mut fx);
        s_inv.mul_vec_into(&fx, out);
    });
    let lip = lipschitz_from(&bounds.m0.abs(), &bounds.mi);
    Ok(SystemSpec::new("reservoir2", Arc::new(rhs), delay_bound)?
        .with_bounds(bounds)?
        .with_lipschitz(lip)
        .with_sample_box(SampleBox::cube(2.0, 2 + 2 * delays)))
}

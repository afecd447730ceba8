//! Initial-condition functions `φ : [−T, 0] → ℝᵈ`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Default number of sample points per window for sup-norm surrogates.
pub const DEFAULT_HISTORY_GRID: usize = 2049;

type HistoryFn = Arc<dyn Fn(f64, &mut [f64]) + Send + Sync>;

#[derive(Clone)]
enum Repr {
    Constant(Vec<f64>),
    /// Per-component coefficients `c₀ + c₁ s + c₂ s² + …`.
    Polynomial(Vec<Vec<f64>>),
    /// Per-component `offset + amplitude · sin(omega · s + phase)`.
    Sinusoid(Vec<[f64; 4]>),
    /// Cubic Hermite through `values` with one-sided slopes at each node.
    Sampled {
        times: Vec<f64>,
        values: Vec<f64>,
        slope_left: Vec<f64>,
        slope_right: Vec<f64>,
    },
    Custom(HistoryFn),
}

/// A continuous function on `[−span, 0]`.
#[derive(Clone)]
pub struct HistoryFunction {
    dim: usize,
    span: f64,
    repr: Repr,
}

impl fmt::Debug for HistoryFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.repr {
            Repr::Constant(_) => "constant",
            Repr::Polynomial(_) => "polynomial",
            Repr::Sinusoid(_) => "sinusoid",
            Repr::Sampled { .. } => "sampled",
            Repr::Custom(_) => "custom",
        };
        f.debug_struct("HistoryFunction")
            .field("dim", &self.dim)
            .field("span", &self.span)
            .field("kind", &kind)
            .finish()
    }
}

fn check_span(span: f64) -> Result<()> {
    if !(span >= 0.0 && span.is_finite()) {
        return Err(Error::param(
            "T",
            format!("history span must be finite and nonnegative, got {span}"),
        ));
    }
    Ok(())
}

impl HistoryFunction {
    pub fn constant(values: &[f64], span: f64) -> Result<Self> {
        check_span(span)?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("history values must be finite".into()));
        }
        Ok(Self {
            dim: values.len(),
            span,
            repr: Repr::Constant(values.to_vec()),
        })
    }

    pub fn zeros(dim: usize, span: f64) -> Result<Self> {
        Self::constant(&vec![0.0; dim], span)
    }

    pub fn polynomial(coeffs: Vec<Vec<f64>>, span: f64) -> Result<Self> {
        check_span(span)?;
        Ok(Self {
            dim: coeffs.len(),
            span,
            repr: Repr::Polynomial(coeffs),
        })
    }

    /// Components `offset + amplitude · sin(omega · s + phase)`, given as
    /// `[offset, amplitude, omega, phase]`.
    pub fn sinusoid(terms: Vec<[f64; 4]>, span: f64) -> Result<Self> {
        check_span(span)?;
        Ok(Self {
            dim: terms.len(),
            span,
            repr: Repr::Sinusoid(terms),
        })
    }

    /// Samples at increasing `times` (covering `[−span, 0]`), row-major `values`
    /// of shape `times.len() × dim`; slopes by finite differences.
    pub fn sampled(times: Vec<f64>, values: Vec<f64>, dim: usize) -> Result<Self> {
        let n = times.len();
        validate_grid(&times, &values, dim)?;
        let mut slopes = vec![0.0; n * dim];
        for i in 0..n {
            let (a, b) = if i == 0 {
                (0, 1.min(n - 1))
            } else if i == n - 1 {
                (n - 2, n - 1)
            } else {
                (i - 1, i + 1)
            };
            if a == b {
                continue;
            }
            let dt = times[b] - times[a];
            for c in 0..dim {
                slopes[i * dim + c] = (values[b * dim + c] - values[a * dim + c]) / dt;
            }
        }
        let span = -times[0];
        check_span(span)?;
        Ok(Self {
            dim,
            span,
            repr: Repr::Sampled {
                times,
                values,
                slope_left: slopes.clone(),
                slope_right: slopes,
            },
        })
    }

    /// Samples with known one-sided derivatives.
    pub fn hermite(
        times: Vec<f64>,
        values: Vec<f64>,
        slope_left: Vec<f64>,
        slope_right: Vec<f64>,
        dim: usize,
    ) -> Result<Self> {
        validate_grid(&times, &values, dim)?;
        if slope_left.len() != values.len() || slope_right.len() != values.len() {
            return Err(Error::Config(
                "hermite slopes must match the value array".into(),
            ));
        }
        let span = -times[0];
        check_span(span)?;
        Ok(Self {
            dim,
            span,
            repr: Repr::Sampled {
                times,
                values,
                slope_left,
                slope_right,
            },
        })
    }

    /// Arbitrary continuous closure `s ↦ φ(s)` writing into its output buffer.
    pub fn from_fn(
        dim: usize,
        span: f64,
        f: impl Fn(f64, &mut [f64]) + Send + Sync + 'static,
    ) -> Result<Self> {
        check_span(span)?;
        Ok(Self {
            dim,
            span,
            repr: Repr::Custom(Arc::new(f)),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Length `T` of the domain `[−T, 0]`.
    pub fn span(&self) -> f64 {
        self.span
    }

    /// Evaluates `φ(s)` without a domain check (sampled forms extrapolate flat).
    pub fn eval_into(&self, s: f64, out: &mut [f64]) {
        match &self.repr {
            Repr::Constant(v) => out.copy_from_slice(v),
            Repr::Polynomial(c) => {
                for (o, coeffs) in out.iter_mut().zip(c) {
                    *o = coeffs.iter().rev().fold(0.0, |acc, &a| acc * s + a);
                }
            }
            Repr::Sinusoid(terms) => {
                for (o, [off, amp, w, ph]) in out.iter_mut().zip(terms) {
                    *o = off + amp * (w * s + ph).sin();
                }
            }
            Repr::Sampled {
                times,
                values,
                slope_left,
                slope_right,
            } => hermite_eval(
                times,
                values,
                slope_left,
                slope_right,
                self.dim,
                s,
                out,
                false,
            ),
            Repr::Custom(f) => f(s, out),
        }
    }

    /// Derivative `φ'(s)` (right derivative at sample nodes).
    pub fn deriv_into(&self, s: f64, out: &mut [f64]) {
        match &self.repr {
            Repr::Constant(_) => out.iter_mut().for_each(|o| *o = 0.0),
            Repr::Polynomial(c) => {
                for (o, coeffs) in out.iter_mut().zip(c) {
                    *o = coeffs
                        .iter()
                        .enumerate()
                        .skip(1)
                        .rev()
                        .fold(0.0, |acc, (k, &a)| acc * s + k as f64 * a);
                }
            }
            Repr::Sinusoid(terms) => {
                for (o, [_, amp, w, ph]) in out.iter_mut().zip(terms) {
                    *o = amp * w * (w * s + ph).cos();
                }
            }
            Repr::Sampled {
                times,
                values,
                slope_left,
                slope_right,
            } => hermite_eval(
                times,
                values,
                slope_left,
                slope_right,
                self.dim,
                s,
                out,
                true,
            ),
            Repr::Custom(f) => {
                let h = 1e-6 * self.span.max(1.0);
                let mut a = vec![0.0; self.dim];
                let mut b = vec![0.0; self.dim];
                let (lo, hi) = if s - h < -self.span {
                    (s, s + h)
                } else if s + h > 0.0 {
                    (s - h, s)
                } else {
                    (s - h, s + h)
                };
                f(lo, &mut a);
                f(hi, &mut b);
                for ((o, x), y) in out.iter_mut().zip(&a).zip(&b) {
                    *o = (y - x) / (hi - lo);
                }
            }
        }
    }

    /// `φ(s)` with a domain check against `[−T, 0]`.
    pub fn eval(&self, s: f64) -> Result<Vec<f64>> {
        let slack = 1e-12 * self.span.max(1.0);
        if s < -self.span - slack || s > slack {
            return Err(Error::OutOfSpan {
                t: s,
                start: -self.span,
                end: 0.0,
            });
        }
        let mut out = vec![0.0; self.dim];
        self.eval_into(s, &mut out);
        Ok(out)
    }

    /// Uniform grid of `points` on `[−T, 0]` plus any sample nodes of a sampled
    /// representation.
    pub fn sample_grid(&self, points: usize) -> Vec<f64> {
        let points = points.max(2);
        let mut grid: Vec<f64> = (0..points)
            .map(|k| -self.span + self.span * k as f64 / (points - 1) as f64)
            .collect();
        if let Repr::Sampled { times, .. } = &self.repr {
            if times.len() < 4 * points {
                grid.extend(times.iter().copied());
                grid.sort_by(f64::total_cmp);
                grid.dedup();
            }
        }
        grid
    }

    /// `‖φ‖_{C⁰}` with the 1-norm on ℝᵈ, over `sample_grid(points)`.
    pub fn sup_norm(&self, points: usize) -> f64 {
        let mut buf = vec![0.0; self.dim];
        self.sample_grid(points)
            .into_iter()
            .map(|s| {
                self.eval_into(s, &mut buf);
                buf.iter().map(|v| v.abs()).sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// `Lip(φ)`: the largest divided difference between neighbouring grid points.
    pub fn lipschitz(&self, points: usize) -> f64 {
        let grid = self.sample_grid(points);
        let mut prev = vec![0.0; self.dim];
        let mut cur = vec![0.0; self.dim];
        self.eval_into(grid[0], &mut prev);
        let mut lip: f64 = 0.0;
        for w in grid.windows(2) {
            self.eval_into(w[1], &mut cur);
            let dt = w[1] - w[0];
            if dt > 0.0 {
                let diff: f64 = prev.iter().zip(&cur).map(|(a, b)| (a - b).abs()).sum();
                lip = lip.max(diff / dt);
            }
            std::mem::swap(&mut prev, &mut cur);
        }
        lip
    }

    /// `‖φ‖_{C^{0,1}} = ‖φ‖_{C⁰} + Lip(φ)`.
    pub fn c01_norm(&self, points: usize) -> f64 {
        self.sup_norm(points) + self.lipschitz(points)
    }

    /// Pointwise componentwise `|φ₁(s) − φ₂(s)|`, used as the linear system's
    /// initial condition in comparison checks.
    pub fn abs_difference(&self, other: &HistoryFunction) -> Result<HistoryFunction> {
        if self.dim != other.dim {
            return Err(Error::Dimension {
                what: "history",
                expected: self.dim,
                got: other.dim,
            });
        }
        let (a, b) = (self.clone(), other.clone());
        let dim = self.dim;
        HistoryFunction::from_fn(dim, self.span.min(other.span), move |s, out| {
            let mut tmp = vec![0.0; dim];
            a.eval_into(s, out);
            b.eval_into(s, &mut tmp);
            for (o, t) in out.iter_mut().zip(&tmp) {
                *o = (*o - t).abs();
            }
        })
    }
}

fn validate_grid(times: &[f64], values: &[f64], dim: usize) -> Result<()> {
    if times.len() < 2 || values.len() != times.len() * dim {
        return Err(Error::Config(
            "sampled history needs ≥ 2 nodes and times.len()·dim values".into(),
        ));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Config(
            "sampled history times must be strictly increasing".into(),
        ));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config("history values must be finite".into()));
    }
    Ok(())
}

/// Evaluates the cubic Hermite interpolant (or its derivative).
#[allow(clippy::too_many_arguments)]
pub(crate) fn hermite_eval(
    times: &[f64],
    values: &[f64],
    slope_left: &[f64],
    slope_right: &[f64],
    dim: usize,
    s: f64,
    out: &mut [f64],
    derivative: bool,
) {
    let n = times.len();
    if s <= times[0] || s >= times[n - 1] {
        let i = if s <= times[0] { 0 } else { n - 1 };
        for c in 0..dim {
            out[c] = if derivative { 0.0 } else { values[i * dim + c] };
        }
        return;
    }
    let i = times.partition_point(|&x| x <= s) - 1;
    let h = times[i + 1] - times[i];
    let u = (s - times[i]) / h;
    for c in 0..dim {
        out[c] = hermite_piece(
            values[i * dim + c],
            values[(i + 1) * dim + c],
            slope_right[i * dim + c],
            slope_left[(i + 1) * dim + c],
            h,
            u,
            derivative,
        );
    }
}

/// Cubic Hermite on one interval of length `h` at relative position `u`.
/// Extrapolates for `u` outside `[0, 1]`.
#[inline]
pub(crate) fn hermite_piece(
    y0: f64,
    y1: f64,
    m0: f64,
    m1: f64,
    h: f64,
    u: f64,
    derivative: bool,
) -> f64 {
    if derivative {
        let d00 = 6.0 * u * u - 6.0 * u;
        let d10 = 3.0 * u * u - 4.0 * u + 1.0;
        let d01 = -d00;
        let d11 = 3.0 * u * u - 2.0 * u;
        (d00 * y0 + d01 * y1) / h + d10 * m0 + d11 * m1
    } else {
        let u2 = u * u;
        let u3 = u2 * u;
        let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
        let h10 = u3 - 2.0 * u2 + u;
        let h01 = -2.0 * u3 + 3.0 * u2;
        let h11 = u3 - u2;
        h00 * y0 + h10 * h * m0 + h01 * y1 + h11 * h * m1
    }
}

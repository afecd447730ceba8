//! Stability matrix `𝓜 = (M₀ + εI) + Σ Mᵢ` and the intrinsic-stability test.

use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::{spectral_abscissa, spectrum, Matrix};
use crate::parallel::{map_range, Execution};
use crate::system::{catalog, Field, Rhs, SampleBox, SystemSpec};

/// The matrices `M₀, M₁, …, M_r` bounding the derivatives of `f`.
///
/// As an [`Rhs`] this is the linear comparison system
/// `r'(t) = (M₀ + εI) r(t) + Σ Mᵢ r(t − hᵢ(t))`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundMatrices {
    pub m0: Matrix,
    pub mi: Vec<Matrix>,
    /// Diagonal shift used for complex-valued systems; zero otherwise.
    pub epsilon: f64,
    /// Set when the bounds come from grid sampling rather than analysis.
    pub heuristic: bool,
}

impl BoundMatrices {
    /// Validates shapes, `Mᵢ ≥ 0` and nonnegative off-diagonal `M₀`.
    pub fn new(m0: Matrix, mi: Vec<Matrix>) -> Result<Self> {
        let d = m0.ensure_square()?;
        for (i, m) in mi.iter().enumerate() {
            if m.rows() != d || m.cols() != d {
                return Err(Error::Dimension {
                    what: "bound matrix M_i",
                    expected: d,
                    got: m.rows().max(m.cols()),
                });
            }
            if !m.is_nonnegative() {
                return Err(Error::param(
                    &format!("M{}", i + 1),
                    "delay bound matrices must be entrywise nonnegative",
                ));
            }
        }
        if !m0.is_metzler() {
            return Err(Error::param(
                "M0",
                "off-diagonal entries of M0 must be nonnegative",
            ));
        }
        if !m0.is_finite() || mi.iter().any(|m| !m.is_finite()) {
            return Err(Error::Config("bound matrices must be finite".into()));
        }
        Ok(Self {
            m0,
            mi,
            epsilon: 0.0,
            heuristic: false,
        })
    }

    pub fn dim(&self) -> usize {
        self.m0.rows()
    }

    pub fn delay_count(&self) -> usize {
        self.mi.len()
    }

    pub(crate) fn check_shape(&self, d: usize, r: usize) -> Result<()> {
        if self.dim() != d {
            return Err(Error::Dimension {
                what: "bound matrices",
                expected: d,
                got: self.dim(),
            });
        }
        if self.delay_count() != r {
            return Err(Error::Dimension {
                what: "bound matrix count",
                expected: r,
                got: self.delay_count(),
            });
        }
        Ok(())
    }

    /// `M₀ + εI`.
    pub fn effective_m0(&self) -> Matrix {
        self.m0.shift_diagonal(self.epsilon)
    }

    /// The stability matrix `(M₀ + εI) + Σ Mᵢ`.
    pub fn sum(&self) -> Matrix {
        self.mi.iter().fold(self.effective_m0(), |acc, m| &acc + m)
    }

    /// Applies the complex-system shift `ε = min(10⁻³, margin/10)`, where the
    /// margin is `|α(𝓜)|` at `ε = 0` (and `ε = 10⁻³` when that margin is 0).
    pub fn with_complex_shift(mut self) -> Result<Self> {
        self.epsilon = 0.0;
        let margin = spectral_abscissa(&self.sum())?.abs();
        self.epsilon = if margin > 0.0 {
            (margin / 10.0).min(1e-3)
        } else {
            1e-3
        };
        Ok(self)
    }

    /// Multiplies every `Mᵢ` (`i ≥ 1`) by `c`.
    pub fn scale_delayed(&self, c: f64) -> Self {
        Self {
            mi: self.mi.iter().map(|m| m.scale(c)).collect(),
            ..self.clone()
        }
    }
}

impl Rhs for BoundMatrices {
    fn dim(&self) -> usize {
        self.m0.rows()
    }
    fn delay_count(&self) -> usize {
        self.mi.len()
    }
    fn eval(&self, _t: f64, x: &[f64], delayed: &[f64], out: &mut [f64]) {
        let d = self.m0.rows();
        self.m0.mul_vec_into(x, out);
        for (o, xi) in out.iter_mut().zip(x) {
            *o += self.epsilon * xi;
        }
        for (m, y) in self.mi.iter().zip(delayed.chunks(d)) {
            for (i, o) in out.iter_mut().enumerate() {
                *o += m.row(i).iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
            }
        }
    }
}

/// Outcome of the intrinsic-stability test.
#[derive(Clone, Debug, PartialEq)]
pub struct StabilityVerdict {
    pub stability_matrix: Matrix,
    pub abscissa: f64,
    pub intrinsically_stable: bool,
    pub margin: f64,
    /// True when the bounds were sampled; a stable verdict then only holds
    /// relative to the sampled box.
    pub heuristic: bool,
}

impl StabilityVerdict {
    pub fn label(&self) -> &'static str {
        match (self.intrinsically_stable, self.heuristic) {
            (true, false) => "STABLE",
            (true, true) => "STABLE-RELATIVE-TO-SAMPLED-BOX",
            (false, _) => "NOT-INTRINSICALLY-STABLE",
        }
    }
}

impl fmt::Display for StabilityVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "abscissa {:.6} verdict {}", self.abscissa, self.label())?;
        if self.heuristic && self.intrinsically_stable {
            write!(
                f,
                " (intrinsically stable relative to sampled box; not a certificate)"
            )?;
        }
        Ok(())
    }
}

/// Builds `𝓜` and decides `α(𝓜) < 0`.
pub fn stability_matrix(b: &BoundMatrices) -> Result<StabilityVerdict> {
    let m = b.sum();
    let abscissa = spectral_abscissa(&m)?;
    Ok(StabilityVerdict {
        stability_matrix: m,
        abscissa,
        intrinsically_stable: abscissa < 0.0,
        margin: abscissa.abs(),
        heuristic: b.heuristic,
    })
}

/// Analytic bounds of a system, shifted when it is declared complex.
pub fn system_bounds(sys: &SystemSpec) -> Result<BoundMatrices> {
    let b = sys.bounds.clone().ok_or_else(|| {
        Error::Config(format!(
            "{}: no analytic bound matrices; supply bounds or sample them",
            sys.name
        ))
    })?;
    match sys.field {
        Field::Real => Ok(b),
        Field::Complex => b.with_complex_shift(),
    }
}

/// Options for [`estimate_bounds_by_sampling`].
#[derive(Clone, Debug)]
pub struct SamplingOptions {
    /// Grid points per axis (≥ 3).
    pub density: usize,
    /// Times at which `f` is sampled.
    pub t_grid: Vec<f64>,
    pub exec: Execution,
}

impl SamplingOptions {
    /// Autonomous sampling (a single time point).
    pub fn new(density: usize) -> Self {
        Self {
            density,
            t_grid: vec![0.0],
            exec: Execution::default(),
        }
    }

    /// Nonautonomous default: `[0, 10T]` at 1024 points.
    pub fn nonautonomous(density: usize, delay_bound: f64) -> Self {
        let t_grid = (0..1024)
            .map(|k| 10.0 * delay_bound * k as f64 / 1023.0)
            .collect();
        Self {
            density,
            t_grid,
            exec: Execution::default(),
        }
    }
}

struct Jacobians {
    dx: Vec<f64>,
    dy: Vec<f64>,
}

/// Central-difference Jacobians at one point; `h` per variable.
fn jacobians(rhs: &dyn Rhs, t: f64, point: &[f64], h: &[f64]) -> Jacobians {
    let d = rhs.dim();
    let r = rhs.delay_count();
    let nv = d * (r + 1);
    let mut p = point.to_vec();
    let mut fp = vec![0.0; d];
    let mut fm = vec![0.0; d];
    let mut dx = vec![0.0; d * d];
    let mut dy = vec![0.0; r * d * d];
    for v in 0..nv {
        let orig = p[v];
        p[v] = orig + h[v];
        rhs.eval(t, &p[..d], &p[d..], &mut fp);
        p[v] = orig - h[v];
        rhs.eval(t, &p[..d], &p[d..], &mut fm);
        p[v] = orig;
        for row in 0..d {
            let der = (fp[row] - fm[row]) / (2.0 * h[v]);
            if v < d {
                dx[row * d + v] = der;
            } else {
                let (i, col) = ((v - d) / d, (v - d) % d);
                dy[i * d * d + row * d + col] = der;
            }
        }
    }
    Jacobians { dx, dy }
}

/// Entrywise maxima of `abs*(D_x f)` and `|D_{yᵢ} f|`.
#[derive(Clone)]
struct Maxima {
    m0: Vec<f64>,
    mi: Vec<f64>,
}

impl Maxima {
    fn empty(d: usize, r: usize) -> Self {
        let mut m0 = vec![0.0; d * d];
        for i in 0..d {
            m0[i * d + i] = f64::NEG_INFINITY;
        }
        Self {
            m0,
            mi: vec![0.0; r * d * d],
        }
    }

    fn absorb(&mut self, j: &Jacobians, d: usize) {
        for (k, (m, v)) in self.m0.iter_mut().zip(&j.dx).enumerate() {
            let v = if k / d == k % d { *v } else { v.abs() };
            *m = m.max(v);
        }
        for (m, v) in self.mi.iter_mut().zip(&j.dy) {
            *m = m.max(v.abs());
        }
    }

    fn merge(mut self, other: Self) -> Self {
        for (a, b) in self.m0.iter_mut().zip(other.m0) {
            *a = a.max(b);
        }
        for (a, b) in self.mi.iter_mut().zip(other.mi) {
            *a = a.max(b);
        }
        self
    }
}

/// Heuristic lower estimate of the suprema defining `M₀ … M_r`, by central
/// finite differences on a tensor grid over `sample_box`.
pub fn estimate_bounds_by_sampling(
    sys: &dyn Rhs,
    sample_box: &SampleBox,
    opts: &SamplingOptions,
) -> Result<BoundMatrices> {
    let d = sys.dim();
    let r = sys.delay_count();
    let nv = d * (r + 1);
    if sample_box.intervals.len() != nv {
        return Err(Error::Dimension {
            what: "sampling box",
            expected: nv,
            got: sample_box.intervals.len(),
        });
    }
    if opts.density < 3 {
        return Err(Error::param(
            "density",
            format!("need at least 3 points per axis, got {}", opts.density),
        ));
    }
    if opts.t_grid.is_empty() {
        return Err(Error::param("t_grid", "empty time grid"));
    }
    let h: Vec<f64> = sample_box
        .intervals
        .iter()
        .map(|(a, b)| 1e-6 * (b - a).abs().max(1e-300))
        .collect();
    let n_points = (opts.density as u128).pow(nv as u32);
    if n_points * opts.t_grid.len() as u128 > 1 << 32 {
        return Err(Error::param(
            "density",
            format!("{n_points} grid points per time sample is too many"),
        ));
    }
    let n_points = n_points as usize;
    let chunk = 4096usize;
    let n_chunks = n_points.div_ceil(chunk);
    let results = map_range(opts.exec, n_chunks, |c| -> Result<Maxima> {
        let mut acc = Maxima::empty(d, r);
        let mut point = vec![0.0; nv];
        for idx in (c * chunk)..((c + 1) * chunk).min(n_points) {
            let mut rem = idx;
            for (v, (lo, hi)) in sample_box.intervals.iter().enumerate() {
                let k = rem % opts.density;
                rem /= opts.density;
                point[v] = lo + (hi - lo) * k as f64 / (opts.density - 1) as f64;
            }
            for &t in &opts.t_grid {
                let j = jacobians(sys, t, &point, &h);
                if j.dx.iter().chain(&j.dy).any(|v| !v.is_finite()) {
                    return Err(Error::NonFiniteDerivative {
                        point: point.clone(),
                    });
                }
                acc.absorb(&j, d);
            }
        }
        Ok(acc)
    });
    let mut acc = Maxima::empty(d, r);
    for res in results {
        acc = acc.merge(res?);
    }
    let m0 = Matrix::from_vec(d, d, acc.m0)?;
    let mi = acc
        .mi
        .chunks(d * d)
        .map(|c| Matrix::from_vec(d, d, c.to_vec()))
        .collect::<std::result::Result<_, _>>()?;
    let mut b = BoundMatrices::new(m0, mi)?;
    b.heuristic = true;
    Ok(b)
}

/// Stability matrix from derivatives at the fixed point `x*` only, sup over `t_grid`.
pub fn local_stability_matrix(
    sys: &dyn Rhs,
    x_star: &[f64],
    t_grid: &[f64],
) -> Result<StabilityVerdict> {
    let d = sys.dim();
    let r = sys.delay_count();
    if x_star.len() != d {
        return Err(Error::Dimension {
            what: "x*",
            expected: d,
            got: x_star.len(),
        });
    }
    let point: Vec<f64> = x_star.iter().copied().cycle().take(d * (r + 1)).collect();
    let h: Vec<f64> = point.iter().map(|v| 1e-6 * v.abs().max(1.0)).collect();
    let mut acc = Maxima::empty(d, r);
    let mut f = vec![0.0; d];
    for &t in t_grid {
        sys.eval(t, x_star, &point[d..], &mut f);
        let residual: f64 = f.iter().map(|v| v.abs()).sum();
        if !(residual <= 1e-8) {
            return Err(Error::NotFixedPoint { residual, t });
        }
        let j = jacobians(sys, t, &point, &h);
        if j.dx.iter().chain(&j.dy).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteDerivative {
                point: point.clone(),
            });
        }
        acc.absorb(&j, d);
    }
    let m0 = Matrix::from_vec(d, d, acc.m0)?;
    let mi = acc
        .mi
        .chunks(d * d)
        .map(|c| Matrix::from_vec(d, d, c.to_vec()))
        .collect::<std::result::Result<_, _>>()?;
    stability_matrix(&BoundMatrices::new(m0, mi)?)
}

/// Closed-form stability data of reservoir 2.
#[derive(Clone, Debug, PartialEq)]
pub struct Reservoir2Analysis {
    /// `Δ = √(1 − 4δ)`.
    pub delta_root: f64,
    /// Both (real) eigenvalues of `𝓜`, larger first.
    pub eigenvalues: [f64; 2],
    pub abscissa: f64,
    /// `0 < β < 1/2` and `0 < δ < 1/4 − β²`.
    pub region_ok: bool,
    /// `α(𝓜) < 0` exactly when `Δ ∈ (2β, 1)`.
    pub sign_consistent: bool,
}

pub fn reservoir2_analysis(beta: f64, delta: f64) -> Result<Reservoir2Analysis> {
    let dd = catalog::reservoir2_delta(delta)?;
    if !(delta > 0.0) {
        return Err(Error::param(
            "delta",
            format!("must lie in (0, 1/4), got {delta}"),
        ));
    }
    let q = beta / dd;
    let disc = q * q - 2.0 * beta * dd + dd * dd;
    let root = disc.max(0.0).sqrt();
    let hi = 0.5 * (-1.0 + q + root);
    let lo = 0.5 * (-1.0 + q - root);
    let region_ok = beta > 0.0 && beta < 0.5 && delta < 0.25 - beta * beta;
    let in_interval = dd > 2.0 * beta && dd < 1.0;
    let sign_consistent = if hi.abs() <= 1e-12 {
        true
    } else {
        (hi < 0.0) == in_interval
    };
    Ok(Reservoir2Analysis {
        delta_root: dd,
        eigenvalues: [hi, lo],
        abscissa: hi,
        region_ok,
        sign_consistent,
    })
}

/// Closed-form reservoir-1 abscissa with its eigensolver cross-check.
#[derive(Clone, Debug, PartialEq)]
pub struct Reservoir1Analysis {
    pub abscissa: f64,
    pub eigensolve_abscissa: f64,
}

/// `α(g(ρA − I)) = g(ρ − 1)` for nonnegative `A` with `ρ(A) = 1`.
pub fn reservoir1_analysis(g: f64, rho: f64, a: &Matrix) -> Result<Reservoir1Analysis> {
    if !(g > 0.0) || !(rho > 0.0) {
        return Err(Error::param("g/rho", "g and rho must be positive"));
    }
    let n = a.ensure_square()?;
    if !a.is_nonnegative() {
        return Err(Error::param(
            "A",
            "reservoir matrix must be entrywise nonnegative",
        ));
    }
    let sp = spectrum(a)?;
    if (sp.radius - 1.0).abs() > 1e-8 {
        return Err(Error::Rescaling { radius: sp.radius });
    }
    let m = (&a.scale(rho) - &Matrix::identity(n)).scale(g);
    let eigensolve_abscissa = spectral_abscissa(&m)?;
    let abscissa = g * (rho - 1.0);
    if (eigensolve_abscissa - abscissa).abs() > 1e-10 * g.max(1.0) {
        return Err(Error::Config(format!(
            "closed-form abscissa {abscissa} disagrees with eigensolve {eigensolve_abscissa}"
        )));
    }
    Ok(Reservoir1Analysis {
        abscissa,
        eigensolve_abscissa,
    })
}

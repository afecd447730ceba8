//! Isospectral and isoradial reduction, the block-companion radius identity,
//! and row-independent-closure (RIC) bounds on the joint spectral radius of
//! the discretized families.

use std::io::Write;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::csv;
use crate::discretize::{step_operators, BlockCompanion};
use crate::error::{Error, Result};
use crate::linalg::{spectral_radius, spectrum, CMatrix, LinalgError, Lu, Matrix};
use crate::parallel::{fold_range, Execution};
use crate::stability::BoundMatrices;

/// Bisection stops once the bracket is narrower than this.
pub const BISECTION_TOL: f64 = 1e-12;

/// Default number of RIC assignments evaluated before switching to sampling.
pub const DEFAULT_RIC_CAP: u64 = 1_000_000;

fn complement(n: usize, s: &[usize]) -> Result<Vec<usize>> {
    if s.is_empty() || s.len() >= n {
        return Err(Error::param(
            "S",
            format!("must be a nonempty proper subset of 0..{n}"),
        ));
    }
    let mut seen = vec![false; n];
    for &i in s {
        if i >= n || seen[i] {
            return Err(Error::param(
                "S",
                format!("index {i} out of range or repeated"),
            ));
        }
        seen[i] = true;
    }
    Ok((0..n).filter(|&i| !seen[i]).collect())
}

/// `𝓡_S(B, λ) = B_SS − B_SS̄ (B_S̄S̄ − λI)⁻¹ B_S̄S`, evaluated at a fixed `λ`.
pub fn isospectral_reduce(b: &Matrix, s: &[usize], lambda: Complex64) -> Result<CMatrix> {
    let n = b.ensure_square()?;
    let sb = complement(n, s)?;
    let bc = b.to_complex();
    let b_ss = bc.select(s, s);
    let b_sb = bc.select(s, &sb);
    let b_bs = bc.select(&sb, s);
    let shifted = bc.select(&sb, &sb).shift_diagonal(-lambda);
    let lu = Lu::factor(&shifted).map_err(|e| match e {
        LinalgError::Singular { .. } => Error::Pole {
            lambda: format!("{lambda}"),
        },
        other => other.into(),
    })?;
    let x = lu.solve(&b_bs)?;
    Ok(&b_ss - &(&b_sb * &x))
}

#[derive(Clone, Debug, PartialEq)]
pub struct IsoradialReport {
    pub reduced: Matrix,
    pub radius_full: f64,
    pub radius_reduced: f64,
    /// `|ρ(reduced) − ρ(B)| ≤ 1e−8·max(1, ρ(B))`.
    pub preserved: bool,
}

/// `𝓘_S(B) = 𝓡_S(B, ρ(B))` for nonnegative `B`.
pub fn isoradial_reduce(b: &Matrix, s: &[usize]) -> Result<IsoradialReport> {
    let n = b.ensure_square()?;
    if !b.is_nonnegative() {
        return Err(Error::param(
            "B",
            "isoradial reduction needs an entrywise nonnegative matrix",
        ));
    }
    let sb = complement(n, s)?;
    let radius_full = spectral_radius(b)?;
    let scale = radius_full.max(1.0);
    let inner = spectrum(&b.select(&sb, &sb))?;
    if inner
        .eigenvalues
        .iter()
        .any(|mu| (mu - radius_full).norm() <= 1e-9 * scale)
    {
        return Err(Error::NoIsoradialReduction {
            radius: radius_full,
        });
    }
    let reduced = match isospectral_reduce(b, s, Complex64::new(radius_full, 0.0)) {
        Ok(r) => r.map(|z| z.re),
        Err(Error::Pole { .. }) => {
            return Err(Error::NoIsoradialReduction {
                radius: radius_full,
            })
        }
        Err(e) => return Err(e),
    };
    let radius_reduced = spectral_radius(&reduced)?;
    let preserved = (radius_reduced - radius_full).abs() <= 1e-8 * scale;
    Ok(IsoradialReport {
        reduced,
        radius_full,
        radius_reduced,
        preserved,
    })
}

/// Root of `g(λ) = ρ(M(λ)) − λ` on `(0, ∞)` by bisection, `g` decreasing.
///
/// Non-finite `M(λ)` (overflow of `λ^{−i}` near zero) counts as `g > 0`.
fn fixed_point(
    radius_at: impl Fn(f64) -> Result<Option<f64>>,
    mut lo: f64,
    mut hi: f64,
) -> Result<f64> {
    let g = |lam: f64| -> Result<f64> {
        Ok(match radius_at(lam)? {
            Some(r) => r - lam,
            None => f64::INFINITY,
        })
    };
    let mut guard = 0;
    while g(hi)? > 0.0 {
        hi *= 2.0;
        guard += 1;
        if guard > 200 {
            return Err(LinalgError::NoConvergence { sweeps: guard }.into());
        }
    }
    guard = 0;
    while g(lo)? <= 0.0 {
        lo /= 2.0;
        guard += 1;
        if guard > 200 {
            return Ok(0.0);
        }
    }
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `ρ(Σ λ^{−i} Aᵢ)`, or `None` if the weighted sum is not finite.
pub fn weighted_radius(blocks: &[Matrix], lambda: f64) -> Result<Option<f64>> {
    let d = blocks[0].rows();
    let mut m = Matrix::zeros(d, d);
    for (i, a) in blocks.iter().enumerate() {
        if a.is_zero() {
            continue;
        }
        let w = lambda.powi(-(i as i32));
        if !w.is_finite() {
            return Ok(None);
        }
        m = &m + &a.scale(w);
    }
    if !m.is_finite() {
        return Ok(None);
    }
    Ok(Some(spectral_radius(&m)?))
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompanionRadiusReport {
    pub rho_direct: f64,
    pub rho_reduced: f64,
    /// `ρ(Σ Aᵢ)`.
    pub sum_radius: f64,
    /// `ρ_direct < 1 ⟺ ρ(Σ Aᵢ) < 1`.
    pub iff_check: bool,
    /// `|ρ_direct − ρ_reduced| ≤ 1e−8·max(1, ρ_direct)`.
    pub agree: bool,
    /// All blocks zero: `ρ = 0` and the identity is vacuous.
    pub degenerate: bool,
}

/// Checks `ρ(A) = ρ(Σ ρ(A)^{−i} Aᵢ)` for the block companion `A` with top row
/// `A₀ … A_{n−1}`, solving the right side by bisection.
pub fn companion_radius_identity(blocks: &[Matrix]) -> Result<CompanionRadiusReport> {
    if blocks.is_empty() {
        return Err(Error::Config("need at least one block".into()));
    }
    if blocks.iter().any(|b| !b.is_nonnegative()) {
        return Err(Error::param(
            "blocks",
            "companion blocks must be entrywise nonnegative",
        ));
    }
    let comp = BlockCompanion::from_top_row(blocks.to_vec())?;
    let rho_direct = spectral_radius(&comp.dense)?;
    let total = blocks
        .iter()
        .skip(1)
        .fold(blocks[0].clone(), |acc, b| &acc + b);
    let sum_radius = spectral_radius(&total)?;
    let iff_check = (rho_direct < 1.0) == (sum_radius < 1.0);
    if blocks.iter().all(Matrix::is_zero) {
        return Ok(CompanionRadiusReport {
            rho_direct,
            rho_reduced: 0.0,
            sum_radius,
            iff_check,
            agree: true,
            degenerate: true,
        });
    }
    let hi = if rho_direct > 0.0 {
        10.0 * rho_direct
    } else {
        1.0
    };
    let rho_reduced = fixed_point(|lam| weighted_radius(blocks, lam), 1e-8, hi)?;
    let agree = (rho_direct - rho_reduced).abs() <= 1e-8 * rho_direct.max(1.0);
    Ok(CompanionRadiusReport {
        rho_direct,
        rho_reduced,
        sum_radius,
        iff_check,
        agree,
        degenerate: false,
    })
}

/// Per-(delay, row) lattice indices `n_{i,j}`, stored at `i·d + j`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RicAssignment {
    pub delays: usize,
    pub dim: usize,
    pub indices: Vec<usize>,
}

impl RicAssignment {
    pub fn get(&self, delay: usize, row: usize) -> usize {
        self.indices[delay * self.dim + row]
    }

    /// Decodes a mixed-radix counter (base `n_τ + 1`).
    pub fn decode(mut code: u64, delays: usize, dim: usize, n_tau: usize) -> Self {
        let base = n_tau as u64 + 1;
        let indices = (0..delays * dim)
            .map(|_| {
                let v = (code % base) as usize;
                code /= base;
                v
            })
            .collect();
        Self {
            delays,
            dim,
            indices,
        }
    }
}

/// Precomputed pieces of the discretized family at one `τ`.
#[derive(Clone, Debug)]
pub struct RicFamily {
    pub tau: f64,
    pub n_tau: usize,
    pub exp_m0: Matrix,
    /// `Bᵢ = M₀⁻¹(e^{M₀τ} − I) Mᵢ`.
    pub b: Vec<Matrix>,
    lower: f64,
    upper: f64,
}

impl RicFamily {
    pub fn new(bounds: &BoundMatrices, tau: f64, n_tau: usize) -> Result<Self> {
        let (e, phi) = step_operators(bounds, tau)?;
        let b: Vec<Matrix> = bounds.mi.iter().map(|m| &phi * m).collect();
        // ρ(M(λ)) ≥ ρ(e^{M₀τ}) when everything is nonnegative, and for λ ≥ 1
        // ρ(M(λ)) ≤ ‖e^{M₀τ} + Σ Bᵢ‖∞.
        let total = b.iter().fold(e.clone(), |acc, m| &acc + m);
        let lower = (spectral_radius(&e)? * 0.5).max(1e-8);
        let upper = total.norm_inf().max(1.0) * (1.0 + 1e-9);
        Ok(Self {
            tau,
            n_tau,
            exp_m0: e,
            b,
            lower,
            upper,
        })
    }

    pub fn delays(&self) -> usize {
        self.b.len()
    }

    pub fn dim(&self) -> usize {
        self.exp_m0.rows()
    }

    /// `e^{M₀τ} + Σ_{i,j} λ^{−n_{i,j}} eⱼeⱼᵀ Bᵢ`.
    pub fn reduced_matrix(&self, a: &RicAssignment, lambda: f64) -> Option<Matrix> {
        let d = self.dim();
        let mut m = self.exp_m0.clone();
        for (i, bi) in self.b.iter().enumerate() {
            for j in 0..d {
                let w = lambda.powi(-(a.get(i, j) as i32));
                if !w.is_finite() {
                    return None;
                }
                for (dst, src) in m.row_mut(j).iter_mut().zip(bi.row(j)) {
                    *dst += w * src;
                }
            }
        }
        Some(m)
    }

    /// Spectral radius of the RIC element for `a`, via the reduced fixed point.
    pub fn radius(&self, a: &RicAssignment) -> Result<f64> {
        fixed_point(
            |lam| match self.reduced_matrix(a, lam) {
                Some(m) => Ok(Some(spectral_radius(&m)?)),
                None => Ok(None),
            },
            self.lower,
            self.upper,
        )
    }

    /// The full `(n_τ+1)d` block companion of the RIC element for `a`.
    pub fn companion(&self, a: &RicAssignment) -> Result<BlockCompanion> {
        let d = self.dim();
        let mut top = vec![Matrix::zeros(d, d); self.n_tau + 1];
        top[0] = self.exp_m0.clone();
        for (i, bi) in self.b.iter().enumerate() {
            for j in 0..d {
                let m = a.get(i, j);
                for (dst, src) in top[m].row_mut(j).iter_mut().zip(bi.row(j)) {
                    *dst += src;
                }
            }
        }
        BlockCompanion::from_top_row(top)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RicResult {
    pub sup_rho: f64,
    pub argmax: RicAssignment,
    /// True when every assignment was evaluated.
    pub exact: bool,
    pub evaluated: u64,
    /// Number of assignments `(n_τ+1)^{rd}` (as a float; may be huge).
    pub total: f64,
    pub coverage: f64,
}

/// Supremum of `ρ` over the row-independent closure of the family at `τ`.
///
/// Beyond `cap` assignments a seeded random sample of size `cap` is used and
/// the result is only a lower estimate of the supremum (`exact = false`).
pub fn ric_sup_radius(
    bounds: &BoundMatrices,
    tau: f64,
    n_tau: usize,
    cap: u64,
    exec: Execution,
) -> Result<RicResult> {
    let family = RicFamily::new(bounds, tau, n_tau)?;
    let (r, d) = (family.delays(), family.dim());
    let positions = (r * d) as i32;
    let total = (n_tau as f64 + 1.0).powi(positions);
    let exact = total <= cap as f64;
    let count = if exact { total as u64 } else { cap };
    let seed = 0x5eed_u64;
    let assignment = |k: u64| -> RicAssignment {
        if exact {
            RicAssignment::decode(k, r, d, n_tau)
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ k.wrapping_mul(0x9E37_79B9_7F4A_7C15));
            RicAssignment {
                delays: r,
                dim: d,
                indices: (0..r * d).map(|_| rng.gen_range(0..=n_tau)).collect(),
            }
        }
    };
    type Best = Result<(f64, u64)>;
    let best: Best = fold_range(
        exec,
        count as usize,
        Ok((f64::NEG_INFINITY, 0)),
        |k| {
            family
                .radius(&assignment(k as u64))
                .map(|rho| (rho, k as u64))
        },
        |a: Best, b: Best| match (a, b) {
            (Ok(x), Ok(y)) => Ok(if y.0 > x.0 || (y.0 == x.0 && y.1 < x.1) {
                y
            } else {
                x
            }),
            (Err(e), _) | (_, Err(e)) => Err(e),
        },
    );
    let (sup_rho, k) = best?;
    Ok(RicResult {
        sup_rho,
        argmax: assignment(k),
        exact,
        evaluated: count,
        total,
        coverage: count as f64 / total,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrendRow {
    pub n: usize,
    pub tau: f64,
    pub n_tau: usize,
    pub sup_rho: f64,
    /// `n·(1 − sup_rho)`.
    pub beta_hat: f64,
    pub exact: bool,
}

/// For each `n`, `τ = t0/n` and `n_τ = ⌈T/τ⌉`; reports the RIC supremum and
/// the empirical `β̂ₙ = n(1 − sup ρ)`.
pub fn jsr_trend(
    bounds: &BoundMatrices,
    t0: f64,
    n_list: &[usize],
    delay_bound: f64,
    cap: u64,
    exec: Execution,
) -> Result<Vec<TrendRow>> {
    if !(t0 > 0.0) || !(delay_bound > 0.0) {
        return Err(Error::param(
            "t0",
            "t0 and the delay bound must be positive",
        ));
    }
    n_list
        .iter()
        .map(|&n| {
            if n == 0 {
                return Err(Error::param("n", "must be positive"));
            }
            let tau = t0 / n as f64;
            let n_tau = ((delay_bound / tau) - 1e-9).ceil().max(1.0) as usize;
            let res = ric_sup_radius(bounds, tau, n_tau, cap, exec)?;
            Ok(TrendRow {
                n,
                tau,
                n_tau,
                sup_rho: res.sup_rho,
                beta_hat: n as f64 * (1.0 - res.sup_rho),
                exact: res.exact,
            })
        })
        .collect()
}

/// CSV `n,tau,sup_rho,beta_hat`.
pub fn write_trend_csv<W: Write>(w: &mut W, rows: &[TrendRow]) -> std::io::Result<()> {
    let header: Vec<String> = ["n", "tau", "sup_rho", "beta_hat"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    csv::write_table(
        w,
        &header,
        rows.iter()
            .map(|r| [r.n as f64, r.tau, r.sup_rho, r.beta_hat]),
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct AsymptoticReport {
    /// `(n, n·|ρ(I + A/n) − 1 − α(A)/n|)`.
    pub rows: Vec<(f64, f64)>,
    /// Per-row roundoff floor `64·ε·n·(1 + ‖A‖∞)`.
    pub floors: Vec<f64>,
    pub strictly_decreasing: bool,
    /// Decreasing wherever the values rise above the roundoff floor.
    pub pass: bool,
}

/// Tabulates the error of `ρ(I + A/n) ≈ 1 + α(A)/n`.
pub fn asymptotic_radius_check(a: &Matrix, n_list: &[f64]) -> Result<AsymptoticReport> {
    let d = a.ensure_square()?;
    let alpha = spectrum(a)?.abscissa;
    let norm = a.norm_inf();
    let mut rows = Vec::with_capacity(n_list.len());
    let mut floors = Vec::with_capacity(n_list.len());
    for &n in n_list {
        if !(n > 0.0) {
            return Err(Error::param("n", "must be positive"));
        }
        let m = a.scale(1.0 / n).shift_diagonal(1.0);
        debug_assert_eq!(m.rows(), d);
        let rho = spectral_radius(&m)?;
        rows.push((n, n * (rho - 1.0 - alpha / n).abs()));
        floors.push(64.0 * f64::EPSILON * n * (1.0 + norm));
    }
    let strictly_decreasing = rows.windows(2).all(|w| w[1].1 < w[0].1);
    let pass = rows
        .windows(2)
        .zip(floors.windows(2))
        .all(|(w, f)| w[1].1 < w[0].1 || (w[0].1 <= f[0] && w[1].1 <= f[1]));
    Ok(AsymptoticReport {
        rows,
        floors,
        strictly_decreasing,
        pass,
    })
}

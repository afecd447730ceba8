//! Unit-slope lattice delays (`LI_τ`), their block-companion matrices and the
//! lattice evaluation map.

use std::io::Write;

use crate::csv;
use crate::error::{Error, Result};
use crate::integrate::exact_step_linear;
use crate::linalg::{expm, solve_linear, Matrix};
use crate::stability::BoundMatrices;
use crate::system::{DelayComponent, DelaySignal, HistoryFunction, Side};

/// Relative slack for "τ divides the lattice spacing".
const ALIGN_TOL: f64 = 1e-12;

/// Delay with slope 1 on each `(kτ, (k+1)τ)` and value `n_{i,k}τ + (t − kτ)`.
///
/// `table[k][i] = n_{i,k}`; the table repeats with period `table.len()·τ`.
#[derive(Clone, Debug, PartialEq)]
pub struct LiTauDelay {
    pub tau: f64,
    pub n_tau: usize,
    pub table: Vec<Vec<usize>>,
}

impl LiTauDelay {
    pub fn new(tau: f64, n_tau: usize, table: Vec<Vec<usize>>) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::param("tau", format!("must be positive, got {tau}")));
        }
        if n_tau == 0 {
            return Err(Error::param("n_tau", "must be at least 1"));
        }
        let r = table
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::Config("LI_tau table is empty".into()))?;
        for row in &table {
            if row.len() != r {
                return Err(Error::Config(
                    "LI_tau table rows must have one entry per delay".into(),
                ));
            }
            if let Some(&bad) = row.iter().find(|&&n| n > n_tau) {
                return Err(Error::param(
                    "table",
                    format!("index {bad} exceeds n_tau = {n_tau}"),
                ));
            }
        }
        Ok(Self { tau, n_tau, table })
    }

    /// `T′ = n_τ·τ`.
    pub fn t_prime(&self) -> f64 {
        self.n_tau as f64 * self.tau
    }

    pub fn delay_count(&self) -> usize {
        self.table[0].len()
    }

    /// Indices `n₁…n_r` used on interval `k`.
    pub fn indices(&self, k: usize) -> &[usize] {
        &self.table[k % self.table.len()]
    }

    /// The delay as a signal with bound `T′`.
    pub fn to_signal(&self) -> Result<DelaySignal> {
        let comps = (0..self.delay_count())
            .map(|i| DelayComponent::LiTau {
                tau: self.tau,
                anchors: self.table.iter().map(|row| row[i]).collect(),
            })
            .collect();
        DelaySignal::new(comps, self.t_prime())
    }
}

/// Result of [`approximate_delay`].
#[derive(Clone, Debug, PartialEq)]
pub struct DelayApproximation {
    pub delay: LiTauDelay,
    /// Guaranteed `τ + ω(τ)` with `ω` the sampled modulus of continuity.
    pub error_bound: f64,
    /// Sampled `sup |h − ĥ|` on the same grid.
    pub observed_error: f64,
}

fn check_alignment(h: &DelaySignal, tau: f64) -> Result<()> {
    for l in h.lattices() {
        let q = l.spacing / tau;
        if (q - q.round()).abs() > ALIGN_TOL * q.max(1.0) || q.round() < 1.0 {
            return Err(Error::Alignment {
                tau,
                spacing: l.spacing,
            });
        }
        let o = l.start / tau;
        if (o - o.round()).abs() > ALIGN_TOL * o.abs().max(1.0) {
            return Err(Error::Alignment {
                tau,
                spacing: l.spacing,
            });
        }
    }
    Ok(())
}

/// `ĥᵢ(kτ) = ⌊hᵢ(kτ⁺)/τ⌋τ` with unit slope in between, over `[0, horizon)`.
pub fn approximate_delay(
    h: &DelaySignal,
    tau: f64,
    t_prime: f64,
    horizon: f64,
) -> Result<DelayApproximation> {
    if !(tau > 0.0) {
        return Err(Error::param("tau", format!("must be positive, got {tau}")));
    }
    if !(tau < t_prime - h.bound() + 1e-12 * t_prime) {
        return Err(Error::param(
            "tau",
            format!("need tau < T' − T = {}", t_prime - h.bound()),
        ));
    }
    if !(horizon > 0.0) {
        return Err(Error::param("horizon", "must be positive"));
    }
    check_alignment(h, tau)?;
    let n_tau = (t_prime / tau - 1e-9).ceil() as usize;
    let intervals = ((horizon / tau) - 1e-9).ceil().max(1.0) as usize;
    let table: Vec<Vec<usize>> = (0..intervals)
        .map(|k| {
            let t = k as f64 * tau;
            h.components()
                .iter()
                .map(|c| {
                    let v = c.value_at(t + 1e-12, Side::Right).max(0.0);
                    ((v / tau + 1e-9).floor() as usize).min(n_tau)
                })
                .collect()
        })
        .collect();
    let delay = LiTauDelay::new(tau, n_tau, table)?;

    // ω(τ) on each continuity piece, and the observed error, on a τ/20 grid.
    let sub = 20usize;
    let dt = tau / sub as f64;
    let n = intervals * sub;
    let breaks = h.discontinuities(0.0, horizon + tau);
    let approx = delay.to_signal()?;
    let (mut omega, mut observed) = (0.0f64, 0.0f64);
    let mut vals: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    let mut piece: Vec<usize> = Vec::with_capacity(n + 1);
    let mut hv = vec![0.0; h.count()];
    let mut av = vec![0.0; h.count()];
    for k in 0..=n {
        let t = k as f64 * dt;
        h.eval_into(t, Side::Right, &mut hv);
        approx.eval_into(t, Side::Right, &mut av);
        for (x, y) in hv.iter().zip(&av) {
            observed = observed.max((x - y).abs());
        }
        vals.push(hv.clone());
        piece.push(breaks.partition_point(|&b| b <= t + 1e-12 * t.max(1.0)));
    }
    for k in 0..=n {
        for j in (k + 1)..=(k + sub).min(n) {
            if piece[j] != piece[k] {
                break;
            }
            for (x, y) in vals[k].iter().zip(&vals[j]) {
                omega = omega.max((x - y).abs());
            }
        }
    }
    Ok(DelayApproximation {
        delay,
        error_bound: tau + omega,
        observed_error: observed,
    })
}

/// One member of the discretized family: top row `e^{M₀τ} + N₀, N₁, …, N_{n_τ}`
/// over identity blocks on the subdiagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockCompanion {
    pub d: usize,
    pub n_tau: usize,
    pub top: Vec<Matrix>,
    pub dense: Matrix,
}

impl BlockCompanion {
    /// Assembles the `(n_τ+1)d` square matrix from its top-row blocks.
    pub fn from_top_row(top: Vec<Matrix>) -> Result<Self> {
        let d = top
            .first()
            .map(Matrix::rows)
            .ok_or_else(|| Error::Config("no blocks".into()))?;
        let nb = top.len();
        for b in &top {
            if b.rows() != d || b.cols() != d {
                return Err(Error::Dimension {
                    what: "companion block",
                    expected: d,
                    got: b.rows(),
                });
            }
        }
        let size = nb * d;
        let mut dense = Matrix::zeros(size, size);
        for (m, b) in top.iter().enumerate() {
            for i in 0..d {
                for j in 0..d {
                    dense[(i, m * d + j)] = b[(i, j)];
                }
            }
        }
        for k in 1..nb {
            for i in 0..d {
                dense[(k * d + i, (k - 1) * d + i)] = 1.0;
            }
        }
        Ok(Self {
            d,
            n_tau: nb - 1,
            top,
            dense,
        })
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.dense.mul_vec(v)
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        let header: Vec<String> = (1..=self.dense.cols()).map(|j| format!("c{j}")).collect();
        csv::write_table(
            w,
            &header,
            (0..self.dense.rows()).map(|i| self.dense.row(i).to_vec()),
        )
    }
}

/// `e^{M₀τ}` and `Φ = M₀⁻¹(e^{M₀τ} − I)` for the effective `M₀`.
pub fn step_operators(b: &BoundMatrices, tau: f64) -> Result<(Matrix, Matrix)> {
    let m0 = b.effective_m0();
    let e = expm(&m0, tau)?;
    let phi = solve_linear(&m0, &(&e - &Matrix::identity(b.dim())))?;
    Ok((e, phi))
}

/// Builds the companion for delay indices `n₁…n_r`, with
/// `N_m = M₀⁻¹(e^{M₀τ} − I) Σ_{nᵢ=m} Mᵢ`.
pub fn build_companion(
    b: &BoundMatrices,
    tau: f64,
    n_tau: usize,
    indices: &[usize],
) -> Result<BlockCompanion> {
    if indices.len() != b.delay_count() {
        return Err(Error::Dimension {
            what: "delay indices",
            expected: b.delay_count(),
            got: indices.len(),
        });
    }
    if let Some(&bad) = indices.iter().find(|&&n| n > n_tau) {
        return Err(Error::param(
            "indices",
            format!("index {bad} exceeds n_tau = {n_tau}"),
        ));
    }
    let d = b.dim();
    let (e, phi) = step_operators(b, tau)?;
    let mut sums = vec![Matrix::zeros(d, d); n_tau + 1];
    for (m, &n) in b.mi.iter().zip(indices) {
        sums[n] = &sums[n] + m;
    }
    let mut top: Vec<Matrix> = sums
        .iter()
        .map(|s| {
            if s.is_zero() {
                Matrix::zeros(d, d)
            } else {
                &phi * s
            }
        })
        .collect();
    top[0] = &top[0] + &e;
    BlockCompanion::from_top_row(top)
}

/// `π_τ φ = (φ(0), φ(−τ), …, φ(−n_τ τ))`.
pub fn evaluation_map(phi: &HistoryFunction, tau: f64, n_tau: usize) -> Result<Vec<f64>> {
    let reach = n_tau as f64 * tau;
    if reach > phi.span() * (1.0 + 1e-12) + 1e-12 {
        return Err(Error::OutOfSpan {
            t: -reach,
            start: -phi.span(),
            end: 0.0,
        });
    }
    let mut out = Vec::with_capacity((n_tau + 1) * phi.dim());
    for k in 0..=n_tau {
        let s = (-(k as f64) * tau).max(-phi.span());
        out.extend(phi.eval(s)?);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SemiconjugacyReport {
    pub max_discrepancy: f64,
    pub scale: f64,
    pub pass: bool,
}

/// Compares exact lattice stepping with repeated companion multiplication.
pub fn verify_semiconjugacy(
    b: &BoundMatrices,
    li: &LiTauDelay,
    phi: &HistoryFunction,
    steps: usize,
) -> Result<SemiconjugacyReport> {
    let v0 = evaluation_map(phi, li.tau, li.n_tau)?;
    let exact = exact_step_linear(b, li, &v0, steps)?;
    let period = li.table.len();
    let companions = (0..period.min(steps.max(1)))
        .map(|k| build_companion(b, li.tau, li.n_tau, li.indices(k)))
        .collect::<Result<Vec<_>>>()?;
    let scale = v0.iter().map(|v| v.abs()).sum::<f64>();
    let mut v = v0;
    let mut max_discrepancy: f64 = 0.0;
    for (k, ex) in exact.iter().enumerate().skip(1) {
        v = companions[(k - 1) % companions.len()].apply(&v);
        for (a, e) in v.iter().zip(ex) {
            max_discrepancy = max_discrepancy.max((a - e).abs());
        }
    }
    let pass = max_discrepancy <= 1e-10 * scale.max(f64::MIN_POSITIVE);
    Ok(SemiconjugacyReport {
        max_discrepancy,
        scale,
        pass,
    })
}

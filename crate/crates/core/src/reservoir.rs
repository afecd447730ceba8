//! Delayed reservoirs, input-signal generation and the consistency
//! correlation `γ²(T)`.

use std::io::Write;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::csv::format_g17;
use crate::error::{Error, Result};
use crate::integrate::{integrate, IntegrateOptions, Trajectory};
use crate::linalg::Matrix;
use crate::parallel::{map_slice, Execution};
use crate::stability::reservoir2_analysis;
use crate::system::catalog::{reservoir1, reservoir2_rhs, ScalarInput, VectorInput};
use crate::system::{hermite_piece, DelaySignal, HistoryFunction};

/// Default transient discarded before measuring consistency.
pub const DEFAULT_T_SKIP: f64 = 5.0;

/// Minimum componentwise standard deviation for `γ²`.
pub const MIN_STD: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InputSource {
    LorenzX,
    LorenzY,
    LorenzZ,
    Synthetic,
    File,
}

/// Sampled input `u(t)` with cubic Hermite interpolation; held constant
/// outside the sampled range.
#[derive(Clone, Debug, PartialEq)]
pub struct InputSignal {
    dim: usize,
    times: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
    pub source: InputSource,
}

impl InputSignal {
    /// Row-major `values` (`times.len() × dim`) with exact `slopes`.
    pub fn with_slopes(
        times: Vec<f64>,
        values: Vec<f64>,
        slopes: Vec<f64>,
        dim: usize,
        source: InputSource,
    ) -> Result<Self> {
        if dim == 0
            || times.len() < 2
            || values.len() != times.len() * dim
            || slopes.len() != values.len()
        {
            return Err(Error::Config(
                "input signal needs ≥ 2 samples and times.len()·dim values and slopes".into(),
            ));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config(
                "input sample times must be strictly increasing".into(),
            ));
        }
        if values.iter().chain(&slopes).any(|v| !v.is_finite()) {
            return Err(Error::Config("input samples must be finite".into()));
        }
        Ok(Self {
            dim,
            times,
            values,
            slopes,
            source,
        })
    }

    /// Samples with slopes from centred finite differences.
    pub fn sampled(
        times: Vec<f64>,
        values: Vec<f64>,
        dim: usize,
        source: InputSource,
    ) -> Result<Self> {
        let n = times.len();
        if dim == 0 || n < 2 || values.len() != n * dim {
            return Err(Error::Config(
                "input signal needs ≥ 2 samples and times.len()·dim values".into(),
            ));
        }
        let mut slopes = vec![0.0; values.len()];
        for k in 0..n {
            let (a, b) = (k.saturating_sub(1), (k + 1).min(n - 1));
            for c in 0..dim {
                slopes[k * dim + c] =
                    (values[b * dim + c] - values[a * dim + c]) / (times[b] - times[a]);
            }
        }
        Self::with_slopes(times, values, slopes, dim, source)
    }

    /// Samples `f` on a uniform grid over `[0, t_end]` with spacing ≤ `dt`.
    pub fn synthetic(f: impl Fn(f64) -> f64, t_end: f64, dt: f64) -> Result<Self> {
        if !(t_end > 0.0 && dt > 0.0) {
            return Err(Error::param("dt", "t_end and dt must be positive"));
        }
        let n = (t_end / dt).ceil().max(1.0) as usize;
        let times: Vec<f64> = (0..=n).map(|k| t_end * k as f64 / n as f64).collect();
        let values = times.iter().map(|&t| f(t)).collect();
        Self::sampled(times, values, 1, InputSource::Synthetic)
    }

    /// Parses `t,u1,…` rows; an optional non-numeric header line is skipped.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut times = Vec::new();
        let mut values = Vec::new();
        let mut dim = None;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: std::result::Result<Vec<f64>, _> =
                line.split(',').map(|f| f.trim().parse::<f64>()).collect();
            let Ok(fields) = fields else {
                if lineno == 0 {
                    continue;
                }
                return Err(Error::Config(format!(
                    "input file line {}: not numeric",
                    lineno + 1
                )));
            };
            if fields.len() < 2 || dim.is_some_and(|d| d != fields.len() - 1) {
                return Err(Error::Config(format!(
                    "input file line {}: inconsistent column count",
                    lineno + 1
                )));
            }
            dim = Some(fields.len() - 1);
            times.push(fields[0]);
            values.extend_from_slice(&fields[1..]);
        }
        Self::sampled(times, values, dim.unwrap_or(0), InputSource::File)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn covers(&self, a: f64, b: f64) -> bool {
        self.start() <= a + 1e-12 && self.end() >= b - 1e-12
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        let d = self.dim;
        let n = self.times.len();
        if t <= self.times[0] {
            out.copy_from_slice(&self.values[..d]);
            return;
        }
        if t >= self.times[n - 1] {
            out.copy_from_slice(&self.values[(n - 1) * d..]);
            return;
        }
        let k = self.times.partition_point(|&s| s <= t) - 1;
        let h = self.times[k + 1] - self.times[k];
        let u = (t - self.times[k]) / h;
        for (c, o) in out.iter_mut().enumerate() {
            let (i, j) = (k * d + c, (k + 1) * d + c);
            *o = hermite_piece(
                self.values[i],
                self.values[j],
                self.slopes[i],
                self.slopes[j],
                h,
                u,
                false,
            );
        }
    }

    /// First component at `t`.
    pub fn value(&self, t: f64) -> f64 {
        let mut buf = vec![0.0; self.dim];
        self.eval_into(t, &mut buf);
        buf[0]
    }

    /// Sample value `k` of component `c`.
    pub fn sample(&self, k: usize, c: usize) -> f64 {
        self.values[k * self.dim + c]
    }

    pub fn scalar(&self) -> ScalarInput {
        let me = self.clone();
        Arc::new(move |t| me.value(t))
    }

    pub fn vector(&self) -> VectorInput {
        let me = self.clone();
        Arc::new(move |t, out: &mut [f64]| me.eval_into(t, out))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LorenzParams {
    pub sigma: f64,
    pub rho: f64,
    pub beta: f64,
}

impl Default for LorenzParams {
    fn default() -> Self {
        Self {
            sigma: 10.0,
            rho: 28.0,
            beta: 8.0 / 3.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LorenzComponent {
    X,
    Y,
    Z,
}

fn lorenz_field(p: &LorenzParams, s: [f64; 3]) -> [f64; 3] {
    [
        p.sigma * (s[1] - s[0]),
        s[0] * (p.rho - s[2]) - s[1],
        s[0] * s[1] - p.beta * s[2],
    ]
}

/// RK4 integration of the Lorenz system from `seed` over `[0, t_end]` with
/// step ≤ `dt`, returning one coordinate with exact slopes.
pub fn lorenz_input(
    t_end: f64,
    dt: f64,
    params: LorenzParams,
    component: LorenzComponent,
    seed: [f64; 3],
) -> Result<InputSignal> {
    if !(dt > 0.0 && dt <= 1e-2) {
        return Err(Error::param(
            "dt",
            format!("must lie in (0, 1e-2], got {dt}"),
        ));
    }
    if !(t_end > 0.0) {
        return Err(Error::param("t_end", "must be positive"));
    }
    let n = (t_end / dt - 1e-9).ceil().max(1.0) as usize;
    let h = t_end / n as f64;
    let c = match component {
        LorenzComponent::X => 0,
        LorenzComponent::Y => 1,
        LorenzComponent::Z => 2,
    };
    let mut s = seed;
    let mut times = Vec::with_capacity(n + 1);
    let mut values = Vec::with_capacity(n + 1);
    let mut slopes = Vec::with_capacity(n + 1);
    let add =
        |s: [f64; 3], k: [f64; 3], w: f64| [s[0] + w * k[0], s[1] + w * k[1], s[2] + w * k[2]];
    for k in 0..=n {
        let f = lorenz_field(&params, s);
        times.push(h * k as f64);
        values.push(s[c]);
        slopes.push(f[c]);
        if k == n {
            break;
        }
        let k1 = f;
        let k2 = lorenz_field(&params, add(s, k1, 0.5 * h));
        let k3 = lorenz_field(&params, add(s, k2, 0.5 * h));
        let k4 = lorenz_field(&params, add(s, k3, h));
        for i in 0..3 {
            s[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    let source = match component {
        LorenzComponent::X => InputSource::LorenzX,
        LorenzComponent::Y => InputSource::LorenzY,
        LorenzComponent::Z => InputSource::LorenzZ,
    };
    InputSignal::with_slopes(times, values, slopes, 1, source)
}

/// `x₁' = −x₁ − δx₂ + (β/M) Σ sin²(x₁(t−τᵢ) + φ + γJ(t))`, `x₂' = x₁`.
#[derive(Clone, Debug)]
pub struct Reservoir2Config {
    pub beta: f64,
    pub delta: f64,
    pub phase: f64,
    pub gain: f64,
    pub delays: DelaySignal,
}

impl Reservoir2Config {
    pub fn delay_count(&self) -> usize {
        self.delays.count()
    }
}

fn check_input(u: &InputSignal, opts: &IntegrateOptions, t_end: f64) -> Result<()> {
    if !u.covers(opts.t0, t_end) {
        return Err(Error::Config(format!(
            "input covers [{}, {}] but the run needs [{}, {t_end}]",
            u.start(),
            u.end(),
            opts.t0
        )));
    }
    Ok(())
}

pub fn simulate_reservoir2(
    cfg: &Reservoir2Config,
    input: &InputSignal,
    phi: &HistoryFunction,
    t_end: f64,
    opts: &IntegrateOptions,
) -> Result<Trajectory> {
    check_input(input, opts, t_end)?;
    if cfg.delay_count() == 0 {
        return Err(Error::Config("reservoir 2 needs at least one delay".into()));
    }
    let rhs = reservoir2_rhs(
        cfg.beta,
        cfg.delta,
        cfg.phase,
        cfg.gain,
        cfg.delay_count(),
        Some(input.scalar()),
    );
    integrate(&rhs, &cfg.delays, phi, t_end, opts)
}

/// `x' = −g(x + tanh(ρA x(t−h) + σW u(t)))`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_reservoir1(
    g: f64,
    rho: f64,
    a: &Matrix,
    w: &Matrix,
    sigma: f64,
    h: &DelaySignal,
    input: &InputSignal,
    phi: &HistoryFunction,
    t_end: f64,
    opts: &IntegrateOptions,
) -> Result<Trajectory> {
    check_input(input, opts, t_end)?;
    if input.dim() != w.cols() {
        return Err(Error::Dimension {
            what: "input",
            expected: w.cols(),
            got: input.dim(),
        });
    }
    let sys = reservoir1(g, rho, a, w, sigma, Some(input.vector()), h.bound())?;
    integrate(&sys, h, phi, t_end, opts)
}

/// Merged dense grid of both trajectories on `[a, b]`, endpoints included.
fn shared_grid(x: &Trajectory, y: &Trajectory, a: f64, b: f64) -> Vec<f64> {
    let mut grid = x.dense_grid(a, b);
    grid.extend(y.dense_grid(a, b));
    grid.push(a);
    grid.push(b);
    grid.sort_by(f64::total_cmp);
    grid.dedup_by(|p, q| (*p - *q).abs() <= 1e-13 * (1.0 + q.abs()));
    grid
}

fn check_window(traj: &Trajectory, a: f64, b: f64) -> Result<()> {
    if traj.start() > a + 1e-9 || traj.end() < b - 1e-9 {
        return Err(Error::OutOfSpan {
            t: b,
            start: traj.start(),
            end: traj.end(),
        });
    }
    Ok(())
}

/// Per-component `(mean, std)` by the trapezoid rule.
fn moments(grid: &[f64], samples: &[Vec<f64>], c: usize) -> (f64, f64) {
    let len = grid[grid.len() - 1] - grid[0];
    let trap = |f: &dyn Fn(f64) -> f64| -> f64 {
        grid.windows(2)
            .enumerate()
            .map(|(k, w)| 0.5 * (w[1] - w[0]) * (f(samples[k][c]) + f(samples[k + 1][c])))
            .sum::<f64>()
            / len
    };
    let mean = trap(&|v| v);
    let var = trap(&|v| (v - mean) * (v - mean));
    (mean, var.max(0.0).sqrt())
}

/// `γ²(T) = (1/(nT)) Σᵢ ∫ (xᵢ − x̄ᵢ)(yᵢ − ȳᵢ)/(σᵢₓ σᵢᵧ) dt` over
/// `[t_skip, t_skip + T]`.
pub fn consistency_correlation(
    x: &Trajectory,
    y: &Trajectory,
    window: f64,
    t_skip: f64,
) -> Result<f64> {
    let per = component_correlations(x, y, window, t_skip)?;
    Ok(per.iter().sum::<f64>() / per.len() as f64)
}

/// The per-component terms of [`consistency_correlation`].
pub fn component_correlations(
    x: &Trajectory,
    y: &Trajectory,
    window: f64,
    t_skip: f64,
) -> Result<Vec<f64>> {
    if x.dim() != y.dim() {
        return Err(Error::Dimension {
            what: "trajectory",
            expected: x.dim(),
            got: y.dim(),
        });
    }
    if !(window > 0.0) {
        return Err(Error::param("T", "window must be positive"));
    }
    let (a, b) = (t_skip, t_skip + window);
    check_window(x, a, b)?;
    check_window(y, a, b)?;
    let grid = shared_grid(x, y, a, b);
    let sx: Vec<Vec<f64>> = grid.iter().map(|&t| x.eval(t)).collect::<Result<_>>()?;
    let sy: Vec<Vec<f64>> = grid.iter().map(|&t| y.eval(t)).collect::<Result<_>>()?;
    (0..x.dim())
        .map(|c| {
            let (mx, dx) = moments(&grid, &sx, c);
            let (my, dy) = moments(&grid, &sy, c);
            for std in [dx, dy] {
                if std < MIN_STD {
                    return Err(Error::DegenerateSignal { component: c, std });
                }
            }
            let cov: f64 = grid
                .windows(2)
                .enumerate()
                .map(|(k, w)| {
                    let p = (sx[k][c] - mx) * (sy[k][c] - my);
                    let q = (sx[k + 1][c] - mx) * (sy[k + 1][c] - my);
                    0.5 * (w[1] - w[0]) * (p + q)
                })
                .sum::<f64>()
                / window;
            Ok(cov / (dx * dy))
        })
        .collect()
}

/// Windowed mean drift: `|mean(second half) − mean(first half)| / σ` per
/// component over `[t_skip, t_skip + T]`.
#[derive(Clone, Debug, PartialEq)]
pub struct StationarityReport {
    pub drift: Vec<f64>,
    /// All drifts below 1%.
    pub stationary: bool,
}

pub fn stationarity_drift(x: &Trajectory, window: f64, t_skip: f64) -> Result<StationarityReport> {
    let (a, b) = (t_skip, t_skip + window);
    check_window(x, a, b)?;
    let mid = 0.5 * (a + b);
    let sample = |lo: f64, hi: f64| -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let grid = shared_grid(x, x, lo, hi);
        let s = grid.iter().map(|&t| x.eval(t)).collect::<Result<_>>()?;
        Ok((grid, s))
    };
    let (g_all, s_all) = sample(a, b)?;
    let (g1, s1) = sample(a, mid)?;
    let (g2, s2) = sample(mid, b)?;
    let drift: Vec<f64> = (0..x.dim())
        .map(|c| {
            let (_, std) = moments(&g_all, &s_all, c);
            let (m1, _) = moments(&g1, &s1, c);
            let (m2, _) = moments(&g2, &s2, c);
            (m2 - m1).abs() / std.max(MIN_STD)
        })
        .collect();
    let stationary = drift.iter().all(|&d| d < 0.01);
    Ok(StationarityReport { drift, stationary })
}

/// Constant-in-`s` history with components uniform on `[−1, 1]`.
pub fn random_constant_history(
    dim: usize,
    span: f64,
    rng: &mut impl Rng,
) -> Result<HistoryFunction> {
    let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    HistoryFunction::constant(&v, span)
}

/// Settings shared by every point of a reservoir-2 consistency sweep.
#[derive(Clone, Debug)]
pub struct SweepSettings {
    pub phase: f64,
    pub gain: f64,
    pub delays: DelaySignal,
    pub t_end: f64,
    pub window: f64,
    pub t_skip: f64,
    pub seed: u64,
    pub step: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub beta: f64,
    pub delta: f64,
    /// `NaN` when `δ ≥ 1/4` (no real closed form).
    pub abscissa: f64,
    pub region_ok: bool,
    /// `NaN` when the simulation degenerates or fails.
    pub gamma_sq: f64,
}

/// Runs two random-history responses per `(β, δ)` and reports `γ²` next to
/// the closed-form stability data. No pass/fail is attached.
pub fn reservoir2_sweep(
    points: &[(f64, f64)],
    settings: &SweepSettings,
    input: &InputSignal,
    exec: Execution,
) -> Vec<SweepRow> {
    map_slice(exec, points, |&(beta, delta)| {
        let (abscissa, region_ok) = match reservoir2_analysis(beta, delta) {
            Ok(a) => (a.abscissa, a.region_ok),
            Err(_) => (f64::NAN, false),
        };
        let gamma_sq = sweep_point(beta, delta, settings, input).unwrap_or(f64::NAN);
        SweepRow {
            beta,
            delta,
            abscissa,
            region_ok,
            gamma_sq,
        }
    })
}

fn sweep_point(beta: f64, delta: f64, s: &SweepSettings, input: &InputSignal) -> Result<f64> {
    let cfg = Reservoir2Config {
        beta,
        delta,
        phase: s.phase,
        gain: s.gain,
        delays: s.delays.clone(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let span = s.delays.bound();
    let opts = IntegrateOptions::new(s.step);
    let phi1 = random_constant_history(2, span, &mut rng)?;
    let phi2 = random_constant_history(2, span, &mut rng)?;
    let x = simulate_reservoir2(&cfg, input, &phi1, s.t_end, &opts)?;
    let y = simulate_reservoir2(&cfg, input, &phi2, s.t_end, &opts)?;
    consistency_correlation(&x, &y, s.window, s.t_skip)
}

/// CSV `beta,delta,abscissa,region_ok,gamma_sq`.
pub fn write_sweep_csv<W: Write>(w: &mut W, rows: &[SweepRow]) -> std::io::Result<()> {
    writeln!(w, "beta,delta,abscissa,region_ok,gamma_sq")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            format_g17(r.beta),
            format_g17(r.delta),
            format_g17(r.abscissa),
            r.region_ok,
            format_g17(r.gamma_sq)
        )?;
    }
    Ok(())
}

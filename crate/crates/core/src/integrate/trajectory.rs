use std::io::Write;

use crate::csv;
use crate::error::{Error, Result};
use crate::system::{hermite_piece, HistoryFunction, Side, DEFAULT_HISTORY_GRID};

/// Dense solution on `[t₀ − T, t₁]`: the history on `[t₀ − T, t₀]` followed
/// by cubic Hermite pieces between integration nodes.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub(crate) dim: usize,
    pub(crate) t0: f64,
    pub(crate) history: HistoryFunction,
    pub(crate) times: Vec<f64>,
    pub(crate) states: Vec<f64>,
    pub(crate) deriv_right: Vec<f64>,
    pub(crate) deriv_left: Vec<f64>,
    pub(crate) breakpoints: Vec<f64>,
}

impl Trajectory {
    /// Builds a trajectory from node samples with known derivatives; the
    /// history is taken constant at the first state over `span`.
    pub fn from_samples(
        times: Vec<f64>,
        states: Vec<f64>,
        derivs: Vec<f64>,
        dim: usize,
        span: f64,
    ) -> Result<Self> {
        if times.len() < 2 || states.len() != times.len() * dim || derivs.len() != states.len() {
            return Err(Error::Config(
                "trajectory samples need ≥ 2 nodes with matching states and derivatives".into(),
            ));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config(
                "trajectory times must be strictly increasing".into(),
            ));
        }
        let history = HistoryFunction::constant(&states[..dim], span)?;
        Ok(Self {
            dim,
            t0: times[0],
            history,
            breakpoints: vec![times[0]],
            deriv_left: derivs.clone(),
            deriv_right: derivs,
            times,
            states,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn start(&self) -> f64 {
        self.t0
    }

    pub fn end(&self) -> f64 {
        *self.times.last().expect("nonempty")
    }

    /// Length `T` of the history window.
    pub fn span(&self) -> f64 {
        self.history.span()
    }

    pub fn history(&self) -> &HistoryFunction {
        &self.history
    }

    /// Integration node times (including every breakpoint).
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Last state `x(t₁)`.
    pub fn final_state(&self) -> &[f64] {
        self.state(self.times.len() - 1)
    }

    /// Index of the piece `[tᵢ, tᵢ₊₁]` used at `t` (the earlier one for `Left`).
    fn piece(&self, t: f64, side: Side) -> usize {
        let n = self.times.len();
        let i = match side {
            Side::Right => self.times.partition_point(|&x| x <= t),
            Side::Left => self.times.partition_point(|&x| x < t),
        };
        i.clamp(1, n - 1) - 1
    }

    /// Evaluates the Hermite piece `i` (possibly extrapolating) at `t`.
    pub(crate) fn eval_piece(&self, i: usize, t: f64, out: &mut [f64], derivative: bool) {
        let d = self.dim;
        let (ta, tb) = (self.times[i], self.times[i + 1]);
        let h = tb - ta;
        let u = (t - ta) / h;
        for c in 0..d {
            out[c] = hermite_piece(
                self.states[i * d + c],
                self.states[(i + 1) * d + c],
                self.deriv_right[i * d + c],
                self.deriv_left[(i + 1) * d + c],
                h,
                u,
                derivative,
            );
        }
    }

    /// `x(t)` without span checks; `t ≤ t₀` reads the history.
    pub(crate) fn eval_into_unchecked(&self, t: f64, out: &mut [f64]) {
        if t <= self.t0 || self.times.len() < 2 {
            self.history.eval_into((t - self.t0).min(0.0), out);
        } else {
            let i = self.piece(t, Side::Right);
            self.eval_piece(i, t, out, false);
        }
    }

    /// One-sided derivative `x'(t±)`.
    pub fn deriv_into(&self, t: f64, side: Side, out: &mut [f64]) {
        if t < self.t0 || (t == self.t0 && side == Side::Left) || self.times.len() < 2 {
            self.history.deriv_into((t - self.t0).min(0.0), out);
        } else {
            let i = self.piece(t, side);
            self.eval_piece(i, t, out, true);
        }
    }

    fn check_span(&self, t: f64) -> Result<()> {
        let start = self.t0 - self.span();
        let slack = 1e-12 * self.end().abs().max(1.0);
        if !(t >= start - slack && t <= self.end() + slack) {
            return Err(Error::OutOfSpan {
                t,
                start,
                end: self.end(),
            });
        }
        Ok(())
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) -> Result<()> {
        self.check_span(t)?;
        self.eval_into_unchecked(t, out);
        Ok(())
    }

    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(t, &mut out)?;
        Ok(out)
    }

    /// `‖x(t)‖₁`.
    pub fn norm_at(&self, t: f64) -> Result<f64> {
        Ok(self.eval(t)?.iter().map(|v| v.abs()).sum())
    }

    /// Node times and piece midpoints inside `[a, b]`, for dense-grid checks.
    pub fn dense_grid(&self, a: f64, b: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.times.len());
        for (i, &t) in self.times.iter().enumerate() {
            if t >= a && t <= b {
                out.push(t);
            }
            if let Some(&next) = self.times.get(i + 1) {
                let mid = 0.5 * (t + next);
                if mid >= a && mid <= b {
                    out.push(mid);
                }
            }
        }
        out
    }

    /// Max over the dense grid of `‖x(t)‖₁` on `[a, b]`.
    pub fn sup_norm_on(&self, a: f64, b: f64) -> f64 {
        let mut buf = vec![0.0; self.dim];
        self.dense_grid(a, b)
            .into_iter()
            .map(|t| {
                self.eval_into_unchecked(t, &mut buf);
                buf.iter().map(|v| v.abs()).sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// The window `s ∈ [−T, 0] ↦ x(t + s)` on the default history grid.
    pub fn window(&self, t: f64) -> Result<HistoryFunction> {
        self.window_with(t, DEFAULT_HISTORY_GRID)
    }

    /// Window resampled on `points` uniform nodes plus the breakpoints inside it,
    /// keeping one-sided derivatives so kinks survive the resampling.
    pub fn window_with(&self, t: f64, points: usize) -> Result<HistoryFunction> {
        if !(t >= self.t0 - 1e-12 && t <= self.end() + 1e-12 * self.end().abs().max(1.0)) {
            return Err(Error::OutOfSpan {
                t,
                start: self.t0,
                end: self.end(),
            });
        }
        let t = t.clamp(self.t0, self.end());
        let span = self.span();
        let points = points.max(2);
        let mut grid: Vec<f64> = (0..points)
            .map(|k| -span + span * k as f64 / (points - 1) as f64)
            .collect();
        let lo = t - span;
        for &b in self.breakpoints.iter().chain(std::iter::once(&self.t0)) {
            if b > lo && b < t {
                grid.push(b - t);
            }
        }
        grid.sort_by(f64::total_cmp);
        grid.dedup_by(|a, b| (*a - *b).abs() <= 1e-13 * span.max(1.0));
        let d = self.dim;
        let mut values = vec![0.0; grid.len() * d];
        let mut left = vec![0.0; grid.len() * d];
        let mut right = vec![0.0; grid.len() * d];
        for (k, &s) in grid.iter().enumerate() {
            let tt = t + s;
            self.eval_into_unchecked(tt, &mut values[k * d..(k + 1) * d]);
            self.deriv_into(tt, Side::Left, &mut left[k * d..(k + 1) * d]);
            self.deriv_into(tt, Side::Right, &mut right[k * d..(k + 1) * d]);
        }
        HistoryFunction::hermite(grid, values, left, right, d)
    }

    /// CSV with header `t,x1,...,xd`, one row per integration node.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.dim).map(|i| format!("x{i}")));
        let rows = self.times.iter().enumerate().map(|(i, &t)| {
            let mut row = Vec::with_capacity(self.dim + 1);
            row.push(t);
            row.extend_from_slice(self.state(i));
            row
        });
        csv::write_table(w, &header, rows)
    }
}

//! Fixed-step RK4 method of steps with cubic Hermite dense output.
//!
//! Steps never straddle a breakpoint. Breakpoints are `t₀`, every point of the
//! delay-discontinuity lattices, and three generations of their images under
//! the delays (times `t*` with `t* − hᵢ(t*)` equal to a seed). Delayed arguments
//! that fall inside the step being taken are extrapolated from the previous
//! Hermite piece (or linearly from `x'(tₙ)` right after a breakpoint).

mod analysis;
mod exact;
mod trajectory;

pub use analysis::{check_positivity, decay_fit, DecayFit, PositivityReport};
pub use exact::exact_step_linear;
pub use trajectory::Trajectory;

use crate::error::{Error, Result};
use crate::system::{DelayComponent, DelaySignal, HistoryFunction, Rhs, Side, MIN_STEP_CAP_LAG};

/// Integration settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegrateOptions {
    /// Nominal step; the actual step is at most this.
    pub step: f64,
    /// Initial time `t₀`; the history supplies `x(t₀ + s)` for `s ≤ 0`.
    pub t0: f64,
}

impl IntegrateOptions {
    pub fn new(step: f64) -> Self {
        Self { step, t0: 0.0 }
    }

    /// Default step `10⁻³·min(T, 1)`.
    pub fn for_bound(delay_bound: f64) -> Self {
        Self::new(1e-3 * delay_bound.min(1.0))
    }

    pub fn starting_at(mut self, t0: f64) -> Self {
        self.t0 = t0;
        self
    }
}

/// A generation-`k` breakpoint carries a jump in derivative `k + 1`; RK4 needs
/// continuity through the fourth.
const BREAKPOINT_GENERATIONS: usize = 3;
const MAX_BREAKPOINTS: usize = 200_000;

/// Breakpoint seeds and their images (three generations deep) in `(t0, t_end]`.
fn breakpoints(h: &DelaySignal, t0: f64, t_end: f64) -> Vec<f64> {
    let mut seeds = vec![t0];
    seeds.extend(h.discontinuities(t0, t_end));
    let mut out = seeds.clone();
    let bound = h.bound();
    let mut frontier = seeds;
    for _ in 0..BREAKPOINT_GENERATIONS {
        if frontier.is_empty() || out.len() > MAX_BREAKPOINTS {
            break;
        }
        let start = out.len();
        for &p in &frontier {
            for c in h.components() {
                match c {
                    DelayComponent::Constant(v) if *v >= MIN_STEP_CAP_LAG => out.push(p + v),
                    DelayComponent::Constant(_)
                    | DelayComponent::Mod { .. }
                    | DelayComponent::LiTau { .. } => {}
                    DelayComponent::SinusoidSum { .. } | DelayComponent::Sampled { .. } => {
                        // t − h(t) = p has all its solutions in [p, p + T]
                        let hi = (p + bound).min(t_end);
                        let n = 1000usize;
                        let g = |t: f64| t - c.value(t) - p;
                        let mut a = p;
                        let mut ga = g(a);
                        for k in 1..=n {
                            let b = p + (hi - p) * k as f64 / n as f64;
                            let gb = g(b);
                            // h' may exceed 1, so the argument can cross back down
                            if (ga < 0.0) != (gb < 0.0) {
                                let (mut lo, mut up) = (a, b);
                                for _ in 0..60 {
                                    let mid = 0.5 * (lo + up);
                                    if (g(mid) < 0.0) == (ga < 0.0) {
                                        lo = mid;
                                    } else {
                                        up = mid;
                                    }
                                }
                                out.push(up);
                            }
                            a = b;
                            ga = gb;
                        }
                    }
                }
            }
        }
        frontier = out[start..]
            .iter()
            .copied()
            .filter(|&t| t < t_end)
            .collect();
    }
    out.retain(|&t| t > t0 && t < t_end);
    out.push(t_end);
    out.sort_by(f64::total_cmp);
    let tol = 1e-10 * t_end.abs().max(1.0);
    out.dedup_by(|a, b| (*a - *b).abs() <= tol);
    // dedup keeps the first of a cluster; make sure the end is exact
    if let Some(last) = out.last_mut() {
        if (*last - t_end).abs() <= tol {
            *last = t_end;
        }
    }
    out
}

struct Solver<'a> {
    rhs: &'a dyn Rhs,
    h: &'a DelaySignal,
    traj: Trajectory,
    delays: Vec<f64>,
    delayed: Vec<f64>,
    history_start: f64,
}

impl<'a> Solver<'a> {
    /// Fills `self.delayed` for a stage at time `s` with state `xs`.
    /// `k1` is the slope at `tₙ` used for the first-step extrapolation.
    fn gather(
        &mut self,
        s: f64,
        xs: &[f64],
        side: Side,
        k1: &[f64],
        after_break: bool,
    ) -> Result<()> {
        let d = self.traj.dim;
        let n = self.traj.times.len() - 1;
        let t_n = self.traj.times[n];
        let tol_known = 1e-12 * t_n.abs().max(1.0);
        let tol_zero = 1e-13 * s.abs().max(1.0);
        for (i, c) in self.h.components().iter().enumerate() {
            let a = c.delayed_argument(s, side);
            let out = &mut self.delayed[i * d..(i + 1) * d];
            if a >= s - tol_zero {
                out.copy_from_slice(xs);
            } else if a <= t_n + tol_known {
                if a < self.history_start - 1e-12 * self.history_start.abs().max(1.0) {
                    return Err(Error::HistoryUnderrun {
                        component: i,
                        t: s,
                        argument: a,
                        history_start: self.history_start,
                    });
                }
                self.traj.eval_into_unchecked(a.min(t_n), out);
            } else if n == 0 || after_break {
                let xn = self.traj.state(n);
                for ((o, x), k) in out.iter_mut().zip(xn).zip(k1) {
                    *o = x + (a - t_n) * k;
                }
            } else {
                self.traj.eval_piece(n - 1, a, out, false);
            }
        }
        Ok(())
    }

    fn slope(
        &mut self,
        s: f64,
        xs: &[f64],
        side: Side,
        k1: &[f64],
        after_break: bool,
        out: &mut [f64],
    ) -> Result<()> {
        self.gather(s, xs, side, k1, after_break)?;
        self.h.eval_into(s, side, &mut self.delays);
        self.rhs.eval(s, xs, &self.delayed, out);
        Ok(())
    }
}

/// Integrates `x' = f(t, x, x(t − h₁(t)), …)` from `opts.t0` to `t_end`.
///
/// `rhs` is either a nonlinear system or a [`crate::stability::BoundMatrices`]
/// (the linear comparison system).
pub fn integrate(
    rhs: &dyn Rhs,
    h: &DelaySignal,
    phi: &HistoryFunction,
    t_end: f64,
    opts: &IntegrateOptions,
) -> Result<Trajectory> {
    let d = rhs.dim();
    let t0 = opts.t0;
    if !(opts.step > 0.0 && opts.step.is_finite()) {
        return Err(Error::param(
            "step",
            format!("must be positive, got {}", opts.step),
        ));
    }
    if !(t_end > t0) {
        return Err(Error::param(
            "t_end",
            format!("must exceed t0 = {t0}, got {t_end}"),
        ));
    }
    if phi.dim() != d {
        return Err(Error::Dimension {
            what: "history",
            expected: d,
            got: phi.dim(),
        });
    }
    if h.count() != rhs.delay_count() {
        return Err(Error::Dimension {
            what: "delay signal",
            expected: rhs.delay_count(),
            got: h.count(),
        });
    }
    h.validate_range(t0, t_end)?;

    let cap = match h.min_moving_lag(t0, t_end) {
        Some(lag) => opts.step.min(lag / 2.0),
        None => opts.step,
    };
    let bps = breakpoints(h, t0, t_end);

    let mut x0 = vec![0.0; d];
    phi.eval_into(0.0, &mut x0);
    let mut dl0 = vec![0.0; d];
    phi.deriv_into(0.0, &mut dl0);
    let traj = Trajectory {
        dim: d,
        t0,
        history: phi.clone(),
        times: vec![t0],
        states: x0.clone(),
        deriv_right: vec![0.0; d],
        deriv_left: dl0,
        breakpoints: std::iter::once(t0)
            .chain(bps.iter().copied().filter(|&b| b < t_end))
            .collect(),
    };
    let mut solver = Solver {
        rhs,
        h,
        traj,
        delays: vec![0.0; h.count()],
        delayed: vec![0.0; h.count() * d],
        history_start: t0 - phi.span(),
    };

    let zeros = vec![0.0; d];
    let mut k1 = vec![0.0; d];
    solver.slope(t0, &x0, Side::Right, &zeros, true, &mut k1)?;
    solver.traj.deriv_right.copy_from_slice(&k1);

    let (mut k2, mut k3, mut k4) = (vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    let mut xs = vec![0.0; d];
    let mut xn = x0;
    let mut left = vec![0.0; d];
    let mut seg_start = t0;
    for &seg_end in &bps {
        let n_sub = (((seg_end - seg_start) / cap) - 1e-9).ceil().max(1.0) as usize;
        let hseg = (seg_end - seg_start) / n_sub as f64;
        for j in 0..n_sub {
            let tn = *solver.traj.times.last().expect("nonempty");
            let t_next = if j + 1 == n_sub {
                seg_end
            } else {
                seg_start + (j + 1) as f64 * hseg
            };
            let hs = t_next - tn;
            let after_break = j == 0;
            let tm = tn + 0.5 * hs;

            for c in 0..d {
                xs[c] = xn[c] + 0.5 * hs * k1[c];
            }
            solver.slope(tm, &xs, Side::Right, &k1, after_break, &mut k2)?;
            for c in 0..d {
                xs[c] = xn[c] + 0.5 * hs * k2[c];
            }
            solver.slope(tm, &xs, Side::Right, &k1, after_break, &mut k3)?;
            for c in 0..d {
                xs[c] = xn[c] + hs * k3[c];
            }
            solver.slope(t_next, &xs, Side::Left, &k1, after_break, &mut k4)?;
            for c in 0..d {
                xn[c] += hs / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
            }
            if xn.iter().any(|v| !v.is_finite()) {
                return Err(Error::Divergence { t: t_next });
            }

            // Node derivatives: left limit closes this piece, right limit opens the next.
            // Push a provisional node so lookups up to t_next see the new state.
            let traj = &mut solver.traj;
            traj.times.push(t_next);
            traj.states.extend_from_slice(&xn);
            traj.deriv_left.extend_from_slice(&k4);
            traj.deriv_right.extend_from_slice(&k4);
            let at_break = j + 1 == n_sub;
            let xn_copy = xn.clone();
            solver.slope(t_next, &xn_copy, Side::Left, &k1, false, &mut left)?;
            let m = solver.traj.times.len() - 1;
            solver.traj.deriv_left[m * d..].copy_from_slice(&left);
            if at_break {
                solver.slope(t_next, &xn_copy, Side::Right, &k1, false, &mut k2)?;
                k1.copy_from_slice(&k2);
            } else {
                k1.copy_from_slice(&left);
            }
            solver.traj.deriv_right[m * d..].copy_from_slice(&k1);
        }
        seg_start = seg_end;
    }
    Ok(solver.traj)
}

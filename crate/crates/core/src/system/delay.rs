//! Time-varying delay signals `h(t) = (h₁(t), …, h_r(t))`.
//!
//! All discontinuous representations are right-continuous. Components with
//! unit slope between lattice points (`Mod`, `LiTau`) report their delayed
//! argument `t − hᵢ(t)` exactly as a lattice point, avoiding cancellation.

use crate::error::{Error, Result};

/// Relative tolerance for snapping a time onto a lattice point.
const LATTICE_SNAP: f64 = 1e-12;

/// Positive lags below this are not used to cap the step size.
pub const MIN_STEP_CAP_LAG: f64 = 1e-6;

/// One term `amplitude · sin(omega · t + phase)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sinusoid {
    pub amplitude: f64,
    pub omega: f64,
    pub phase: f64,
}

impl Sinusoid {
    pub fn sin(amplitude: f64, omega: f64) -> Self {
        Self {
            amplitude,
            omega,
            phase: 0.0,
        }
    }

    pub fn cos(amplitude: f64, omega: f64) -> Self {
        Self {
            amplitude,
            omega,
            phase: std::f64::consts::FRAC_PI_2,
        }
    }
}

/// Arithmetic progression `{start + spacing · n : n ∈ ℤ}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Lattice {
    pub start: f64,
    pub spacing: f64,
}

impl Lattice {
    /// Lattice points strictly inside `(a, b)`.
    pub fn points_between(&self, a: f64, b: f64) -> Vec<f64> {
        let mut out = Vec::new();
        if !(self.spacing > 0.0) || b <= a {
            return out;
        }
        let mut n = ((a - self.start) / self.spacing).floor() as i64;
        loop {
            let p = self.start + n as f64 * self.spacing;
            if p >= b {
                break;
            }
            if p > a {
                out.push(p);
            }
            n += 1;
        }
        out
    }
}

/// Which one-sided limit to take at a discontinuity.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

#[derive(Clone, Debug, PartialEq)]
pub enum DelayComponent {
    Constant(f64),
    /// `h(t) = t mod period`.
    Mod {
        period: f64,
    },
    /// `offset + Σ aₖ sin(ωₖ t + φₖ)`.
    SinusoidSum {
        offset: f64,
        terms: Vec<Sinusoid>,
    },
    /// Unit-slope piecewise-linear delay anchored at `anchors[k]·tau` on
    /// `[kτ, (k+1)τ)`. The anchor table repeats periodically past its end.
    LiTau {
        tau: f64,
        anchors: Vec<usize>,
    },
    /// Piecewise-linear interpolation of samples; constant beyond the ends.
    Sampled {
        times: Vec<f64>,
        values: Vec<f64>,
    },
}

/// Splits `t / spacing` into an integer cell index, snapping near-lattice times.
fn lattice_cell(t: f64, spacing: f64, side: Side) -> i64 {
    let q = t / spacing;
    let k = q.round();
    if (q - k).abs() <= LATTICE_SNAP * q.abs().max(1.0) {
        match side {
            Side::Right => k as i64,
            Side::Left => k as i64 - 1,
        }
    } else {
        q.floor() as i64
    }
}

impl DelayComponent {
    /// Value with the requested one-sided limit.
    pub fn value_at(&self, t: f64, side: Side) -> f64 {
        match self {
            DelayComponent::Constant(c) => *c,
            DelayComponent::Mod { period } => {
                let k = lattice_cell(t, *period, side);
                t - k as f64 * period
            }
            DelayComponent::SinusoidSum { offset, terms } => {
                offset
                    + terms
                        .iter()
                        .map(|s| s.amplitude * (s.omega * t + s.phase).sin())
                        .sum::<f64>()
            }
            DelayComponent::LiTau { tau, anchors } => {
                let k = lattice_cell(t, *tau, side);
                let n = anchors[k.rem_euclid(anchors.len() as i64) as usize];
                n as f64 * tau + (t - k as f64 * tau)
            }
            DelayComponent::Sampled { times, values } => interp_linear(times, values, t),
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        self.value_at(t, Side::Right)
    }

    /// `t − h(t)`, computed exactly for lattice-anchored components.
    pub fn delayed_argument(&self, t: f64, side: Side) -> f64 {
        match self {
            DelayComponent::Mod { period } => lattice_cell(t, *period, side) as f64 * period,
            DelayComponent::LiTau { tau, anchors } => {
                let k = lattice_cell(t, *tau, side);
                let n = anchors[k.rem_euclid(anchors.len() as i64) as usize] as i64;
                (k - n) as f64 * tau
            }
            _ => t - self.value_at(t, side),
        }
    }

    /// Discontinuity lattice implied by the representation.
    pub fn implied_lattice(&self) -> Option<Lattice> {
        match self {
            DelayComponent::Mod { period } => Some(Lattice {
                start: 0.0,
                spacing: *period,
            }),
            DelayComponent::LiTau { tau, .. } => Some(Lattice {
                start: 0.0,
                spacing: *tau,
            }),
            _ => None,
        }
    }

    /// Whether `t − h(t)` is constant between lattice points.
    pub fn pins_delayed_argument(&self) -> bool {
        matches!(
            self,
            DelayComponent::Mod { .. } | DelayComponent::LiTau { .. }
        )
    }

    fn validate_shape(&self) -> Result<()> {
        match self {
            DelayComponent::Constant(c) if !c.is_finite() => {
                Err(Error::Config("non-finite constant delay".into()))
            }
            DelayComponent::Mod { period } if !(*period > 0.0 && period.is_finite()) => Err(
                Error::Config(format!("mod delay period must be positive, got {period}")),
            ),
            DelayComponent::LiTau { tau, anchors } if !(*tau > 0.0) || anchors.is_empty() => Err(
                Error::Config("li_tau delay needs tau > 0 and a nonempty anchor table".into()),
            ),
            DelayComponent::Sampled { times, values } => {
                if times.len() != values.len() || times.is_empty() {
                    return Err(Error::Config(
                        "sampled delay needs equal-length nonempty times/values".into(),
                    ));
                }
                if times.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::Config(
                        "sampled delay times must be strictly increasing".into(),
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

pub(crate) fn interp_linear(times: &[f64], values: &[f64], t: f64) -> f64 {
    let n = times.len();
    if t <= times[0] {
        return values[0];
    }
    if t >= times[n - 1] {
        return values[n - 1];
    }
    let i = times.partition_point(|&x| x <= t) - 1;
    let w = (t - times[i]) / (times[i + 1] - times[i]);
    values[i] + w * (values[i + 1] - values[i])
}

/// Vector-valued delay signal with an upper bound `T`.
#[derive(Clone, Debug, PartialEq)]
pub struct DelaySignal {
    components: Vec<DelayComponent>,
    bound: f64,
    lattice: Option<Lattice>,
}

impl DelaySignal {
    pub fn new(components: Vec<DelayComponent>, bound: f64) -> Result<Self> {
        if !(bound > 0.0 && bound.is_finite()) {
            return Err(Error::param(
                "T",
                format!("delay bound must be positive, got {bound}"),
            ));
        }
        for c in &components {
            c.validate_shape()?;
        }
        Ok(Self {
            components,
            bound,
            lattice: None,
        })
    }

    pub fn constant(values: &[f64], bound: f64) -> Result<Self> {
        Self::new(
            values
                .iter()
                .map(|&v| DelayComponent::Constant(v))
                .collect(),
            bound,
        )
    }

    /// Scalar `h(t) = t mod period` with bound `period`.
    pub fn modulo(period: f64) -> Result<Self> {
        Self::new(vec![DelayComponent::Mod { period }], period)
    }

    /// Declares an additional discontinuity lattice.
    pub fn with_lattice(mut self, lattice: Lattice) -> Result<Self> {
        if !(lattice.spacing > 0.0) {
            return Err(Error::Config("lattice spacing must be positive".into()));
        }
        self.lattice = Some(lattice);
        Ok(self)
    }

    pub fn components(&self) -> &[DelayComponent] {
        &self.components
    }

    pub fn count(&self) -> usize {
        self.components.len()
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn declared_lattice(&self) -> Option<Lattice> {
        self.lattice
    }

    /// All discontinuity lattices (declared plus implied by components).
    pub fn lattices(&self) -> Vec<Lattice> {
        let mut out: Vec<Lattice> = self.lattice.into_iter().collect();
        for c in &self.components {
            if let Some(l) = c.implied_lattice() {
                if !out.contains(&l) {
                    out.push(l);
                }
            }
        }
        out
    }

    /// Discontinuity points strictly inside `(a, b)`, sorted and deduplicated.
    pub fn discontinuities(&self, a: f64, b: f64) -> Vec<f64> {
        let mut pts: Vec<f64> = self
            .lattices()
            .iter()
            .flat_map(|l| l.points_between(a, b))
            .collect();
        pts.sort_by(f64::total_cmp);
        pts.dedup_by(|x, y| (*x - *y).abs() <= LATTICE_SNAP * x.abs().max(1.0));
        pts
    }

    /// Unchecked evaluation into `out`.
    pub fn eval_into(&self, t: f64, side: Side, out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.components) {
            *o = c.value_at(t, side);
        }
    }

    /// `h(t)` with the range check `0 ≤ hᵢ(t) ≤ T`.
    pub fn evaluate(&self, t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.count()];
        self.eval_into(t, Side::Right, &mut out);
        for (component, &value) in out.iter().enumerate() {
            self.check_value(component, t, value)?;
        }
        Ok(out)
    }

    fn check_value(&self, component: usize, t: f64, value: f64) -> Result<()> {
        let slack = 1e-12 * self.bound;
        if !(value >= -slack && value <= self.bound + slack) {
            return Err(Error::DelayBound {
                component,
                t,
                value,
                bound: self.bound,
            });
        }
        Ok(())
    }

    /// Checks the range on `[t0, t1]` at resolution `1e-3·T` plus all breakpoints.
    ///
    /// `LiTau` components are checked at their anchors (the lag applied to the
    /// lattice point the delayed argument pins to).
    pub fn validate_range(&self, t0: f64, t1: f64) -> Result<()> {
        let h = 1e-3 * self.bound;
        let n = ((t1 - t0) / h).ceil().max(1.0) as usize;
        let mut times: Vec<f64> = (0..=n)
            .map(|i| t0 + (t1 - t0) * i as f64 / n as f64)
            .collect();
        for p in self.discontinuities(t0, t1) {
            times.push(p);
        }
        for &t in &times {
            for (i, c) in self.components.iter().enumerate() {
                let v = match c {
                    DelayComponent::LiTau { .. } => {
                        t - c.delayed_argument(t, Side::Right) - lattice_offset(c, t)
                    }
                    _ => c.value(t),
                };
                self.check_value(i, t, v)?;
                if let DelayComponent::Mod { .. } | DelayComponent::LiTau { .. } = c {
                    if t > t0 {
                        let left = c.value_at(t, Side::Left);
                        let left = match c {
                            DelayComponent::LiTau { tau, .. } => left - tau,
                            _ => left,
                        };
                        self.check_value(i, t, left)?;
                    }
                }
            }
        }
        Ok(())
    }

    /// Smallest positive lag on `[t0, t1]` among components whose delayed
    /// argument moves with `t`. Used to cap the integration step.
    pub fn min_moving_lag(&self, t0: f64, t1: f64) -> Option<f64> {
        let mut best: Option<f64> = None;
        let mut consider = |v: f64| {
            if v >= MIN_STEP_CAP_LAG {
                best = Some(best.map_or(v, |b: f64| b.min(v)));
            }
        };
        for c in &self.components {
            match c {
                DelayComponent::Constant(v) => consider(*v),
                DelayComponent::Mod { .. } | DelayComponent::LiTau { .. } => {}
                _ => {
                    let h = 1e-3 * self.bound;
                    let n = ((t1 - t0) / h).ceil().max(1.0) as usize;
                    for i in 0..=n {
                        consider(c.value(t0 + (t1 - t0) * i as f64 / n as f64));
                    }
                }
            }
        }
        best
    }
}

/// Offset of `t` from the left lattice point of its `LiTau` cell.
fn lattice_offset(c: &DelayComponent, t: f64) -> f64 {
    match c {
        DelayComponent::LiTau { tau, .. } => t - lattice_cell(t, *tau, Side::Right) as f64 * tau,
        _ => 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn constant_delay() {
        let h = DelaySignal::constant(&[3.0], 3.0).unwrap();
        assert_eq!(h.evaluate(17.0).unwrap(), vec![3.0]);
    }

    #[test]
    fn mod_delay() {
        let h = DelaySignal::modulo(2.0).unwrap();
        assert_eq!(h.evaluate(5.5).unwrap(), vec![1.5]);
        // right-continuous at lattice points
        assert_eq!(h.evaluate(4.0).unwrap(), vec![0.0]);
        assert_eq!(h.components()[0].value_at(4.0, Side::Left), 2.0);
        assert_eq!(h.components()[0].delayed_argument(5.5, Side::Right), 4.0);
    }

    #[test]
    fn mod_snaps_inexact_lattice_times() {
        let c = DelayComponent::Mod { period: 0.1 };
        let t = 0.1 * 3.0; // 0.30000000000000004
        assert!(c.value(t).abs() < 1e-12);
        assert!((c.value_at(t, Side::Left) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn sinusoid_sum_figure_delay() {
        let c = DelayComponent::SinusoidSum {
            offset: 3.0,
            terms: vec![
                Sinusoid::sin(1.0, 4.0),
                Sinusoid::sin(1.0, PI),
                Sinusoid::cos(1.0, 3f64.sqrt()),
            ],
        };
        let h = DelaySignal::new(vec![c], 6.0).unwrap();
        assert!((h.evaluate(0.0).unwrap()[0] - 4.0).abs() < 1e-15);
    }

    #[test]
    fn out_of_range_is_rejected() {
        let h = DelaySignal::constant(&[0.5, 2.5], 2.0).unwrap();
        match h.evaluate(1.0) {
            Err(Error::DelayBound {
                component, value, ..
            }) => {
                assert_eq!(component, 1);
                assert_eq!(value, 2.5);
            }
            other => panic!("unexpected {other:?}"),
        }
        let h = DelaySignal::new(vec![DelayComponent::Mod { period: 3.0 }], 2.0).unwrap();
        assert!(h.validate_range(0.0, 10.0).is_err());
        assert!(DelaySignal::modulo(2.0)
            .unwrap()
            .validate_range(0.0, 10.0)
            .is_ok());
    }

    #[test]
    fn li_tau_delayed_argument_is_lattice_point() {
        let c = DelayComponent::LiTau {
            tau: 0.1,
            anchors: vec![3, 1, 0],
        };
        assert!((c.value(0.05) - 0.35).abs() < 1e-15);
        assert_eq!(c.delayed_argument(0.05, Side::Right), -0.30000000000000004);
        assert!((c.delayed_argument(0.15, Side::Right) - 0.0).abs() < 1e-15);
        assert!((c.delayed_argument(0.25, Side::Right) - 0.2).abs() < 1e-15);
        // table repeats
        assert!((c.value(0.35) - 0.35).abs() < 1e-12);
    }

    #[test]
    fn sampled_interpolates() {
        let c = DelayComponent::Sampled {
            times: vec![0.0, 1.0, 2.0],
            values: vec![0.0, 1.0, 0.5],
        };
        assert!((c.value(0.5) - 0.5).abs() < 1e-15);
        assert!((c.value(1.5) - 0.75).abs() < 1e-15);
        assert_eq!(c.value(5.0), 0.5);
    }

    #[test]
    fn discontinuities_union() {
        let h = DelaySignal::new(
            vec![
                DelayComponent::Mod { period: 2.0 },
                DelayComponent::Mod { period: 3.0 },
            ],
            3.0,
        )
        .unwrap();
        assert_eq!(h.discontinuities(0.0, 7.0), vec![2.0, 3.0, 4.0, 6.0]);
    }

    #[test]
    fn moving_lag_ignores_pinned_components() {
        let h = DelaySignal::new(
            vec![
                DelayComponent::Mod { period: 2.0 },
                DelayComponent::Constant(0.4),
            ],
            2.0,
        )
        .unwrap();
        assert_eq!(h.min_moving_lag(0.0, 10.0), Some(0.4));
        assert_eq!(
            DelaySignal::modulo(2.0).unwrap().min_moving_lag(0.0, 10.0),
            None
        );
    }
}

//! Falsification-style check of the comparison principle: the linear system
//! built from the bound matrices dominates differences of nonlinear solutions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::integrate::{integrate, IntegrateOptions};
use crate::parallel::{map_range, Execution};
use crate::stability::BoundMatrices;
use crate::system::{
    catalog, CatalogParams, DelayComponent, DelaySignal, HistoryFunction, Rhs, Sinusoid, SystemSpec,
};

/// Default tolerance, sized for step `10⁻³` and horizons up to 50.
pub const DEFAULT_TOLERANCE: f64 = 1e-6;

/// Size of the integrator's own error at `step` (fourth order).
pub fn noise_floor(step: f64) -> f64 {
    step.powi(4).max(1e-15)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonReport {
    pub pass: bool,
    /// `max (|x₁ − x₂| − r)` over grid points and components; ≤ `tol` on pass.
    pub max_violation: f64,
    pub arg_t: f64,
    pub arg_component: usize,
    pub grid_points: usize,
}

impl ComparisonReport {
    pub fn to_json(&self) -> String {
        format!(
            "{{\"pass\":{},\"max_violation\":{},\"arg_t\":{},\"arg_component\":{}}}",
            self.pass,
            json_number(self.max_violation),
            json_number(self.arg_t),
            self.arg_component
        )
    }
}

fn json_number(x: f64) -> String {
    if x.is_finite() {
        crate::csv::format_g17(x)
    } else {
        "null".into()
    }
}

/// Integrates the system from `φ₁` and `φ₂` and the linear bound system from
/// `|φ₁ − φ₂|`, then checks `|x₁(t) − x₂(t)| ≤ r(t) + tol` componentwise on
/// the dense grid of `[t₀, t_end]`.
#[allow(clippy::too_many_arguments)]
pub fn verify_comparison(
    sys: &SystemSpec,
    b: &BoundMatrices,
    phi1: &HistoryFunction,
    phi2: &HistoryFunction,
    h: &DelaySignal,
    t_end: f64,
    tol: f64,
    opts: &IntegrateOptions,
) -> Result<ComparisonReport> {
    let d = sys.dim();
    if b.dim() != d {
        return Err(Error::Dimension {
            what: "bound matrices",
            expected: d,
            got: b.dim(),
        });
    }
    if b.delay_count() != h.count() {
        return Err(Error::Dimension {
            what: "delay count",
            expected: b.delay_count(),
            got: h.count(),
        });
    }
    let floor = noise_floor(opts.step);
    if !(tol >= 10.0 * floor) {
        return Err(Error::ToleranceTooSmall { tol, floor });
    }
    let diff = phi1.abs_difference(phi2)?;
    let x1 = integrate(sys, h, phi1, t_end, opts)?;
    let x2 = integrate(sys, h, phi2, t_end, opts)?;
    let r = integrate(b, h, &diff, t_end, opts)?;

    let grid = x1.dense_grid(opts.t0, t_end);
    let (mut a1, mut a2, mut ar) = (vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    let mut worst = (f64::NEG_INFINITY, opts.t0, 0);
    for &t in &grid {
        x1.eval_into(t, &mut a1)?;
        x2.eval_into(t, &mut a2)?;
        r.eval_into(t, &mut ar)?;
        for c in 0..d {
            let v = (a1[c] - a2[c]).abs() - ar[c];
            if v > worst.0 {
                worst = (v, t, c);
            }
        }
    }
    Ok(ComparisonReport {
        pass: worst.0 <= tol,
        max_violation: worst.0,
        arg_t: worst.1,
        arg_component: worst.2,
        grid_points: grid.len(),
    })
}

/// One randomized comparison scenario.
pub struct ComparisonTrial {
    pub system: SystemSpec,
    pub bounds: BoundMatrices,
    pub phi1: HistoryFunction,
    pub phi2: HistoryFunction,
    pub delay: DelaySignal,
    pub t_end: f64,
}

/// Random catalog system (`nis`/`is`), random delay bound, random delay
/// signal (constant, sawtooth or sinusoid) and random sinusoidal histories
/// with `‖φ‖ ≤ 2`.
pub fn random_trial(seed: u64, t_end: f64) -> Result<ComparisonTrial> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let name = if rng.gen_bool(0.5) {
        "nis-example"
    } else {
        "is-example"
    };
    let bound: f64 = rng.gen_range(0.5..3.0);
    let system = catalog(name, &CatalogParams::new().set("T", bound))?;
    let bounds = system
        .bounds
        .clone()
        .ok_or_else(|| Error::Config("catalog system without bounds".into()))?;
    let delay = match rng.gen_range(0..3) {
        0 => DelaySignal::constant(&[rng.gen_range(0.0..=bound)], bound)?,
        1 => DelaySignal::modulo(bound)?,
        _ => {
            let amp = rng.gen_range(0.0..0.5 * bound);
            let offset = rng.gen_range(amp..=bound - amp);
            let term = Sinusoid::sin(amp, rng.gen_range(0.5..5.0));
            DelaySignal::new(
                vec![DelayComponent::SinusoidSum {
                    offset,
                    terms: vec![term],
                }],
                bound,
            )?
        }
    };
    let history = |rng: &mut ChaCha8Rng| -> Result<HistoryFunction> {
        let terms = (0..2)
            .map(|_| {
                let offset = rng.gen_range(-0.5..0.5);
                let amp = rng.gen_range(0.0..0.5);
                [
                    offset,
                    amp,
                    rng.gen_range(0.0..4.0),
                    rng.gen_range(0.0..std::f64::consts::TAU),
                ]
            })
            .collect();
        HistoryFunction::sinusoid(terms, bound)
    };
    let phi1 = history(&mut rng)?;
    let phi2 = history(&mut rng)?;
    Ok(ComparisonTrial {
        system,
        bounds,
        phi1,
        phi2,
        delay,
        t_end,
    })
}

/// Runs `n` random trials with seeds `seed, seed+1, …`.
pub fn run_random_trials(
    n: usize,
    seed: u64,
    t_end: f64,
    tol: f64,
    opts: &IntegrateOptions,
    exec: Execution,
) -> Vec<Result<ComparisonReport>> {
    map_range(exec, n, |k| {
        let trial = random_trial(seed.wrapping_add(k as u64), t_end)?;
        verify_comparison(
            &trial.system,
            &trial.bounds,
            &trial.phi1,
            &trial.phi2,
            &trial.delay,
            trial.t_end,
            tol,
            opts,
        )
    })
}

use std::sync::OnceLock;

use delaygauge::integrate::{IntegrateOptions, Trajectory};
use delaygauge::linalg::Matrix;
use delaygauge::parallel::Execution;
use delaygauge::reservoir::{
    consistency_correlation, lorenz_input, random_constant_history, reservoir2_sweep,
    simulate_reservoir1, simulate_reservoir2, stationarity_drift, write_sweep_csv, InputSignal,
    LorenzComponent, LorenzParams, Reservoir2Config, SweepSettings,
};
use delaygauge::system::{DelaySignal, HistoryFunction, Side};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SEED: [f64; 3] = [1.0, 1.0, 1.0];

fn lorenz(t_end: f64) -> InputSignal {
    lorenz_input(
        t_end,
        1e-2,
        LorenzParams::default(),
        LorenzComponent::X,
        SEED,
    )
    .unwrap()
}

fn figure_config() -> Reservoir2Config {
    Reservoir2Config {
        beta: 1.0 / 3.0,
        delta: 0.125,
        phase: 1.0,
        gain: 7.0,
        delays: DelaySignal::constant(&[0.4, 0.7, 1.0], 1.0).unwrap(),
    }
}

/// Two responses of the reference reservoir to the same Lorenz drive.
fn responses() -> &'static (Trajectory, Trajectory) {
    static CELL: OnceLock<(Trajectory, Trajectory)> = OnceLock::new();
    CELL.get_or_init(|| {
        let j = lorenz(20.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p1 = random_constant_history(2, 1.0, &mut rng).unwrap();
        let p2 = random_constant_history(2, 1.0, &mut rng).unwrap();
        let opts = IntegrateOptions::new(1e-2);
        (
            simulate_reservoir2(&figure_config(), &j, &p1, 20.0, &opts).unwrap(),
            simulate_reservoir2(&figure_config(), &j, &p2, 20.0, &opts).unwrap(),
        )
    })
}

/// Rebuilds `x` node by node through the per-component map `v ↦ a·v + c`.
fn affine(x: &Trajectory, a: &[f64], c: &[f64]) -> Trajectory {
    let d = x.dim();
    let mut states = Vec::with_capacity(x.len() * d);
    let mut derivs = Vec::with_capacity(x.len() * d);
    let mut slope = vec![0.0; d];
    for (i, &t) in x.times().iter().enumerate() {
        x.deriv_into(t, Side::Right, &mut slope);
        for k in 0..d {
            states.push(a[k] * x.state(i)[k] + c[k]);
            derivs.push(a[k] * slope[k]);
        }
    }
    Trajectory::from_samples(x.times().to_vec(), states, derivs, d, x.span()).unwrap()
}

fn max_gap(x: &Trajectory, y: &Trajectory, t: f64) -> f64 {
    let (a, b) = (x.eval(t).unwrap(), y.eval(t).unwrap());
    a.iter()
        .zip(&b)
        .map(|(p, q)| (p - q).abs())
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn correlation_is_symmetric_and_affine_invariant(
        a in prop::collection::vec(0.1f64..10.0, 2),
        c in prop::collection::vec(-5.0f64..5.0, 2),
        b in prop::collection::vec(0.1f64..10.0, 2),
    ) {
        let (x, y) = responses();
        let (x, y) = (affine(x, &[1.0, 1.0], &[0.0, 0.0]), affine(y, &[1.0, 1.0], &[0.0, 0.0]));
        let base = consistency_correlation(&x, &y, 10.0, 5.0).unwrap();
        let swapped = consistency_correlation(&y, &x, 10.0, 5.0).unwrap();
        prop_assert!((base - swapped).abs() <= 1e-9);
        let moved = consistency_correlation(&affine(&x, &a, &c), &affine(&y, &b, &[0.0, 0.0]), 10.0, 5.0).unwrap();
        prop_assert!((base - moved).abs() <= 1e-9, "{base} vs {moved}");
    }
}

#[test]
fn self_correlation_is_one() {
    let (x, y) = responses();
    for traj in [x, y] {
        let g = consistency_correlation(traj, traj, 12.0, 5.0).unwrap();
        assert!((g - 1.0).abs() < 1e-10, "{g}");
    }
}

#[test]
fn lorenz_refinement_is_stable_before_divergence() {
    let run =
        |dt: f64| lorenz_input(5.0, dt, LorenzParams::default(), LorenzComponent::X, SEED).unwrap();
    let (a, b, c) = (run(1e-2), run(5e-3), run(2.5e-3));
    assert_eq!(a.value(0.0), 1.0);
    let change = |p: &InputSignal, q: &InputSignal| {
        (0..=500)
            .map(|k| (p.value(k as f64 * 1e-2) - q.value(k as f64 * 1e-2)).abs())
            .fold(0.0, f64::max)
    };
    let (first, second) = (change(&a, &b), change(&b, &c));
    // halving from 1e−2 moves samples by ~4e−4; from 5e−3 by ~2.4e−5
    assert!(second <= 1e-4, "{second}");
    assert!(first / second > 12.0, "{first} / {second}");
}

#[test]
fn lorenz_z_stays_positive() {
    let z = lorenz_input(
        30.0,
        1e-2,
        LorenzParams::default(),
        LorenzComponent::Z,
        SEED,
    )
    .unwrap();
    let min = (100..=3000)
        .map(|k| z.value(k as f64 * 1e-2))
        .fold(f64::INFINITY, f64::min);
    assert!(min > 0.0, "{min}");
}

#[test]
fn lorenz_input_is_deterministic() {
    let a = lorenz(10.0);
    let b = lorenz(10.0);
    assert!((0..a.times().len()).all(|k| a.sample(k, 0) == b.sample(k, 0)));
}

#[test]
fn reference_reservoir_is_bounded() {
    let (x, _) = responses();
    assert!(x.sup_norm_on(0.0, 20.0) < 10.0);
}

/// Differences decay at the slow linear rate `(−1 + √(1−4δ))/2 ≈ −0.146`, so
/// the 1e−2 gap ratio is reached between t = 30 and t = 40.
#[test]
fn reservoir2_responses_converge() {
    let j = lorenz(40.0);
    let opts = IntegrateOptions::new(1e-3);
    let slow = (-1.0 + (1.0f64 - 0.5).sqrt()) / 2.0;
    for seed in 0..4 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p1 = random_constant_history(2, 1.0, &mut rng).unwrap();
        let p2 = random_constant_history(2, 1.0, &mut rng).unwrap();
        let x = simulate_reservoir2(&figure_config(), &j, &p1, 40.0, &opts).unwrap();
        let y = simulate_reservoir2(&figure_config(), &j, &p2, 40.0, &opts).unwrap();
        let initial = max_gap(&x, &y, 0.0);
        let (g30, g40) = (max_gap(&x, &y, 30.0), max_gap(&x, &y, 40.0));
        assert!(g40 < 1e-2 * initial, "seed {seed}: {}", g40 / initial);
        let rate = (g40 / g30).ln() / 10.0;
        assert!(
            (rate - slow).abs() < 0.02,
            "seed {seed}: rate {rate} vs {slow}"
        );
    }
}

/// `x' = −g(x + tanh(ρAx + σWu))` by classical RK4.
fn undelayed_rk4(
    g: f64,
    rho: f64,
    a: &Matrix,
    w: &[f64],
    sigma: f64,
    u: impl Fn(f64) -> f64,
    x0: &[f64],
    t_end: f64,
    dt: f64,
) -> Vec<f64> {
    let f = |t: f64, x: &[f64]| -> Vec<f64> {
        let ax = a.mul_vec(x);
        (0..x.len())
            .map(|i| -g * (x[i] + (rho * ax[i] + sigma * w[i] * u(t)).tanh()))
            .collect()
    };
    let steps = (t_end / dt).round() as usize;
    let mut x = x0.to_vec();
    for k in 0..steps {
        let t = k as f64 * dt;
        let k1 = f(t, &x);
        let x2: Vec<f64> = x.iter().zip(&k1).map(|(v, k)| v + 0.5 * dt * k).collect();
        let k2 = f(t + 0.5 * dt, &x2);
        let x3: Vec<f64> = x.iter().zip(&k2).map(|(v, k)| v + 0.5 * dt * k).collect();
        let k3 = f(t + 0.5 * dt, &x3);
        let x4: Vec<f64> = x.iter().zip(&k3).map(|(v, k)| v + dt * k).collect();
        let k4 = f(t + dt, &x4);
        for i in 0..x.len() {
            x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    x
}

#[test]
fn zero_delay_reservoir1_matches_ode() {
    let a = Matrix::from_rows(&[[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]]).unwrap();
    let w = [1.0, -0.5, 0.25];
    let u = |t: f64| (1.3 * t).sin() + 0.5 * (0.4 * t).cos();
    let input = InputSignal::synthetic(u, 6.0, 1e-3).unwrap();
    let x0 = [0.3, -0.2, 0.1];
    let phi = HistoryFunction::constant(&x0, 1.0).unwrap();
    let traj = simulate_reservoir1(
        2.0,
        0.9,
        &a,
        &Matrix::from_vec(3, 1, w.to_vec()).unwrap(),
        0.7,
        &DelaySignal::constant(&[0.0], 1.0).unwrap(),
        &input,
        &phi,
        5.0,
        &IntegrateOptions::new(1e-3),
    )
    .unwrap();
    let oracle = undelayed_rk4(2.0, 0.9, &a, &w, 0.7, u, &x0, 5.0, 1e-4);
    let got = traj.eval(5.0).unwrap();
    for i in 0..3 {
        assert!(
            (got[i] - oracle[i]).abs() <= 1e-6,
            "component {i}: {} vs {}",
            got[i],
            oracle[i]
        );
    }
}

#[test]
fn reservoir1_rests_without_input() {
    let a = Matrix::from_rows(&[[0.5, 0.5], [0.5, 0.5]]).unwrap();
    let w = Matrix::from_vec(2, 1, vec![1.0, 2.0]).unwrap();
    let input = InputSignal::synthetic(|_| 0.0, 5.0, 0.1).unwrap();
    let phi = HistoryFunction::zeros(2, 1.0).unwrap();
    let h = DelaySignal::constant(&[0.5], 1.0).unwrap();
    let x = simulate_reservoir1(
        1.0,
        0.9,
        &a,
        &w,
        1.0,
        &h,
        &input,
        &phi,
        5.0,
        &IntegrateOptions::new(1e-2),
    )
    .unwrap();
    assert_eq!(x.final_state(), &[0.0, 0.0]);
    assert_eq!(x.sup_norm_on(0.0, 5.0), 0.0);
}

#[test]
fn reservoir1_responses_converge_below_unit_gain() {
    let a = Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
    let w = Matrix::from_vec(2, 1, vec![1.0, 0.5]).unwrap();
    let input = InputSignal::synthetic(|t| t.sin(), 31.0, 1e-2).unwrap();
    let h = DelaySignal::constant(&[1.0], 1.0).unwrap();
    let opts = IntegrateOptions::new(1e-2);
    let run = |x0: &[f64]| {
        let phi = HistoryFunction::constant(x0, 1.0).unwrap();
        simulate_reservoir1(1.0, 0.9, &a, &w, 1.0, &h, &input, &phi, 30.0, &opts).unwrap()
    };
    let (x, y) = (run(&[1.0, -1.0]), run(&[-0.5, 0.8]));
    let (g0, g10, g30) = (
        max_gap(&x, &y, 0.0),
        max_gap(&x, &y, 10.0),
        max_gap(&x, &y, 30.0),
    );
    assert!(g10 < g0 && g30 < g10 && g30 < 1e-2 * g0, "{g0} {g10} {g30}");
}

#[test]
fn stationarity_heuristic_on_reference_run() {
    let (x, _) = responses();
    let rep = stationarity_drift(x, 10.0, 5.0).unwrap();
    assert_eq!(rep.drift.len(), 2);
    assert!(rep.drift.iter().all(|d| d.is_finite()));
    assert_eq!(rep.stationary, rep.drift.iter().all(|&d| d < 0.01));
}

#[test]
fn sweep_reports_outside_region_without_verdict() {
    let settings = SweepSettings {
        phase: 1.0,
        gain: 7.0,
        delays: DelaySignal::constant(&[0.4, 0.7, 1.0], 1.0).unwrap(),
        t_end: 15.0,
        window: 10.0,
        t_skip: 5.0,
        seed: 11,
        step: 1e-2,
    };
    let j = lorenz(15.0);
    let points = [(0.45, 0.2), (1.0 / 3.0, 0.125)];
    let seq = reservoir2_sweep(&points, &settings, &j, Execution::Sequential);
    let par = reservoir2_sweep(&points, &settings, &j, Execution::Parallel);
    assert_eq!(seq, par);
    assert!(!seq[0].region_ok && seq[0].abscissa > 0.0);
    assert!(seq[1].region_ok && seq[1].abscissa < 0.0);
    assert!(seq
        .iter()
        .all(|r| r.gamma_sq.is_finite() && r.gamma_sq.abs() <= 1.0 + 1e-9));
    let mut buf = Vec::new();
    write_sweep_csv(&mut buf, &seq).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("beta,delta,abscissa,region_ok,gamma_sq"));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first[0].parse::<f64>().unwrap(), 0.45);
    assert_eq!(first[1].parse::<f64>().unwrap(), 0.2);
    assert_eq!(first[3], "false");
    assert_eq!(lines.count(), 1);
}

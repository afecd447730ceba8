mod common;

use delaygauge::integrate::{check_positivity, integrate, IntegrateOptions, Trajectory};
use delaygauge::linalg::Matrix;
use delaygauge::stability::BoundMatrices;
use delaygauge::system::catalog::{is_example, nis_example};
use delaygauge::system::{DelayComponent, DelaySignal, FnRhs, HistoryFunction, Rhs, Sinusoid};
use delaygauge::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::NegativeFeedbackOracle;

fn window_gap(a: &Trajectory, b: &Trajectory, t: f64) -> f64 {
    let (wa, wb) = (a.window(t).unwrap(), b.window(t).unwrap());
    wa.abs_difference(&wb).unwrap().sup_norm(2049)
}

#[test]
fn matches_method_of_steps_oracle() {
    let oracle = NegativeFeedbackOracle::new(6);
    let rhs = FnRhs::new(1, 1, |_t, _x, y, out| out[0] = -y[0]);
    let phi = HistoryFunction::constant(&[1.0], 1.0).unwrap();
    let traj = integrate(
        &rhs,
        &DelaySignal::constant(&[1.0], 1.0).unwrap(),
        &phi,
        6.0,
        &IntegrateOptions::new(1e-2),
    )
    .unwrap();
    for t in traj.dense_grid(0.0, 6.0) {
        assert!(
            (traj.eval(t).unwrap()[0] - oracle.eval(t)).abs() < 1e-9,
            "t = {t}"
        );
    }
}

#[test]
fn gronwall_bound_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    let opts = IntegrateOptions::new(1e-2);
    for k in 0..50 {
        let bound = rng.gen_range(0.5..2.0);
        let sys = if k % 2 == 0 {
            nis_example(bound)
        } else {
            is_example(bound)
        }
        .unwrap();
        let lip = sys.lipschitz.unwrap();
        let r = sys.delay_count() as f64;
        let h = DelaySignal::constant(&[rng.gen_range(0.0..=bound)], bound).unwrap();
        let mut draw = || {
            let v = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            HistoryFunction::sinusoid(vec![[v[0], 0.3, 2.0, 0.0], [v[1], 0.2, 1.0, 1.0]], bound)
                .unwrap()
        };
        let (p1, p2) = (draw(), draw());
        let initial = p1.abs_difference(&p2).unwrap().sup_norm(2049);
        let x1 = integrate(&sys, &h, &p1, 5.0, &opts).unwrap();
        let x2 = integrate(&sys, &h, &p2, 5.0, &opts).unwrap();
        for t in [1.0, 2.5, 5.0] {
            let gap = window_gap(&x1, &x2, t);
            assert!(
                gap <= (lip * (r + 1.0) * t).exp() * initial * (1.0 + 1e-9),
                "trial {k}, t = {t}"
            );
        }
    }
}

#[test]
fn response_is_continuous_in_the_delay() {
    let sys = is_example(2.0).unwrap();
    let phi =
        HistoryFunction::sinusoid(vec![[0.5, 0.5, 1.0, 0.0], [-0.2, 0.4, 2.0, 0.5]], 2.0).unwrap();
    let opts = IntegrateOptions::new(1e-3);
    let run = |c: f64| {
        integrate(
            &sys,
            &DelaySignal::constant(&[c], 2.0).unwrap(),
            &phi,
            6.0,
            &opts,
        )
        .unwrap()
    };
    let base = run(1.0);
    let gaps: Vec<f64> = [0.2, 0.1, 0.05, 0.025]
        .iter()
        .map(|&e| window_gap(&base, &run(1.0 + e), 6.0))
        .collect();
    for w in gaps.windows(2) {
        let ratio = w[0] / w[1];
        assert!((0.5..=8.0).contains(&ratio) && w[1] < w[0], "gaps {gaps:?}");
    }
}

#[test]
fn step_refinement_against_fine_reference() {
    let sys = is_example(6.0).unwrap();
    let h = DelaySignal::new(
        vec![DelayComponent::SinusoidSum {
            offset: 3.0,
            terms: vec![
                Sinusoid::sin(1.0, 4.0),
                Sinusoid::sin(1.0, std::f64::consts::PI),
                Sinusoid::cos(1.0, 3f64.sqrt()),
            ],
        }],
        6.0,
    )
    .unwrap();
    let phi = HistoryFunction::constant(&[1.0, -1.0], 6.0).unwrap();
    let reference = integrate(&sys, &h, &phi, 10.0, &IntegrateOptions::new(0.01 / 8.0)).unwrap();
    let err = |step: f64| {
        let traj = integrate(&sys, &h, &phi, 10.0, &IntegrateOptions::new(step)).unwrap();
        traj.dense_grid(0.0, 10.0)
            .into_iter()
            .map(|t| {
                let (a, b) = (traj.eval(t).unwrap(), reference.eval(t).unwrap());
                (a[0] - b[0]).abs().max((a[1] - b[1]).abs())
            })
            .fold(0.0, f64::max)
    };
    let (coarse, fine) = (err(0.02), err(0.01));
    assert!(coarse / fine >= 8.0, "coarse {coarse:e}, fine {fine:e}");
}

#[test]
fn periodic_delay_approaches_a_limit_cycle() {
    let sys = is_example(2.0).unwrap();
    let phi = HistoryFunction::constant(&[1.0, -0.5], 2.0).unwrap();
    let traj = integrate(
        &sys,
        &DelaySignal::modulo(2.0).unwrap(),
        &phi,
        36.0,
        &IntegrateOptions::new(1e-3),
    )
    .unwrap();
    let shift = |t: f64| {
        let (a, b) = (traj.window(t).unwrap(), traj.window(t + 2.0).unwrap());
        a.abs_difference(&b).unwrap().sup_norm(2049)
    };
    let (d1, d2, d3) = (shift(4.0), shift(16.0), shift(32.0));
    assert!(d2 < d1 && d3 < d2 && d3 < 1e-2 * d1, "{d1:e} {d2:e} {d3:e}");
}

#[test]
fn nis_example_grows_under_sawtooth_delay() {
    let phi = HistoryFunction::constant(&[0.01, -0.01], 2.0).unwrap();
    let traj = integrate(
        &nis_example(2.0).unwrap(),
        &DelaySignal::modulo(2.0).unwrap(),
        &phi,
        40.0,
        &IntegrateOptions::new(1e-3),
    )
    .unwrap();
    assert!(traj.sup_norm_on(0.0, 40.0) >= 10.0 * 0.02);
}

#[test]
fn errors_surface() {
    let sys = is_example(1.0).unwrap();
    let phi = HistoryFunction::constant(&[1.0, 0.0], 0.5).unwrap();
    let h = DelaySignal::constant(&[1.0], 1.0).unwrap();
    assert!(matches!(
        integrate(&sys, &h, &phi, 2.0, &IntegrateOptions::new(1e-2)),
        Err(Error::HistoryUnderrun { .. })
    ));
    let wrong_dim = HistoryFunction::constant(&[1.0], 1.0).unwrap();
    assert!(matches!(
        integrate(&sys, &h, &wrong_dim, 2.0, &IntegrateOptions::new(1e-2)),
        Err(Error::Dimension { .. })
    ));
    let blowup = FnRhs::new(1, 1, |_t, x, _y, out| out[0] = x[0] * x[0]);
    let one = HistoryFunction::constant(&[1.0], 1.0).unwrap();
    assert!(matches!(
        integrate(&blowup, &h, &one, 3.0, &IntegrateOptions::new(1e-2)),
        Err(Error::Divergence { .. })
    ));
}

#[test]
fn csv_is_deterministic() {
    let sys = is_example(2.0).unwrap();
    let phi = HistoryFunction::constant(&[1.0, -1.0], 2.0).unwrap();
    let render = || {
        let traj = integrate(
            &sys,
            &DelaySignal::modulo(2.0).unwrap(),
            &phi,
            4.0,
            &IntegrateOptions::new(1e-2),
        )
        .unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        buf
    };
    let (a, b) = (render(), render());
    assert_eq!(a, b);
    assert!(String::from_utf8(a).unwrap().starts_with("t,x1,x2\n"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn linear_flow_preserves_nonnegativity(
        m0 in prop::collection::vec(0.0f64..1.0, 4),
        m1 in prop::collection::vec(0.0f64..1.0, 4),
        c in 0.0f64..1.0,
        offsets in prop::collection::vec(0.0f64..1.0, 2),
    ) {
        let mut m0 = Matrix::from_vec(2, 2, m0).unwrap();
        m0[(0, 0)] *= -3.0;
        m0[(1, 1)] *= -3.0;
        let b = BoundMatrices::new(m0, vec![Matrix::from_vec(2, 2, m1).unwrap()]).unwrap();
        let phi = HistoryFunction::sinusoid(
            vec![[offsets[0], offsets[0], 3.0, 0.0], [offsets[1], 0.5 * offsets[1], 1.0, 2.0]],
            1.0,
        ).unwrap();
        let h = DelaySignal::constant(&[c], 1.0).unwrap();
        let rep = check_positivity(&b, &h, &phi, 5.0, &IntegrateOptions::new(1e-2)).unwrap();
        prop_assert!(rep.pass, "min {}", rep.min);
    }
}

use super::{integrate, IntegrateOptions, Trajectory};
use crate::error::{Error, Result};
use crate::stability::BoundMatrices;
use crate::system::{DelaySignal, HistoryFunction};

/// Positivity of the linear comparison flow from a nonnegative history.
#[derive(Clone, Debug, PartialEq)]
pub struct PositivityReport {
    pub min: f64,
    pub arg_t: f64,
    pub arg_component: usize,
    pub pass: bool,
}

/// Integrates the linear system and reports the smallest component value
/// on the dense grid over `[t₀, t_end]`; passes when it is `≥ −1e−9`.
pub fn check_positivity(
    b: &BoundMatrices,
    h: &DelaySignal,
    phi: &HistoryFunction,
    t_end: f64,
    opts: &IntegrateOptions,
) -> Result<PositivityReport> {
    let traj = integrate(b, h, phi, t_end, opts)?;
    let mut report = PositivityReport {
        min: f64::INFINITY,
        arg_t: opts.t0,
        arg_component: 0,
        pass: true,
    };
    let mut buf = vec![0.0; traj.dim()];
    for t in traj.dense_grid(opts.t0, t_end) {
        traj.eval_into_unchecked(t, &mut buf);
        for (c, &v) in buf.iter().enumerate() {
            if v < report.min {
                report.min = v;
                report.arg_t = t;
                report.arg_component = c;
            }
        }
    }
    report.pass = report.min >= -1e-9;
    Ok(report)
}

/// Least-squares fit `log‖x(t)‖₁ ≈ log Ĉ − β̂ t`.
#[derive(Clone, Debug, PartialEq)]
pub struct DecayFit {
    pub rate: f64,
    pub prefactor: f64,
    /// Root-mean-square residual of the log fit.
    pub residual: f64,
    pub samples: usize,
}

/// Fits an exponential rate over `[t_skip, t₁]` using node samples with
/// `‖x‖ > 1e−13`. Requires the span to cover at least `5T`.
pub fn decay_fit(traj: &Trajectory, t_skip: f64) -> Result<DecayFit> {
    let needed = 5.0 * traj.span();
    if traj.end() - t_skip < needed * (1.0 - 1e-12) {
        return Err(Error::param(
            "t_skip",
            format!(
                "fit window [{t_skip}, {}] is shorter than 5T = {needed}",
                traj.end()
            ),
        ));
    }
    let (mut n, mut st, mut sy, mut stt, mut sty) = (0usize, 0.0, 0.0, 0.0, 0.0);
    let mut pts = Vec::new();
    for (i, &t) in traj.times().iter().enumerate() {
        if t < t_skip {
            continue;
        }
        let norm: f64 = traj.state(i).iter().map(|v| v.abs()).sum();
        if norm > 1e-13 {
            let y = norm.ln();
            n += 1;
            st += t;
            sy += y;
            stt += t * t;
            sty += t * y;
            pts.push((t, y));
        }
    }
    if n < 3 {
        return Err(Error::TooFewSamples { got: n });
    }
    let nf = n as f64;
    let denom = nf * stt - st * st;
    if !(denom > 0.0) {
        return Err(Error::TooFewSamples { got: n });
    }
    let slope = (nf * sty - st * sy) / denom;
    let intercept = (sy - slope * st) / nf;
    let residual = (pts
        .iter()
        .map(|(t, y)| (y - intercept - slope * t).powi(2))
        .sum::<f64>()
        / nf)
        .sqrt();
    Ok(DecayFit {
        rate: -slope,
        prefactor: intercept.exp(),
        residual,
        samples: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;

    #[test]
    fn synthetic_exponential() {
        let times: Vec<f64> = (0..=2000).map(|k| k as f64 * 0.005).collect();
        let states: Vec<f64> = times.iter().flat_map(|&t| [(-2.0 * t).exp(); 2]).collect();
        let derivs: Vec<f64> = states.iter().map(|v| -2.0 * v).collect();
        let traj = Trajectory::from_samples(times, states, derivs, 2, 1.0).unwrap();
        let fit = decay_fit(&traj, 0.0).unwrap();
        assert!((fit.rate - 2.0).abs() < 1e-3);
        assert!((fit.prefactor - 2.0).abs() < 1e-6);
        assert!(decay_fit(&traj, 6.0).is_err());
    }

    #[test]
    fn zero_history_stays_zero() {
        let b = BoundMatrices::new(Matrix::diag(&[-1.0, -2.0]), vec![Matrix::identity(2)]).unwrap();
        let h = DelaySignal::constant(&[1.0], 1.0).unwrap();
        let phi = HistoryFunction::zeros(2, 1.0).unwrap();
        let rep = check_positivity(&b, &h, &phi, 5.0, &IntegrateOptions::new(1e-2)).unwrap();
        assert_eq!(rep.min, 0.0);
        assert!(rep.pass);
    }
}

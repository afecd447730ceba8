//! Subcommand implementations.

use std::fs::{self, File};
use std::io::{self, BufWriter, Read, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use delaygauge::comparison::{run_random_trials, verify_comparison};
use delaygauge::csv::{format_g17, write_table};
use delaygauge::discretize::{approximate_delay, build_companion};
use delaygauge::integrate::{integrate, IntegrateOptions, Trajectory};
use delaygauge::linalg::{spectral_radius, Matrix};
use delaygauge::parallel::Execution;
use delaygauge::reduction::{isoradial_reduce, isospectral_reduce, jsr_trend, write_trend_csv};
use delaygauge::reservoir::{
    consistency_correlation, lorenz_input, random_constant_history, reservoir2_sweep,
    simulate_reservoir2, write_sweep_csv, InputSignal, LorenzComponent, LorenzParams,
    Reservoir2Config, SweepSettings,
};
use delaygauge::stability::{
    estimate_bounds_by_sampling, reservoir2_analysis, stability_matrix, system_bounds,
    BoundMatrices, SamplingOptions,
};
use delaygauge::system::catalog::{is_example, nis_example, reservoir2_bounds};
use delaygauge::system::{DelayComponent, DelaySignal, HistoryFunction, Rhs, Sinusoid, SystemSpec};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{numbers, parse_delay, SystemConfig};
use crate::SystemArgs;

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn load(args: &SystemArgs) -> Result<(SystemConfig, SystemSpec)> {
    let cfg = match (&args.system, &args.config) {
        (Some(name), None) => SystemConfig::named(name),
        (None, Some(path)) => SystemConfig::load(path)?,
        _ => bail!("pass --system NAME or --config FILE"),
    };
    let extra = args
        .params
        .iter()
        .map(|kv| {
            let (k, v) = kv
                .split_once('=')
                .with_context(|| format!("--param `{kv}`: expected KEY=VALUE"))?;
            Ok((
                k.trim().to_string(),
                v.trim()
                    .parse::<f64>()
                    .with_context(|| format!("--param `{kv}`: bad number"))?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let sys = cfg.build(&extra)?;
    Ok((cfg, sys))
}

fn delay_for(cfg: &SystemConfig, flag: Option<&str>, bound: f64) -> Result<DelaySignal> {
    if let Some(spec) = flag {
        return parse_delay(spec, bound);
    }
    cfg.delay(bound)?
        .context("no delay given: pass --delay or add `delays` to the config")
}

fn history_for(
    cfg: Option<&SystemConfig>,
    flag: Option<&str>,
    dim: usize,
    span: f64,
) -> Result<HistoryFunction> {
    if let Some(values) = flag {
        let v = numbers(values, "history")?;
        if v.len() != dim {
            bail!(
                "history has {} values but the system has dimension {dim}",
                v.len()
            );
        }
        return Ok(HistoryFunction::constant(&v, span)?);
    }
    if let Some(h) = cfg.map(|c| c.history(span)).transpose()?.flatten() {
        return Ok(h);
    }
    Ok(HistoryFunction::constant(&vec![1.0; dim], span)?)
}

fn matrix_lines(m: &Matrix) -> String {
    (0..m.rows())
        .map(|i| {
            format!(
                "  {}",
                m.row(i)
                    .iter()
                    .map(|&v| format_g17(v))
                    .collect::<Vec<_>>()
                    .join(" ")
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn check(args: &SystemArgs, sample_density: Option<usize>, exec: Execution) -> Result<()> {
    let (_, sys) = load(args)?;
    let bounds = match sample_density {
        Some(density) => {
            let sample_box = sys
                .sample_box
                .clone()
                .context("this system has no sampling box")?;
            let opts = SamplingOptions {
                exec,
                ..SamplingOptions::new(density)
            };
            estimate_bounds_by_sampling(sys.rhs().as_ref(), &sample_box, &opts)?
        }
        None => system_bounds(&sys)?,
    };
    let verdict = stability_matrix(&bounds)?;
    println!("system {}", sys.name);
    println!(
        "stability matrix:\n{}",
        matrix_lines(&verdict.stability_matrix)
    );
    println!("{verdict}");
    Ok(())
}

pub fn simulate(
    args: &SystemArgs,
    delay: Option<&str>,
    history: Option<&str>,
    t_end: f64,
    step: Option<f64>,
    out: Option<&Path>,
) -> Result<()> {
    let (cfg, sys) = load(args)?;
    let t = sys.delay_bound;
    let h = delay_for(&cfg, delay, t)?;
    let phi = history_for(Some(&cfg), history, sys.dim(), t)?;
    let opts = step
        .map(IntegrateOptions::new)
        .unwrap_or_else(|| IntegrateOptions::for_bound(t));
    let traj = integrate(&sys, &h, &phi, t_end, &opts)?;
    let mut w = output(out)?;
    traj.write_csv(&mut w)?;
    w.flush()?;
    if let Some(p) = out {
        println!(
            "wrote {} rows to {}; ‖x({t_end})‖₁ = {}",
            traj.len(),
            p.display(),
            format_g17(traj.norm_at(t_end)?)
        );
    }
    Ok(())
}

pub fn compare(
    args: &SystemArgs,
    delay: Option<&str>,
    history1: &str,
    history2: &str,
    t_end: f64,
    tol: f64,
    step: f64,
) -> Result<()> {
    let (cfg, sys) = load(args)?;
    let t = sys.delay_bound;
    let h = delay_for(&cfg, delay, t)?;
    let b = system_bounds(&sys)?;
    let phi1 = history_for(None, Some(history1), sys.dim(), t)?;
    let phi2 = history_for(None, Some(history2), sys.dim(), t)?;
    let rep = verify_comparison(
        &sys,
        &b,
        &phi1,
        &phi2,
        &h,
        t_end,
        tol,
        &IntegrateOptions::new(step),
    )?;
    println!("{}", rep.to_json());
    Ok(())
}

pub fn compare_trials(
    n: usize,
    seed: u64,
    t_end: f64,
    tol: f64,
    step: f64,
    exec: Execution,
) -> Result<()> {
    let reports = run_random_trials(n, seed, t_end, tol, &IntegrateOptions::new(step), exec);
    let mut failures = 0;
    for (k, rep) in reports.into_iter().enumerate() {
        let rep = rep.with_context(|| format!("trial {k}"))?;
        failures += usize::from(!rep.pass);
        println!("{}", rep.to_json());
    }
    eprintln!("{n} trials, {failures} violations");
    Ok(())
}

pub fn discretize(
    args: &SystemArgs,
    delay: Option<&str>,
    tau: f64,
    t_prime: Option<f64>,
    horizon: Option<f64>,
    interval: usize,
    out_dir: Option<&Path>,
) -> Result<()> {
    let (cfg, sys) = load(args)?;
    let t = sys.delay_bound;
    let h = delay_for(&cfg, delay, t)?;
    let t_prime = t_prime.unwrap_or(t + tau);
    let approx = approximate_delay(&h, tau, t_prime, horizon.unwrap_or(t_prime))?;
    let li = &approx.delay;
    let b = system_bounds(&sys)?;
    let comp = build_companion(&b, li.tau, li.n_tau, li.indices(interval))?;
    let rho = spectral_radius(&comp.dense)?;
    println!(
        "tau {} n_tau {} intervals {}",
        format_g17(li.tau),
        li.n_tau,
        li.table.len()
    );
    println!(
        "error bound {} observed {}",
        format_g17(approx.error_bound),
        format_g17(approx.observed_error)
    );
    println!(
        "companion interval {interval} indices {:?}: size {}, spectral radius {}",
        li.indices(interval),
        comp.dense.rows(),
        format_g17(rho)
    );
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut header = vec!["k".to_string()];
        header.extend((1..=li.delay_count()).map(|i| format!("n{i}")));
        let rows = li.table.iter().enumerate().map(|(k, row)| {
            std::iter::once(k as f64)
                .chain(row.iter().map(|&n| n as f64))
                .collect::<Vec<_>>()
        });
        let mut w = output(Some(&dir.join("li_tau.csv")))?;
        write_table(&mut w, &header, rows)?;
        w.flush()?;
        let mut w = output(Some(&dir.join("companion.csv")))?;
        comp.write_csv(&mut w)?;
        w.flush()?;
    }
    Ok(())
}

fn parse_matrix(text: &str) -> Result<Matrix> {
    let rows = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .enumerate()
        .map(|(i, l)| {
            l.split_whitespace()
                .map(|v| {
                    v.parse::<f64>()
                        .with_context(|| format!("matrix row {}: `{v}` is not a number", i + 1))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    if rows.is_empty() {
        bail!("empty matrix input");
    }
    Matrix::from_rows(&rows).context("matrix rows must have equal length")
}

pub fn reduce(path: Option<&Path>, subset: &str, lambda: Option<&str>) -> Result<()> {
    let text = match path {
        Some(p) => fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        None => {
            let mut s = String::new();
            io::stdin().read_to_string(&mut s)?;
            s
        }
    };
    let b = parse_matrix(&text)?;
    let s = subset
        .split(',')
        .map(|v| match v.trim().parse::<usize>() {
            Ok(i) if i >= 1 => Ok(i - 1),
            _ => bail!("--subset: `{v}` is not a 1-based index"),
        })
        .collect::<Result<Vec<_>>>()?;
    match lambda {
        Some(l) => {
            let v = numbers(l, "lambda")?;
            let z = match v[..] {
                [re] => Complex64::new(re, 0.0),
                [re, im] => Complex64::new(re, im),
                _ => bail!("--lambda: expected `re` or `re,im`"),
            };
            let r = isospectral_reduce(&b, &s, z)?;
            for i in 0..r.rows() {
                let row: Vec<String> = r
                    .row(i)
                    .iter()
                    .map(|c| format!("{}{:+}i", format_g17(c.re), c.im))
                    .collect();
                println!("{}", row.join(" "));
            }
        }
        None => {
            let rep = isoradial_reduce(&b, &s)?;
            println!(
                "{}",
                matrix_lines(&rep.reduced)
                    .replace("\n  ", "\n")
                    .trim_start()
            );
            println!(
                "radius full {} reduced {} preserved {}",
                format_g17(rep.radius_full),
                format_g17(rep.radius_reduced),
                rep.preserved
            );
        }
    }
    Ok(())
}

pub fn jsr(
    args: &SystemArgs,
    t0: f64,
    n: &str,
    delay_bound: Option<f64>,
    cap: u64,
    out: Option<&Path>,
    exec: Execution,
) -> Result<()> {
    let (_, sys) = load(args)?;
    let b = system_bounds(&sys)?;
    let n_list = n
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<usize>()
                .with_context(|| format!("--n: `{v}` is not a positive integer"))
        })
        .collect::<Result<Vec<_>>>()?;
    let rows = jsr_trend(
        &b,
        t0,
        &n_list,
        delay_bound.unwrap_or(sys.delay_bound),
        cap,
        exec,
    )?;
    let mut w = output(out)?;
    write_trend_csv(&mut w, &rows)?;
    w.flush()?;
    if rows.iter().any(|r| !r.exact) {
        eprintln!(
            "note: some rows hit the enumeration cap; their sup_rho is a sampled lower estimate"
        );
    }
    Ok(())
}

pub struct SweepArgs {
    pub beta: String,
    pub delta: String,
    pub phase: f64,
    pub gain: f64,
    pub delays: String,
    pub window: f64,
    pub t_skip: f64,
    pub seed: u64,
    pub step: f64,
}

fn lorenz_drive(t_end: f64) -> Result<InputSignal> {
    Ok(lorenz_input(
        t_end,
        1e-3,
        LorenzParams::default(),
        LorenzComponent::X,
        [1.0, 1.0, 1.0],
    )?)
}

pub fn reservoir(
    args: &SweepArgs,
    input: Option<&Path>,
    out: Option<&Path>,
    exec: Execution,
) -> Result<()> {
    let t_end = args.t_skip + args.window;
    let delays = numbers(&args.delays, "delays")?;
    let bound = delays
        .iter()
        .copied()
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let settings = SweepSettings {
        phase: args.phase,
        gain: args.gain,
        delays: DelaySignal::constant(&delays, bound)?,
        t_end,
        window: args.window,
        t_skip: args.t_skip,
        seed: args.seed,
        step: args.step,
    };
    let drive = match input {
        Some(p) => InputSignal::from_csv(
            &fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        )?,
        None => lorenz_drive(t_end)?,
    };
    let points: Vec<(f64, f64)> = numbers(&args.beta, "beta")?
        .into_iter()
        .flat_map(|b| {
            numbers(&args.delta, "delta")
                .unwrap_or_default()
                .into_iter()
                .map(move |d| (b, d))
        })
        .collect();
    if points.is_empty() {
        bail!("empty (beta, delta) grid");
    }
    let rows = reservoir2_sweep(&points, &settings, &drive, exec);
    let mut w = output(out)?;
    write_sweep_csv(&mut w, &rows)?;
    w.flush()?;
    Ok(())
}

fn write_trajectory(dir: &Path, name: &str, traj: &Trajectory) -> Result<()> {
    let mut w = output(Some(&dir.join(name)))?;
    traj.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

fn sinsum_delay() -> Result<DelaySignal> {
    Ok(DelaySignal::new(
        vec![DelayComponent::SinusoidSum {
            offset: 3.0,
            terms: vec![
                Sinusoid::sin(1.0, 4.0),
                Sinusoid::sin(1.0, std::f64::consts::PI),
                Sinusoid::cos(1.0, 3f64.sqrt()),
            ],
        }],
        6.0,
    )?)
}

/// Reference data: catalog verdicts, the two example systems under several
/// delays, the reservoir-2 responses to a Lorenz drive, and the JSR trend.
pub fn repro(dir: &Path, quick: bool, exec: Execution) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let opts = IntegrateOptions::new(1e-3);

    let mut summary = String::new();
    for sys in [nis_example(3.0)?, is_example(3.0)?] {
        let v = stability_matrix(&system_bounds(&sys)?)?;
        summary.push_str(&format!("{} {v}\n", sys.name));
    }

    let small = HistoryFunction::constant(&[0.01, -0.01], 2.0)?;
    write_trajectory(
        dir,
        "example4_mod2.csv",
        &integrate(
            &nis_example(2.0)?,
            &DelaySignal::modulo(2.0)?,
            &small,
            40.0,
            &opts,
        )?,
    )?;
    let phi = HistoryFunction::constant(&[0.5, -0.3], 1.0)?;
    let h1 = DelaySignal::constant(&[1.0], 1.0)?;
    write_trajectory(
        dir,
        "example4_const1.csv",
        &integrate(&nis_example(1.0)?, &h1, &phi, 40.0, &opts)?,
    )?;
    for (name, h, bound) in [
        (
            "example5_const3.csv",
            DelaySignal::constant(&[3.0], 3.0)?,
            3.0,
        ),
        ("example5_mod2.csv", DelaySignal::modulo(2.0)?, 2.0),
        ("example5_sinsum.csv", sinsum_delay()?, 6.0),
    ] {
        let phi = HistoryFunction::constant(&[1.0, -1.0], bound)?;
        write_trajectory(
            dir,
            name,
            &integrate(&is_example(bound)?, &h, &phi, 40.0, &opts)?,
        )?;
    }

    let (beta, delta, skip, window) = (1.0 / 3.0, 0.125, 5.0, 30.0);
    let t_end = skip + window;
    let drive = lorenz_drive(t_end)?;
    let mut w = output(Some(&dir.join("figure3_input.csv")))?;
    write_table(
        &mut w,
        &["t".to_string(), "u".to_string()],
        drive
            .times()
            .iter()
            .enumerate()
            .map(|(k, &t)| vec![t, drive.sample(k, 0)]),
    )?;
    w.flush()?;
    let cfg = Reservoir2Config {
        beta,
        delta,
        phase: 1.0,
        gain: 7.0,
        delays: DelaySignal::constant(&[0.4, 0.7, 1.0], 1.0)?,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let p1 = random_constant_history(2, 1.0, &mut rng)?;
    let p2 = random_constant_history(2, 1.0, &mut rng)?;
    let x = simulate_reservoir2(&cfg, &drive, &p1, t_end, &opts)?;
    let y = simulate_reservoir2(&cfg, &drive, &p2, t_end, &opts)?;
    let header: Vec<String> = ["t", "x1", "x2", "y1", "y2"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows = x
        .times()
        .iter()
        .enumerate()
        .map(|(i, &t)| Ok([vec![t], x.state(i).to_vec(), y.eval(t)?].concat()))
        .collect::<Result<Vec<_>>>()?;
    let mut w = output(Some(&dir.join("figure3_responses.csv")))?;
    write_table(&mut w, &header, rows)?;
    w.flush()?;
    let analysis = reservoir2_analysis(beta, delta)?;
    let computed = stability_matrix(&reservoir2_bounds(beta, delta, 3)?)?.abscissa;
    summary.push_str(&format!(
        "reservoir2 beta {} delta {} abscissa {} (closed form {}) region_ok {} gamma_sq {}\n",
        format_g17(beta),
        format_g17(delta),
        format_g17(computed),
        format_g17(analysis.abscissa),
        analysis.region_ok,
        format_g17(consistency_correlation(&x, &y, window, skip)?)
    ));

    let bounds: BoundMatrices = system_bounds(&is_example(3.0)?)?;
    let n_list: &[usize] = if quick { &[4, 8] } else { &[4, 8, 16] };
    let trend = jsr_trend(
        &bounds,
        1.0,
        n_list,
        3.0,
        delaygauge::reduction::DEFAULT_RIC_CAP,
        exec,
    )?;
    let mut w = output(Some(&dir.join("jsr_trend.csv")))?;
    write_trend_csv(&mut w, &trend)?;
    w.flush()?;

    fs::write(dir.join("summary.txt"), &summary)?;
    print!("{summary}");
    println!("wrote reference data to {}", dir.display());
    Ok(())
}

//! `delaygauge` command-line front end.
//!
//! Exit codes: 0 success, 2 invalid input or configuration, 3 numerical failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use delaygauge::parallel::Execution;

#[derive(Parser)]
#[command(
    name = "delaygauge",
    version,
    about = "Intrinsic-stability analysis for delay differential equations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Which system to analyse: a catalog name or a JSON config file.
#[derive(Args, Clone, Debug)]
pub struct SystemArgs {
    /// Catalog system (nis-example, is-example, reservoir1, reservoir2).
    #[arg(long, conflicts_with = "config")]
    pub system: Option<String>,
    /// System JSON config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Catalog parameter override, e.g. `--param T=2`.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    pub params: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Stability matrix and intrinsic-stability verdict.
    Check {
        #[command(flatten)]
        sys: SystemArgs,
        /// Estimate the bounds by grid sampling with this many points per axis.
        #[arg(long)]
        sample_density: Option<usize>,
    },
    /// Integrate the system and write the trajectory CSV.
    Simulate {
        #[command(flatten)]
        sys: SystemArgs,
        /// Delay signal, e.g. `const:1`, `mod:2`, `sinsum:3,1@4,1@3.14`.
        #[arg(long)]
        delay: Option<String>,
        /// Constant history values, comma separated (default all ones).
        #[arg(long)]
        history: Option<String>,
        #[arg(long)]
        t_end: f64,
        /// Integration step (default 1e-3·min(T, 1)).
        #[arg(long)]
        step: Option<f64>,
        /// Output CSV (default stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Comparison-principle check for two histories, or a batch of random trials.
    Compare {
        #[command(flatten)]
        sys: SystemArgs,
        #[arg(long)]
        delay: Option<String>,
        #[arg(long)]
        history1: Option<String>,
        #[arg(long)]
        history2: Option<String>,
        #[arg(long, default_value_t = 20.0)]
        t_end: f64,
        #[arg(long, default_value_t = delaygauge::comparison::DEFAULT_TOLERANCE)]
        tol: f64,
        #[arg(long, default_value_t = 1e-3)]
        step: f64,
        /// Run this many random catalog trials instead of a single pair.
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// LI_τ approximation of a delay and its block-companion matrix.
    Discretize {
        #[command(flatten)]
        sys: SystemArgs,
        #[arg(long)]
        delay: Option<String>,
        #[arg(long)]
        tau: f64,
        /// Lattice reach T′ (default T + τ).
        #[arg(long)]
        t_prime: Option<f64>,
        /// Length covered by the table (default T′).
        #[arg(long)]
        horizon: Option<f64>,
        /// Interval whose companion matrix is exported.
        #[arg(long, default_value_t = 0)]
        interval: usize,
        /// Directory for `li_tau.csv` and `companion.csv` (default: print only).
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Isospectral (with --lambda) or isoradial reduction of a matrix.
    Reduce {
        /// Matrix file with whitespace-separated rows (default stdin).
        #[arg(long)]
        matrix: Option<PathBuf>,
        /// Kept indices, 1-based and comma separated.
        #[arg(long)]
        subset: String,
        /// Evaluation point `re` or `re,im`; omit for the isoradial reduction.
        #[arg(long, allow_hyphen_values = true)]
        lambda: Option<String>,
    },
    /// Row-independent-closure spectral-radius trend over refinements.
    Jsr {
        #[command(flatten)]
        sys: SystemArgs,
        #[arg(long, default_value_t = 1.0)]
        t0: f64,
        /// Refinements n, comma separated.
        #[arg(long, default_value = "4,8,16")]
        n: String,
        /// Delay bound covered by the lattice (default: the system's T).
        #[arg(long)]
        delay_bound: Option<f64>,
        #[arg(long, default_value_t = delaygauge::reduction::DEFAULT_RIC_CAP)]
        cap: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reservoir-2 consistency sweep over a (β, δ) grid.
    Reservoir {
        /// β values, comma separated.
        #[arg(long, default_value = "0.3333333333333333")]
        beta: String,
        /// δ values, comma separated.
        #[arg(long, default_value = "0.125")]
        delta: String,
        #[arg(long, default_value_t = 1.0)]
        phase: f64,
        #[arg(long, default_value_t = 7.0)]
        gain: f64,
        /// Constant delays, comma separated.
        #[arg(long, default_value = "0.4,0.7,1.0")]
        delays: String,
        #[arg(long, default_value_t = 30.0)]
        window: f64,
        #[arg(long, default_value_t = delaygauge::reservoir::DEFAULT_T_SKIP)]
        t_skip: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-3)]
        step: f64,
        /// Input CSV `t,u`; default is the Lorenz x-coordinate.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Regenerates the reference data files into a directory.
    Repro {
        #[arg(long)]
        out_dir: PathBuf,
        /// Skip the slower JSR trend at n = 16.
        #[arg(long)]
        quick: bool,
    },
}

/// Worker setup from `DELAYGAUGE_THREADS`; one thread means sequential execution.
fn execution() -> Result<Execution> {
    let Ok(raw) = std::env::var("DELAYGAUGE_THREADS") else {
        return Ok(Execution::Parallel);
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .with_context(|| format!("DELAYGAUGE_THREADS must be a positive integer, got `{raw}`"))?;
    if threads == 1 {
        return Ok(Execution::Sequential);
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .context("configuring the worker pool")?;
    Ok(Execution::Parallel)
}

fn run(cli: Cli) -> Result<()> {
    let exec = execution()?;
    match cli.command {
        Command::Check {
            sys,
            sample_density,
        } => commands::check(&sys, sample_density, exec),
        Command::Simulate {
            sys,
            delay,
            history,
            t_end,
            step,
            out,
        } => commands::simulate(
            &sys,
            delay.as_deref(),
            history.as_deref(),
            t_end,
            step,
            out.as_deref(),
        ),
        Command::Compare {
            sys,
            delay,
            history1,
            history2,
            t_end,
            tol,
            step,
            trials,
            seed,
        } => match trials {
            Some(n) => commands::compare_trials(n, seed, t_end, tol, step, exec),
            None => {
                let (Some(h1), Some(h2)) = (history1, history2) else {
                    bail!("compare needs --history1 and --history2 (or --trials)");
                };
                commands::compare(&sys, delay.as_deref(), &h1, &h2, t_end, tol, step)
            }
        },
        Command::Discretize {
            sys,
            delay,
            tau,
            t_prime,
            horizon,
            interval,
            out_dir,
        } => commands::discretize(
            &sys,
            delay.as_deref(),
            tau,
            t_prime,
            horizon,
            interval,
            out_dir.as_deref(),
        ),
        Command::Reduce {
            matrix,
            subset,
            lambda,
        } => commands::reduce(matrix.as_deref(), &subset, lambda.as_deref()),
        Command::Jsr {
            sys,
            t0,
            n,
            delay_bound,
            cap,
            out,
        } => commands::jsr(&sys, t0, &n, delay_bound, cap, out.as_deref(), exec),
        Command::Reservoir {
            beta,
            delta,
            phase,
            gain,
            delays,
            window,
            t_skip,
            seed,
            step,
            input,
            out,
        } => {
            let sweep = commands::SweepArgs {
                beta,
                delta,
                phase,
                gain,
                delays,
                window,
                t_skip,
                seed,
                step,
            };
            commands::reservoir(&sweep, input.as_deref(), out.as_deref(), exec)
        }
        Command::Repro { out_dir, quick } => commands::repro(&out_dir, quick, exec),
    }
}

/// 3 when any cause is a numerical failure of the library, 2 otherwise.
fn exit_code(err: &anyhow::Error) -> u8 {
    let numerical = err
        .chain()
        .filter_map(|e| e.downcast_ref::<delaygauge::Error>())
        .any(delaygauge::Error::is_numerical);
    if numerical {
        3
    } else {
        2
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

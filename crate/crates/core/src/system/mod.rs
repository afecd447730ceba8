//! DDE instances `x'(t) = f(t, x(t), x(t − h₁(t)), …, x(t − h_r(t)))`.

pub mod catalog;
mod delay;
mod history;

use std::fmt;
use std::sync::Arc;

pub use catalog::{catalog, CatalogParams, SampleBox};
pub use delay::{DelayComponent, DelaySignal, Lattice, Side, Sinusoid, MIN_STEP_CAP_LAG};
pub(crate) use history::hermite_piece;
pub use history::{HistoryFunction, DEFAULT_HISTORY_GRID};

use crate::error::{Error, Result};
use crate::stability::BoundMatrices;

/// Right-hand side evaluator. `delayed` holds the `r` delayed states
/// back to back (`delayed[i*d .. (i+1)*d]` is `x(t − hᵢ(t))`).
pub trait Rhs: Send + Sync {
    fn dim(&self) -> usize;
    fn delay_count(&self) -> usize;
    fn eval(&self, t: f64, x: &[f64], delayed: &[f64], out: &mut [f64]);
}

type RhsClosure = dyn Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync;

/// Closure-backed [`Rhs`].
#[derive(Clone)]
pub struct FnRhs {
    dim: usize,
    delays: usize,
    f: Arc<RhsClosure>,
}

impl FnRhs {
    pub fn new(
        dim: usize,
        delays: usize,
        f: impl Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            delays,
            f: Arc::new(f),
        }
    }
}

impl Rhs for FnRhs {
    fn dim(&self) -> usize {
        self.dim
    }
    fn delay_count(&self) -> usize {
        self.delays
    }
    fn eval(&self, t: f64, x: &[f64], delayed: &[f64], out: &mut [f64]) {
        (self.f)(t, x, delayed, out)
    }
}

/// Whether `f` is declared real- or complex-valued.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Field {
    #[default]
    Real,
    Complex,
}

/// A DDE instance: dimension, delay count, delay bound and right-hand side.
#[derive(Clone)]
pub struct SystemSpec {
    pub name: String,
    pub delay_bound: f64,
    pub field: Field,
    /// Lipschitz constant `L₀` of `f` in the 1-norm, when known.
    pub lipschitz: Option<f64>,
    /// Analytic bound matrices, when known.
    pub bounds: Option<BoundMatrices>,
    /// Region on which sampled bound estimates are meaningful.
    pub sample_box: Option<SampleBox>,
    rhs: Arc<dyn Rhs>,
}

impl fmt::Debug for SystemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemSpec")
            .field("name", &self.name)
            .field("dim", &self.dim())
            .field("delay_count", &self.delay_count())
            .field("delay_bound", &self.delay_bound)
            .field("field", &self.field)
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

impl SystemSpec {
    pub fn new(name: impl Into<String>, rhs: Arc<dyn Rhs>, delay_bound: f64) -> Result<Self> {
        if !(delay_bound > 0.0 && delay_bound.is_finite()) {
            return Err(Error::param(
                "T",
                format!("delay bound must be positive, got {delay_bound}"),
            ));
        }
        if rhs.dim() == 0 {
            return Err(Error::Config("system dimension must be positive".into()));
        }
        Ok(Self {
            name: name.into(),
            delay_bound,
            field: Field::Real,
            lipschitz: None,
            bounds: None,
            sample_box: None,
            rhs,
        })
    }

    pub fn with_bounds(mut self, bounds: BoundMatrices) -> Result<Self> {
        bounds.check_shape(self.dim(), self.delay_count())?;
        self.bounds = Some(bounds);
        Ok(self)
    }

    pub fn with_lipschitz(mut self, l0: f64) -> Self {
        self.lipschitz = Some(l0);
        self
    }

    pub fn with_field(mut self, field: Field) -> Self {
        self.field = field;
        self
    }

    pub fn with_sample_box(mut self, b: SampleBox) -> Self {
        self.sample_box = Some(b);
        self
    }

    pub fn rhs(&self) -> &Arc<dyn Rhs> {
        &self.rhs
    }

    /// Checks that the evaluator returns finite output of the declared size
    /// at the origin.
    pub fn validate(&self) -> Result<()> {
        let (d, r) = (self.dim(), self.delay_count());
        let x = vec![0.0; d];
        let y = vec![0.0; d * r];
        let mut out = vec![f64::NAN; d];
        self.rhs.eval(0.0, &x, &y, &mut out);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config(format!(
                "{}: evaluator returned non-finite output at the origin",
                self.name
            )));
        }
        Ok(())
    }
}

impl Rhs for SystemSpec {
    fn dim(&self) -> usize {
        self.rhs.dim()
    }
    fn delay_count(&self) -> usize {
        self.rhs.delay_count()
    }
    fn eval(&self, t: f64, x: &[f64], delayed: &[f64], out: &mut [f64]) {
        self.rhs.eval(t, x, delayed, out)
    }
}

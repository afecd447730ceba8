use crate::linalg::LinalgError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Linalg(#[from] LinalgError),

    #[error("unknown catalog system `{0}`")]
    UnknownSystem(String),

    #[error("parameter `{name}` out of range: {message}")]
    Parameter { name: String, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{what}: expected dimension {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("delay component {component} = {value} at t = {t} lies outside [0, {bound}]")]
    DelayBound {
        component: usize,
        t: f64,
        value: f64,
        bound: f64,
    },

    #[error("delayed argument of component {component} at t = {t} is {argument}, before the history start {history_start}")]
    HistoryUnderrun {
        component: usize,
        t: f64,
        argument: f64,
        history_start: f64,
    },

    #[error("solution diverged (non-finite state) at t = {t}")]
    Divergence { t: f64 },

    #[error("time {t} outside available span [{start}, {end}]")]
    OutOfSpan { t: f64, start: f64, end: f64 },

    #[error("x* is not a fixed point: residual {residual:e} at t = {t}")]
    NotFixedPoint { residual: f64, t: f64 },

    #[error("non-finite derivative sample at {point:?}")]
    NonFiniteDerivative { point: Vec<f64> },

    #[error("delta = {delta} >= 1/4 makes sqrt(1 - 4 delta) complex")]
    ComplexDelta { delta: f64 },

    #[error("reservoir matrix must have spectral radius 1 (got {radius})")]
    Rescaling { radius: f64 },

    #[error("input matrix W is not injective (rank-deficient)")]
    RankDeficient,

    #[error("too few usable samples: {got}")]
    TooFewSamples { got: usize },

    #[error("tau = {tau} does not divide lattice spacing {spacing}")]
    Alignment { tau: f64, spacing: f64 },

    #[error("lambda = {lambda} is a pole of the reduction (eigenvalue of the complement block)")]
    Pole { lambda: String },

    #[error("isoradial reduction does not exist: rho(B) = {radius} is an eigenvalue of the complement block")]
    NoIsoradialReduction { radius: f64 },

    #[error("component {component} has near-zero standard deviation {std:e}")]
    DegenerateSignal { component: usize, std: f64 },

    #[error("tolerance {tol:e} is below the integrator noise floor {floor:e}")]
    ToleranceTooSmall { tol: f64, floor: f64 },
}

impl Error {
    /// Numerical failures (as opposed to invalid inputs).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Linalg(_)
                | Error::HistoryUnderrun { .. }
                | Error::Divergence { .. }
                | Error::NonFiniteDerivative { .. }
                | Error::TooFewSamples { .. }
                | Error::Pole { .. }
                | Error::NoIsoradialReduction { .. }
        )
    }

    pub(crate) fn param(name: &str, message: impl Into<String>) -> Self {
        Error::Parameter {
            name: name.to_string(),
            message: message.into(),
        }
    }
}

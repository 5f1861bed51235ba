use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RtmError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("twist coefficient has a pole at theta = {theta}")]
    Pole { theta: f64 },

    #[error("insufficient data: need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("orbit passes through the elliptic fixed point at step {step}")]
    DegenerateArgument { step: usize },

    #[error("orbit escaped the control region at step {step}")]
    Escaped { step: i64 },

    #[error("orbit became unbounded (|psi| > 1e12) at step {step}")]
    Unbounded { step: i64 },

    #[error("not found: {0}")]
    NotFound(String),

    #[error("base point is not hyperbolic (|trace| = {trace_abs})")]
    NotHyperbolic { trace_abs: f64 },

    #[error("series order {order} only reaches residual {achieved:e} (target {target:e})")]
    Tolerance { order: usize, achieved: f64, target: f64 },

    #[error("precision too low: estimated quantity {estimate:e} is below the round-off floor; try mantissa_bits >= {recommended_bits}")]
    Precision { estimate: f64, recommended_bits: u32 },

    #[error("predicate does not change on the bracket [{lo}, {hi}]")]
    NoTransition { lo: f64, hi: f64 },

    #[error("invalid argument: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, RtmError>;

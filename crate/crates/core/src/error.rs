use thiserror::Error;

use crate::coeff::expr::ExprError;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("point {t} lies outside [{lo}, {hi}]")]
    Domain { t: f64, lo: f64, hi: f64 },

    /// A value that cannot be represented as a finite `f64`; the scaled
    /// evaluators handle these.
    #[error("value out of double range at t = {0}; use the scaled evaluator")]
    Range(f64),

    #[error("derivative of the phase vanishes at t = {0}")]
    SingularDerivative(f64),

    #[error("newton iteration did not converge after {iterations} steps (last zeta {last:e})")]
    NonConvergence {
        iterations: usize,
        last: f64,
        zeta_history: Vec<f64>,
    },

    #[error("singular linear system: {0}")]
    SingularSystem(String),

    #[error("invalid phase function: {0}")]
    InvalidPhase(String),

    #[error("coefficient q0 is not positive at t = {t} (q0 = {value})")]
    NonPositiveCoefficient { t: f64, value: f64 },

    #[error("interval budget of {0} panels exceeded")]
    PanelBudget(usize),

    #[error("panel [{c}, {d}] reached the minimum width without being accepted")]
    MinimumWidth { c: f64, d: f64 },

    #[error("boundary value problem is nearly resonant (|det| = {det:e})")]
    NearResonant { det: f64 },

    #[error(transparent)]
    Expr(#[from] ExprError),
}

//! Airy phase functions for `y'' + w^2 q(t) y = 0` where `q = t q0(t)` has a
//! simple turning point at the origin. Solutions are represented as
//! combinations of `Bi(g(t))/sqrt(g'(t))` and `Ai(g(t))/sqrt(g'(t))` with a
//! slowly varying phase `g`, so their cost does not grow with `w`.

pub mod airy;
pub mod chebyshev;
pub mod coeff;
pub mod error;
pub mod extend;
pub mod phase;
pub mod reference;
pub mod window;

pub use error::{Error, Result};

use coeff::Coefficient;
use extend::SolverOptions;
use phase::AiryPhase;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseParams {
    pub a0: f64,
    pub k: usize,
    pub eps: f64,
    pub max_iter: usize,
}

impl Default for PhaseParams {
    fn default() -> Self {
        Self {
            a0: window::DEFAULT_A0,
            k: window::DEFAULT_K,
            eps: window::DEFAULT_EPS,
            max_iter: window::DEFAULT_MAX_ITER,
        }
    }
}

/// Window solve followed by the two extension sweeps.
pub fn compute_phase(
    c: &Coefficient,
    omega: f64,
    domain: (f64, f64),
    params: &PhaseParams,
) -> Result<AiryPhase> {
    c.check_positive(domain, omega)?;
    let win = window::solve_window(c, omega, params.a0, params.k, params.eps, params.max_iter)?;
    let phase = extend::build_phase(
        c,
        omega,
        domain,
        &win,
        SolverOptions::new(params.k, params.eps),
    )?;
    phase.validate(1000)?;
    Ok(phase)
}

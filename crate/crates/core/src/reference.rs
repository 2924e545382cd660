//! Direct adaptive solution of `y'' + w^2 q y = 0` as a linear first-order
//! system. Its cost grows linearly with `w`; it serves as an independent
//! oracle at moderate frequencies.

use crate::chebyshev::PiecewiseCheb;
use crate::coeff::Coefficient;
use crate::error::{Error, Result};
use crate::extend::{
    solve_adaptive_backward, solve_adaptive_forward, AdaptiveSolution, OdeSystem, SolverOptions,
};

/// Panel budget large enough for `w` up to about `2^14` on unit-size domains.
pub const REFERENCE_MAX_PANELS: usize = 2_000_000;

/// The system in `(y, y'/w)`: `(y, z)' = (w z, -w q y)`. Carrying `y'/w`
/// keeps both components at comparable size, so that rounding in the large
/// derivative does not set a floor under the tail of `y`.
pub fn reference_system(c: &Coefficient, omega: f64) -> OdeSystem {
    let c = c.clone();
    OdeSystem::linear(2, move |t, a| {
        a[0] = 0.0;
        a[1] = omega;
        a[2] = -omega * c.q(t, omega);
        a[3] = 0.0;
    })
}

/// Sweeps right from `t0` to `b` and left from `t0` to `a`. The returned
/// components are `y` and `y'`.
#[allow(clippy::too_many_arguments)]
pub fn reference_solve(
    c: &Coefficient,
    omega: f64,
    (a, b): (f64, f64),
    t0: f64,
    y0: f64,
    dy0: f64,
    opts: SolverOptions,
) -> Result<AdaptiveSolution> {
    if !(a < b) || !(a <= t0 && t0 <= b) {
        return Err(Error::InvalidArgument(format!(
            "need a <= t0 <= b with a < b, got [{a}, {b}] and t0 = {t0}"
        )));
    }
    if !(omega > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "omega = {omega} must be positive"
        )));
    }
    let sys = reference_system(c, omega);
    let init = [y0, dy0 / omega];
    let mut sol = if t0 == a {
        solve_adaptive_forward(&sys, (a, b), &init, opts)?
    } else if t0 == b {
        solve_adaptive_backward(&sys, (a, b), &init, opts)?
    } else {
        let left = solve_adaptive_backward(&sys, (a, t0), &init, opts)?;
        let right = solve_adaptive_forward(&sys, (t0, b), &init, opts)?;
        AdaptiveSolution::join(&left, &right)?
    };
    let dz = &sol.components[1];
    let scaled = dz
        .piece_coeffs()
        .iter()
        .map(|cf| cf.iter().map(|v| v * omega).collect())
        .collect();
    sol.components[1] = PiecewiseCheb::new(dz.breakpoints().to_vec(), scaled)?;
    Ok(sol)
}

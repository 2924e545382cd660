//! The turning-point window `[-a0, a0]`: the leading-order phase evaluated
//! through a monomial expansion, then Newton-Kantorovich iteration on the
//! collocated Airy-Kummer equation.

use log::debug;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::chebyshev::{clenshaw, Spectral};
use crate::coeff::Coefficient;
use crate::error::{Error, Result};

pub const DEFAULT_A0: f64 = 0.25;
pub const DEFAULT_K: usize = 16;
pub const DEFAULT_EPS: f64 = 1e-13;
pub const DEFAULT_MAX_ITER: usize = 30;
/// How many times the window is halved after a failed solve.
pub const MAX_HALVINGS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowResult {
    pub gamma0_at_zero: f64,
    pub dgamma_at_zero: f64,
    pub d2gamma_at_zero: f64,
    pub iterations: usize,
    pub zeta_history: Vec<f64>,
    pub gamma_nodes: Vec<f64>,
    /// Half-width of the window that produced the result.
    pub a0: f64,
}

fn check_window(omega: f64, a0: f64, k: usize) -> Result<()> {
    if k % 2 == 1 {
        return Err(Error::InvalidArgument(format!(
            "window order k = {k} must be even: the node at t = 0 meets the (t/a0)^-1 basis term"
        )));
    }
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k = {k} is too small")));
    }
    if !(a0 > 0.0) || !a0.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "window half-width {a0} must be positive"
        )));
    }
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "omega = {omega} must be positive"
        )));
    }
    Ok(())
}

/// Values of the leading-order Airy phase at the extremal nodes of
/// `[-a0, a0]`.
pub fn gamma0_window(c: &Coefficient, omega: f64, a0: f64, k: usize) -> Result<Vec<f64>> {
    check_window(omega, a0, k)?;
    let spec = Spectral::new(k)?;
    gamma0_nodes(c, omega, a0, &spec)
}

fn gamma0_nodes(c: &Coefficient, omega: f64, a0: f64, spec: &Spectral) -> Result<Vec<f64>> {
    let k = spec.k();
    let x = spec.grid.nodes();
    let mut rhs = DVector::zeros(k);
    for i in 0..k {
        let t = a0 * x[i];
        let v = c.q0(t, omega);
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::NonPositiveCoefficient { t, value: v });
        }
        rhs[i] = v.sqrt();
    }
    // basis (t/a0)^(j-1), j = 0..k-1, evaluated at x_i = t_i/a0
    let vander = DMatrix::from_fn(k, k, |i, j| x[i].powi(j as i32 - 1));
    let coef = vander
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::SingularSystem("monomial Vandermonde system".into()))?;
    Ok(x.iter()
        .map(|&xi| {
            // int_0^t sqrt|s| sqrt(q0(s)) ds = a0 sqrt|t| sum c_j/(j+1/2) (t/a0)^j
            let t = a0 * xi;
            let mut s = 0.0;
            let mut p = 1.0;
            for j in 0..k {
                s += coef[j] / (j as f64 + 0.5) * p;
                p *= xi;
            }
            let integral = a0 * t.abs().sqrt() * s;
            integral.signum() * (1.5 * omega * integral.abs()).powf(2.0 / 3.0)
        })
        .collect())
}

fn matvec(m: &DMatrix<f64>, v: &[f64], scale: f64) -> Vec<f64> {
    (0..m.nrows())
        .map(|i| scale * (0..m.ncols()).map(|j| m[(i, j)] * v[j]).sum::<f64>())
        .collect()
}

/// First three scaled spectral derivatives of `g` on the window.
fn derivs(spec: &Spectral, g: &[f64], a0: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let d1 = matvec(&spec.diff, g, 1.0 / a0);
    let d2 = matvec(&spec.diff, &d1, 1.0 / a0);
    let d3 = matvec(&spec.diff, &d2, 1.0 / a0);
    (d1, d2, d3)
}

fn first_zero(d1: &[f64], a0: f64, spec: &Spectral) -> Option<f64> {
    d1.iter()
        .position(|&v| v == 0.0)
        .map(|i| a0 * spec.grid.nodes()[i])
}

fn residual_with(spec: &Spectral, g: &[f64], q: &[f64], omega: f64, a0: f64) -> Result<Vec<f64>> {
    let (d1, d2, d3) = derivs(spec, g, a0);
    if let Some(t) = first_zero(&d1, a0, spec) {
        return Err(Error::SingularDerivative(t));
    }
    let w2 = omega * omega;
    Ok((0..g.len())
        .map(|i| {
            w2 * q[i] - g[i] * d1[i] * d1[i] + 0.75 * d2[i] * d2[i] / (d1[i] * d1[i])
                - 0.5 * d3[i] / d1[i]
        })
        .collect())
}

/// Collocated Airy-Kummer residual
/// `w^2 q - g o (Dg)^2 + 3/4 (D^2 g)^2 o (Dg)^-2 - 1/2 (D^3 g) o (Dg)^-1`
/// with `D` the differentiation matrix scaled to `[-a0, a0]`.
pub fn residual_r(gvec: &[f64], qvec: &[f64], omega: f64, a0: f64) -> Result<Vec<f64>> {
    if gvec.len() != qvec.len() {
        return Err(Error::InvalidArgument(
            "gvec and qvec lengths differ".into(),
        ));
    }
    let spec = Spectral::new(gvec.len())?;
    residual_with(&spec, gvec, qvec, omega, a0)
}

fn frechet_with(spec: &Spectral, x: &[f64], a0: f64) -> Result<DMatrix<f64>> {
    let k = x.len();
    let (d1, d2, d3) = derivs(spec, x, a0);
    if let Some(t) = first_zero(&d1, a0, spec) {
        return Err(Error::SingularDerivative(t));
    }
    let d = &spec.diff / a0;
    let dd = &d * &d;
    let ddd = &dd * &d;
    let mut m = DMatrix::zeros(k, k);
    for i in 0..k {
        let p = d1[i];
        // row scalings of D, D^2 and D^3
        let c1 = -2.0 * x[i] * p - 1.5 * d2[i] * d2[i] / (p * p * p) + 0.5 * d3[i] / (p * p);
        let c2 = 1.5 * d2[i] / (p * p);
        let c3 = -0.5 / p;
        for j in 0..k {
            m[(i, j)] = c1 * d[(i, j)] + c2 * dd[(i, j)] + c3 * ddd[(i, j)];
        }
        m[(i, i)] -= p * p;
    }
    Ok(m)
}

/// Jacobian of [`residual_r`] at `gvec`; independent of `q` and `omega`.
pub fn frechet_dr(gvec: &[f64], a0: f64) -> Result<DMatrix<f64>> {
    let spec = Spectral::new(gvec.len())?;
    frechet_with(&spec, gvec, a0)
}

fn cond_1(m: &DMatrix<f64>) -> Option<f64> {
    let inv = m.clone().try_inverse()?;
    let norm1 = |a: &DMatrix<f64>| {
        (0..a.ncols())
            .map(|j| a.column(j).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    Some(norm1(m) * norm1(&inv))
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// True when every residual entry is within the rounding error of its own
/// evaluation, bounded componentwise through `|D|^3 |g|`.
fn at_rounding_level(spec: &Spectral, g: &[f64], q: &[f64], omega: f64, a0: f64) -> Result<bool> {
    let r = residual_with(spec, g, q, omega, a0)?;
    let (d1, d2, _) = derivs(spec, g, a0);
    let abs_d = spec.diff.abs() / a0;
    let ga: Vec<f64> = g.iter().map(|v| v.abs()).collect();
    let m3 = matvec(&abs_d, &matvec(&abs_d, &matvec(&abs_d, &ga, 1.0), 1.0), 1.0);
    let u = 8.0 * g.len() as f64 * f64::EPSILON;
    Ok((0..g.len()).all(|i| {
        let p = d1[i].abs();
        let scale = omega * omega * q[i].abs()
            + ga[i] * p * p
            + 0.75 * (d2[i] / p).powi(2)
            + 0.5 * m3[i] / p;
        r[i].abs() <= u * scale
    }))
}

/// Newton-Kantorovich on the window starting from the leading-order phase.
pub fn newton_window(
    c: &Coefficient,
    omega: f64,
    a0: f64,
    k: usize,
    eps: f64,
    max_iter: usize,
) -> Result<WindowResult> {
    check_window(omega, a0, k)?;
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "eps = {eps} must be positive"
        )));
    }
    let spec = Spectral::new(k)?;
    let nodes: Vec<f64> = spec.grid.nodes().iter().map(|x| a0 * x).collect();
    let q: Vec<f64> = nodes.iter().map(|&t| c.q(t, omega)).collect();
    let mut g = gamma0_nodes(c, omega, a0, &spec)?;
    let mut zetas = Vec::new();
    // An exact leading-order phase (q0 constant) needs no correction. At small
    // w the collocated Jacobian resolves its own smooth null space, so a
    // Newton step taken from rounding-level residuals would only add noise.
    let exact = at_rounding_level(&spec, &g, &q, omega, a0)?;
    while !exact {
        if zetas.len() >= max_iter {
            return Err(Error::NonConvergence {
                iterations: zetas.len(),
                last: zetas.last().copied().unwrap_or(f64::NAN),
                zeta_history: zetas,
            });
        }
        let r = residual_with(&spec, &g, &q, omega, a0)?;
        let jac = frechet_with(&spec, &g, a0)?;
        if log::log_enabled!(log::Level::Debug) {
            debug!(
                "window newton step {}: cond_1(DR) ~ {:?}",
                zetas.len(),
                cond_1(&jac)
            );
        }
        let rhs = DVector::from_iterator(k, r.iter().map(|v| -v));
        let h = jac
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::SingularSystem("window Newton step".into()))?;
        let zeta = h.amax() / max_abs(&g);
        for (gi, hi) in g.iter_mut().zip(h.iter()) {
            *gi += hi;
        }
        zetas.push(zeta);
        if !zeta.is_finite() {
            return Err(Error::NonConvergence {
                iterations: zetas.len(),
                last: zeta,
                zeta_history: zetas,
            });
        }
        if zeta <= eps {
            break;
        }
    }
    let (d1, d2, _) = derivs(&spec, &g, a0);
    if let Some(i) = d1.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::InvalidPhase(format!(
            "gamma' = {} at window node t = {}",
            d1[i], nodes[i]
        )));
    }
    let at_zero = |v: &[f64]| clenshaw(&spec.coeffs(v), 0.0);
    Ok(WindowResult {
        gamma0_at_zero: at_zero(&g),
        dgamma_at_zero: at_zero(&d1),
        d2gamma_at_zero: at_zero(&d2),
        iterations: zetas.len(),
        zeta_history: zetas,
        gamma_nodes: g,
        a0,
    })
}

/// [`newton_window`] with the window halved (up to [`MAX_HALVINGS`] times)
/// after non-convergence or an invalid phase.
pub fn solve_window(
    c: &Coefficient,
    omega: f64,
    a0: f64,
    k: usize,
    eps: f64,
    max_iter: usize,
) -> Result<WindowResult> {
    let mut a = a0;
    let mut last_err = None;
    for _ in 0..=MAX_HALVINGS {
        match newton_window(c, omega, a, k, eps, max_iter) {
            Ok(w) => return Ok(w),
            Err(
                e @ (Error::NonConvergence { .. }
                | Error::InvalidPhase(_)
                | Error::SingularDerivative(_)
                | Error::SingularSystem(_)),
            ) => {
                debug!("window a0 = {a} failed ({e}); halving");
                last_err = Some(e);
                a /= 2.0;
            }
            Err(e) => return Err(e),
        }
    }
    Err(last_err.unwrap())
}

//! Solutions represented through an Airy phase: the basis
//! `Bi(g)/sqrt(g')`, `Ai(g)/sqrt(g')`, initial and boundary value fits,
//! evaluation, and inversion of the phase.

use log::debug;
use serde::{Deserialize, Serialize};

use crate::airy::{airy_eval, airy_eval_scaled, AiryValues, Scaled};
use crate::chebyshev::{clenshaw, derivative_coeffs, PiecewiseCheb};
use crate::coeff::Coefficient;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseMeta {
    pub a0: f64,
    pub k: usize,
    pub eps: f64,
    pub iterations: usize,
    pub zeta_history: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct PhaseRepr {
    omega: f64,
    domain: [f64; 2],
    gamma: PiecewiseCheb,
    dgamma: PiecewiseCheb,
    d2gamma: PiecewiseCheb,
    meta: PhaseMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PhaseRepr", into = "PhaseRepr")]
pub struct AiryPhase {
    omega: f64,
    gamma: PiecewiseCheb,
    dgamma: PiecewiseCheb,
    d2gamma: PiecewiseCheb,
    meta: PhaseMeta,
}

impl TryFrom<PhaseRepr> for AiryPhase {
    type Error = Error;

    fn try_from(r: PhaseRepr) -> Result<Self> {
        let p = AiryPhase::new(r.omega, r.gamma, r.dgamma, r.d2gamma, r.meta)?;
        if p.domain() != (r.domain[0], r.domain[1]) {
            return Err(Error::InvalidPhase(format!(
                "domain {:?} disagrees with the breakpoints",
                r.domain
            )));
        }
        Ok(p)
    }
}

impl From<AiryPhase> for PhaseRepr {
    fn from(p: AiryPhase) -> Self {
        let (a, b) = p.domain();
        PhaseRepr {
            omega: p.omega,
            domain: [a, b],
            gamma: p.gamma,
            dgamma: p.dgamma,
            d2gamma: p.d2gamma,
            meta: p.meta,
        }
    }
}

/// Coefficients of a solution in the basis (Bi-channel, Ai-channel).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolutionRep {
    pub c1: f64,
    pub c2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Basis {
    pub u: f64,
    pub v: f64,
    pub du: f64,
    pub dv: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledBasis {
    pub u: Scaled,
    pub v: Scaled,
    pub du: Scaled,
    pub dv: Scaled,
}

/// A solution value; `in_range` is false when `y` or `y'` does not fit in a
/// double, in which case the scaled evaluation has the answer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointValue {
    pub y: f64,
    pub dy: f64,
    pub in_range: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledPointValue {
    pub y: Scaled,
    pub dy: Scaled,
}

/// Phase values at a point: `(g, g', g'')`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseValues {
    pub gamma: f64,
    pub dgamma: f64,
    pub d2gamma: f64,
}

impl AiryPhase {
    pub fn new(
        omega: f64,
        gamma: PiecewiseCheb,
        dgamma: PiecewiseCheb,
        d2gamma: PiecewiseCheb,
        meta: PhaseMeta,
    ) -> Result<Self> {
        if !(omega > 0.0) || !omega.is_finite() {
            return Err(Error::InvalidPhase(format!("omega = {omega}")));
        }
        if gamma.breakpoints() != dgamma.breakpoints()
            || gamma.breakpoints() != d2gamma.breakpoints()
        {
            return Err(Error::InvalidPhase(
                "gamma, gamma' and gamma'' must share breakpoints".into(),
            ));
        }
        if gamma.k() != dgamma.k() || gamma.k() != d2gamma.k() {
            return Err(Error::InvalidPhase("expansion orders differ".into()));
        }
        Ok(Self {
            omega,
            gamma,
            dgamma,
            d2gamma,
            meta,
        })
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn domain(&self) -> (f64, f64) {
        self.gamma.domain()
    }

    pub fn gamma(&self) -> &PiecewiseCheb {
        &self.gamma
    }

    pub fn dgamma(&self) -> &PiecewiseCheb {
        &self.dgamma
    }

    pub fn d2gamma(&self) -> &PiecewiseCheb {
        &self.d2gamma
    }

    pub fn meta(&self) -> &PhaseMeta {
        &self.meta
    }

    pub fn num_pieces(&self) -> usize {
        self.gamma.num_pieces()
    }

    /// Coefficients stored for `g` alone (pieces times order).
    pub fn num_coeffs(&self) -> usize {
        self.gamma.num_coeffs()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::InvalidPhase(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidPhase(e.to_string()))
    }

    pub fn values(&self, t: f64) -> Result<PhaseValues> {
        let i = self.gamma.locate(t)?;
        Ok(PhaseValues {
            gamma: self.gamma.eval_in(i, t),
            dgamma: self.dgamma.eval_in(i, t),
            d2gamma: self.d2gamma.eval_in(i, t),
        })
    }

    /// Checks `g' > 0` at `samples` equispaced points and at every
    /// breakpoint.
    pub fn validate(&self, samples: usize) -> Result<()> {
        let (a, b) = self.domain();
        let n = samples.max(2);
        let pts = (0..n)
            .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
            .chain(self.gamma.breakpoints().iter().copied());
        for t in pts {
            let d = self.dgamma.eval(t)?;
            if !(d > 0.0) {
                return Err(Error::InvalidPhase(format!("gamma'({t}) = {d}")));
            }
        }
        Ok(())
    }

    /// `w^2 q - g g'^2 + 3/4 (g''/g')^2 - 1/2 g'''/g'` with `g'''` obtained by
    /// differentiating the stored `g''` expansion.
    pub fn airy_kummer_residual(&self, c: &Coefficient, t: f64) -> Result<f64> {
        let i = self.gamma.locate(t)?;
        let (lo, hi) = (self.gamma.breakpoints()[i], self.gamma.breakpoints()[i + 1]);
        let x = (2.0 * t - (lo + hi)) / (hi - lo);
        let d3 = clenshaw(&derivative_coeffs(&self.d2gamma.piece_coeffs()[i]), x) * 2.0 / (hi - lo);
        let g = self.gamma.eval_in(i, t);
        let d1 = self.dgamma.eval_in(i, t);
        let d2 = self.d2gamma.eval_in(i, t);
        let w2 = self.omega * self.omega;
        Ok(w2 * c.q(t, self.omega) - g * d1 * d1 + 0.75 * (d2 / d1) * (d2 / d1) - 0.5 * d3 / d1)
    }

    fn combine(vals: &AiryValues, p: &PhaseValues) -> Basis {
        let s = p.dgamma.sqrt();
        let corr = 0.5 * p.d2gamma / (p.dgamma * s);
        Basis {
            u: vals.bi / s,
            v: vals.ai / s,
            du: vals.dbi * s - corr * vals.bi,
            dv: vals.dai * s - corr * vals.ai,
        }
    }

    pub fn basis_eval(&self, t: f64) -> Result<Basis> {
        let p = self.values(t)?;
        if !(p.dgamma > 0.0) {
            return Err(Error::InvalidPhase(format!("gamma'({t}) = {}", p.dgamma)));
        }
        Ok(Self::combine(&airy_eval(p.gamma)?, &p))
    }

    pub fn basis_eval_scaled(&self, t: f64) -> Result<ScaledBasis> {
        let p = self.values(t)?;
        if !(p.dgamma > 0.0) {
            return Err(Error::InvalidPhase(format!("gamma'({t}) = {}", p.dgamma)));
        }
        let a = airy_eval_scaled(p.gamma)?;
        let s = p.dgamma.sqrt();
        let corr = 0.5 * p.d2gamma / (p.dgamma * s);
        Ok(ScaledBasis {
            u: a.bi.scale(1.0 / s),
            v: a.ai.scale(1.0 / s),
            du: a.dbi.scale(s) + a.bi.scale(-corr),
            dv: a.dai.scale(s) + a.ai.scale(-corr),
        })
    }

    /// Closed form through the unit Wronskian of the basis.
    pub fn fit_ivp(&self, t0: f64, y0: f64, dy0: f64) -> Result<SolutionRep> {
        let b = self.basis_eval(t0)?;
        Ok(SolutionRep {
            c1: y0 * b.dv - dy0 * b.v,
            c2: dy0 * b.u - y0 * b.du,
        })
    }

    /// `u(ta) v(tb) - v(ta) u(tb)` and the product of the row norms of the
    /// boundary system.
    pub fn bvp_determinant(&self, ta: f64, tb: f64) -> Result<(f64, f64)> {
        let a = self.basis_eval(ta)?;
        let b = self.basis_eval(tb)?;
        Ok((a.u * b.v - a.v * b.u, a.u.hypot(a.v) * b.u.hypot(b.v)))
    }

    /// Dirichlet data at two points, by 2x2 elimination with full pivoting.
    pub fn fit_bvp(&self, ta: f64, ya: f64, tb: f64, yb: f64) -> Result<SolutionRep> {
        if !(ta < tb) {
            return Err(Error::InvalidArgument(format!(
                "need ta < tb, got {ta} and {tb}"
            )));
        }
        let a = self.basis_eval(ta)?;
        let b = self.basis_eval(tb)?;
        let mut m = [[a.u, a.v], [b.u, b.v]];
        let mut rhs = [ya, yb];
        let norms = a.u.hypot(a.v) * b.u.hypot(b.v);
        // pivot: largest entry moved to (0, 0)
        let (mut pr, mut pc) = (0, 0);
        for r in 0..2 {
            for c in 0..2 {
                if m[r][c].abs() > m[pr][pc].abs() {
                    (pr, pc) = (r, c);
                }
            }
        }
        if pr == 1 {
            m.swap(0, 1);
            rhs.swap(0, 1);
        }
        if pc == 1 {
            for row in m.iter_mut() {
                row.swap(0, 1);
            }
        }
        let l = m[1][0] / m[0][0];
        let u11 = m[1][1] - l * m[0][1];
        let det = m[0][0] * u11 * if (pr == 1) != (pc == 1) { -1.0 } else { 1.0 };
        debug!("bvp determinant {det:e}, row norm product {norms:e}");
        if !(det.abs() >= 1e-13 * norms) {
            return Err(Error::NearResonant { det });
        }
        let x1 = (rhs[1] - l * rhs[0]) / u11;
        let x0 = (rhs[0] - m[0][1] * x1) / m[0][0];
        let (c1, c2) = if pc == 1 { (x1, x0) } else { (x0, x1) };
        Ok(SolutionRep { c1, c2 })
    }

    fn eval_point(&self, r: &SolutionRep, t: f64) -> Result<PointValue> {
        let p = self.values(t)?;
        if !(p.dgamma > 0.0) {
            return Err(Error::InvalidPhase(format!("gamma'({t}) = {}", p.dgamma)));
        }
        match airy_eval(p.gamma) {
            Ok(vals) => {
                let b = Self::combine(&vals, &p);
                Ok(PointValue {
                    y: r.c1 * b.u + r.c2 * b.v,
                    dy: r.c1 * b.du + r.c2 * b.dv,
                    in_range: true,
                })
            }
            Err(Error::Range(_)) => {
                let s = self.eval_point_scaled(r, t)?;
                match (s.y.to_f64(), s.dy.to_f64()) {
                    (Some(y), Some(dy)) => Ok(PointValue {
                        y,
                        dy,
                        in_range: true,
                    }),
                    _ => Ok(PointValue {
                        y: s.y.to_f64_lossy(),
                        dy: s.dy.to_f64_lossy(),
                        in_range: false,
                    }),
                }
            }
            Err(e) => Err(e),
        }
    }

    fn eval_point_scaled(&self, r: &SolutionRep, t: f64) -> Result<ScaledPointValue> {
        let b = self.basis_eval_scaled(t)?;
        let (c1, c2) = (Scaled::from_f64(r.c1), Scaled::from_f64(r.c2));
        Ok(ScaledPointValue {
            y: c1 * b.u + c2 * b.v,
            dy: c1 * b.du + c2 * b.dv,
        })
    }

    pub fn eval_solution(&self, r: &SolutionRep, ts: &[f64]) -> Result<Vec<PointValue>> {
        ts.iter().map(|&t| self.eval_point(r, t)).collect()
    }

    pub fn eval_solution_scaled(
        &self,
        r: &SolutionRep,
        ts: &[f64],
    ) -> Result<Vec<ScaledPointValue>> {
        ts.iter().map(|&t| self.eval_point_scaled(r, t)).collect()
    }

    /// The point where the phase takes the value `target`.
    pub fn invert_phase(&self, target: f64) -> Result<f64> {
        let (a, b) = self.domain();
        let (ga, gb) = (self.gamma.eval(a)?, self.gamma.eval(b)?);
        if !(ga <= target && target <= gb) {
            return Err(Error::Domain {
                t: target,
                lo: ga,
                hi: gb,
            });
        }
        if target == gb {
            return Ok(b);
        }
        if target == ga {
            return Ok(a);
        }
        let bp = self.gamma.breakpoints();
        // last piece whose left end has g <= target
        let (mut lo_i, mut hi_i) = (0, bp.len() - 1);
        while hi_i - lo_i > 1 {
            let mid = (lo_i + hi_i) / 2;
            if self.gamma.eval_in(mid.min(bp.len() - 2), bp[mid]) <= target {
                lo_i = mid;
            } else {
                hi_i = mid;
            }
        }
        let piece = lo_i;
        let (mut lo, mut hi) = (bp[piece], bp[piece + 1]);
        let tol = 1e-12 * target.abs().max(1.0);
        let mut t = 0.5 * (lo + hi);
        for _ in 0..200 {
            let g = self.gamma.eval_in(piece, t) - target;
            if g.abs() <= tol {
                return Ok(t);
            }
            if g < 0.0 {
                lo = t;
            } else {
                hi = t;
            }
            let d = self.dgamma.eval_in(piece, t);
            let next = t - g / d;
            t = if next > lo && next < hi && d > 0.0 {
                next
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo <= f64::EPSILON * hi.abs().max(lo.abs()) {
                return Ok(t);
            }
        }
        Ok(t)
    }
}

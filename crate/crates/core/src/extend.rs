//! Adaptive piecewise Chebyshev solver for first-order systems `y' = F(t, y)`
//! and its use to carry the Airy phase out from the turning-point window.
//!
//! On a panel `[c, d]` with anchor value `y_c` the problem is recast as
//! `u = y_c + K F(t, u)`, `K = (d - c)/2 * J`, with `J` the integration matrix
//! on the extremal grid. The terminal version anchors at `d` and uses
//! `K = (d - c)/2 * (J - 1 J[k-1, :])`, so that row `k-1` vanishes.
//! Linear systems solve `(I - K A) u = w` directly; nonlinear ones start from
//! an implicit trapezoid sweep over the nodes and run Newton on the
//! collocated identity.

use std::fmt;
use std::sync::Arc;

use log::{debug, trace};
use nalgebra::{DMatrix, DVector};

use crate::chebyshev::{l2_norm, tail_norm, PiecewiseCheb, Spectral};
use crate::coeff::Coefficient;
use crate::error::{Error, Result};
use crate::phase::{AiryPhase, PhaseMeta};
use crate::window::WindowResult;

mod banded;
mod collocation;

pub use collocation::{solve_two_point, EndCondition};

pub type RhsFn = dyn Fn(f64, &[f64], &mut [f64]) -> Result<()> + Send + Sync;
/// Writes the row-major `n x n` Jacobian of the right-hand side.
pub type JacFn = dyn Fn(f64, &[f64], &mut [f64]) -> Result<()> + Send + Sync;

#[derive(Clone)]
pub struct OdeSystem {
    n: usize,
    rhs: Arc<RhsFn>,
    jac: Option<Arc<JacFn>>,
    linear: bool,
    tail_floor: Vec<f64>,
}

impl fmt::Debug for OdeSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OdeSystem")
            .field("n", &self.n)
            .field("linear", &self.linear)
            .field("analytic_jacobian", &self.jac.is_some())
            .field("tail_floor", &self.tail_floor)
            .finish()
    }
}

impl OdeSystem {
    pub fn new<F>(n: usize, rhs: F) -> Self
    where
        F: Fn(f64, &[f64], &mut [f64]) -> Result<()> + Send + Sync + 'static,
    {
        Self {
            n,
            rhs: Arc::new(rhs),
            jac: None,
            linear: false,
            tail_floor: vec![0.0; n],
        }
    }

    /// `y' = A(t) y` with `a(t, out)` filling `A(t)` row-major.
    pub fn linear<F>(n: usize, a: F) -> Self
    where
        F: Fn(f64, &mut [f64]) + Send + Sync + 'static,
    {
        let a = Arc::new(a);
        let a2 = a.clone();
        let rhs = move |t: f64, y: &[f64], out: &mut [f64]| {
            let mut m = vec![0.0; n * n];
            a(t, &mut m);
            for i in 0..n {
                out[i] = (0..n).map(|j| m[i * n + j] * y[j]).sum();
            }
            Ok(())
        };
        let jac = move |t: f64, _: &[f64], out: &mut [f64]| {
            a2(t, out);
            Ok(())
        };
        Self {
            n,
            rhs: Arc::new(rhs),
            jac: Some(Arc::new(jac)),
            linear: true,
            tail_floor: vec![0.0; n],
        }
    }

    pub fn with_jacobian<F>(mut self, jac: F) -> Self
    where
        F: Fn(f64, &[f64], &mut [f64]) -> Result<()> + Send + Sync + 'static,
    {
        self.jac = Some(Arc::new(jac));
        self
    }

    /// Absolute floor under the per-component tail test: a component passes
    /// when its tail norm is at most `eps * max(norm, floor)`. Components
    /// that are identically zero in exact arithmetic carry only rounding
    /// noise, whose tail ratio is O(1).
    pub fn with_tail_floor(mut self, floor: Vec<f64>) -> Self {
        assert_eq!(floor.len(), self.n);
        self.tail_floor = floor;
        self
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn is_linear(&self) -> bool {
        self.linear
    }

    pub fn tail_floor(&self) -> &[f64] {
        &self.tail_floor
    }

    pub fn rhs(&self, t: f64, y: &[f64], out: &mut [f64]) -> Result<()> {
        (self.rhs)(t, y, out)?;
        if let Some(v) = out.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "right-hand side is {v} at t = {t}"
            )));
        }
        Ok(())
    }

    /// Analytic Jacobian if one was supplied, central differences otherwise.
    pub fn jacobian(&self, t: f64, y: &[f64], out: &mut [f64]) -> Result<()> {
        if let Some(j) = &self.jac {
            return j(t, y, out);
        }
        let n = self.n;
        let mut yp = y.to_vec();
        let mut fp = vec![0.0; n];
        let mut fm = vec![0.0; n];
        for j in 0..n {
            let h = 1e-7 * y[j].abs().max(1.0);
            yp[j] = y[j] + h;
            self.rhs(t, &yp, &mut fp)?;
            yp[j] = y[j] - h;
            self.rhs(t, &yp, &mut fm)?;
            yp[j] = y[j];
            for i in 0..n {
                out[i * n + j] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        Ok(())
    }
}

/// The Airy-Kummer equation solved for the third derivative, as a system in
/// `(g, g', g'')`.
pub fn airy_kummer_rhs(c: &Coefficient, omega: f64) -> OdeSystem {
    let w2 = omega * omega;
    let c1 = c.clone();
    let c2 = c.clone();
    let rhs = move |t: f64, y: &[f64], out: &mut [f64]| {
        let (g, dg, d2g) = (y[0], y[1], y[2]);
        if dg == 0.0 {
            return Err(Error::SingularDerivative(t));
        }
        out[0] = dg;
        out[1] = d2g;
        out[2] = 2.0 * dg * (w2 * c1.q(t, omega) - g * dg * dg) + 1.5 * d2g * d2g / dg;
        Ok(())
    };
    let jac = move |t: f64, y: &[f64], out: &mut [f64]| {
        let (g, dg, d2g) = (y[0], y[1], y[2]);
        if dg == 0.0 {
            return Err(Error::SingularDerivative(t));
        }
        out.copy_from_slice(&[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        out[6] = -2.0 * dg * dg * dg;
        out[7] = 2.0 * w2 * c2.q(t, omega) - 6.0 * g * dg * dg - 1.5 * d2g * d2g / (dg * dg);
        out[8] = 3.0 * d2g / dg;
        Ok(())
    };
    // s is the leading-order g'(0). Cancellation in the g''' term leaves noise
    // near 10 eps s in g and g', and g'' feeds y' only through g''/g'^2, so its
    // floor is looser still.
    let s = omega.powf(2.0 / 3.0) * c.q0(0.0, omega).abs().cbrt();
    OdeSystem::new(3, rhs)
        .with_jacobian(jac)
        .with_tail_floor(vec![10.0 * s, 10.0 * s, 100.0 * s * s])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub k: usize,
    pub eps: f64,
    pub max_panels: usize,
    pub newton_max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            k: 16,
            eps: 1e-13,
            max_panels: 10_000,
            newton_max_iter: 20,
        }
    }
}

impl SolverOptions {
    pub fn new(k: usize, eps: f64) -> Self {
        Self {
            k,
            eps,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolveStats {
    pub panels: usize,
    pub rejected: usize,
    pub deepest_level: usize,
    pub rhs_evals: usize,
    pub newton_iters: usize,
}

#[derive(Debug, Clone)]
pub struct AdaptiveSolution {
    pub components: Vec<PiecewiseCheb>,
    pub stats: SolveStats,
}

impl AdaptiveSolution {
    pub fn intervals(&self) -> &[f64] {
        self.components[0].breakpoints()
    }

    pub fn domain(&self) -> (f64, f64) {
        self.components[0].domain()
    }

    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        let i = self.components[0].locate(t)?;
        Ok(self.components.iter().map(|p| p.eval_in(i, t)).collect())
    }

    /// Joins a terminal-value solution on `[a, s]` with an initial-value
    /// solution on `[s, b]`.
    pub fn join(left: &AdaptiveSolution, right: &AdaptiveSolution) -> Result<Self> {
        let mut components = Vec::with_capacity(left.components.len());
        for (l, r) in left.components.iter().zip(&right.components) {
            if l.domain().1 != r.domain().0 {
                return Err(Error::InvalidArgument(
                    "solutions do not share an endpoint".into(),
                ));
            }
            let mut bp = l.breakpoints().to_vec();
            bp.extend_from_slice(&r.breakpoints()[1..]);
            let mut co = l.piece_coeffs().to_vec();
            co.extend_from_slice(r.piece_coeffs());
            components.push(PiecewiseCheb::new(bp, co)?);
        }
        let (a, b) = (left.stats, right.stats);
        Ok(Self {
            components,
            stats: SolveStats {
                panels: a.panels + b.panels,
                rejected: a.rejected + b.rejected,
                deepest_level: a.deepest_level.max(b.deepest_level),
                rhs_evals: a.rhs_evals + b.rhs_evals,
                newton_iters: a.newton_iters + b.newton_iters,
            },
        })
    }
}

/// Relative Newton step below which lack of progress is put down to rounding.
const NEWTON_NOISE: f64 = 1e-8;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Direction {
    Forward,
    Backward,
}

struct PanelSolver<'a> {
    sys: &'a OdeSystem,
    spec: Spectral,
    // integration operator for the chosen anchor, on [-1, 1]
    kmat: DMatrix<f64>,
    dir: Direction,
    opts: SolverOptions,
    stats: SolveStats,
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

impl<'a> PanelSolver<'a> {
    fn new(sys: &'a OdeSystem, dir: Direction, opts: SolverOptions) -> Result<Self> {
        if opts.k < 2 {
            return Err(Error::InvalidArgument(format!(
                "k = {} is too small",
                opts.k
            )));
        }
        if !(opts.eps > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "eps = {} must be positive",
                opts.eps
            )));
        }
        let spec = Spectral::new(opts.k)?;
        let k = opts.k;
        let kmat = match dir {
            Direction::Forward => spec.integ.clone(),
            Direction::Backward => {
                let last = spec.integ.row(k - 1).into_owned();
                let mut m = spec.integ.clone();
                for i in 0..k {
                    let mut row = m.row_mut(i);
                    row -= &last;
                }
                m
            }
        };
        Ok(Self {
            sys,
            spec,
            kmat,
            dir,
            opts,
            stats: SolveStats::default(),
        })
    }

    fn anchor_node(&self) -> usize {
        match self.dir {
            Direction::Forward => 0,
            Direction::Backward => self.opts.k - 1,
        }
    }

    /// `F` at every node, component-major.
    fn rhs_all(&mut self, ts: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        let (n, k) = (self.sys.n, self.opts.k);
        let mut out = vec![0.0; n * k];
        let mut y = vec![0.0; n];
        let mut f = vec![0.0; n];
        for i in 0..k {
            for c in 0..n {
                y[c] = u[c * k + i];
            }
            self.sys.rhs(ts[i], &y, &mut f)?;
            for c in 0..n {
                out[c * k + i] = f[c];
            }
        }
        self.stats.rhs_evals += k;
        Ok(out)
    }

    fn jac_all(&self, ts: &[f64], u: &[f64]) -> Result<Vec<Vec<f64>>> {
        let (n, k) = (self.sys.n, self.opts.k);
        let mut y = vec![0.0; n];
        (0..k)
            .map(|i| {
                for c in 0..n {
                    y[c] = u[c * k + i];
                }
                let mut a = vec![0.0; n * n];
                self.sys.jacobian(ts[i], &y, &mut a)?;
                Ok(a)
            })
            .collect()
    }

    /// `I - h K A` for node Jacobians `a`.
    fn system_matrix(&self, h: f64, a: &[Vec<f64>]) -> DMatrix<f64> {
        let (n, k) = (self.sys.n, self.opts.k);
        let mut m = DMatrix::zeros(n * k, n * k);
        for c in 0..n {
            for c2 in 0..n {
                for j in 0..k {
                    let aj = a[j][c * n + c2];
                    if aj == 0.0 {
                        continue;
                    }
                    for i in 0..k {
                        m[(c * k + i, c2 * k + j)] -= h * self.kmat[(i, j)] * aj;
                    }
                }
            }
        }
        for i in 0..n * k {
            m[(i, i)] += 1.0;
        }
        m
    }

    /// `u - w - h K F(u)`.
    fn residual(&mut self, ts: &[f64], u: &[f64], anchor: &[f64], h: f64) -> Result<Vec<f64>> {
        let (n, k) = (self.sys.n, self.opts.k);
        let f = self.rhs_all(ts, u)?;
        let mut r = vec![0.0; n * k];
        for c in 0..n {
            for i in 0..k {
                let kf: f64 = (0..k).map(|j| self.kmat[(i, j)] * f[c * k + j]).sum();
                r[c * k + i] = u[c * k + i] - anchor[c] - h * kf;
            }
        }
        Ok(r)
    }

    /// Implicit trapezoid across the nodes, starting from the anchor.
    fn predictor(&mut self, ts: &[f64], anchor: &[f64]) -> Result<Option<Vec<f64>>> {
        let (n, k) = (self.sys.n, self.opts.k);
        let mut u = vec![0.0; n * k];
        let order: Vec<usize> = match self.dir {
            Direction::Forward => (0..k).collect(),
            Direction::Backward => (0..k).rev().collect(),
        };
        let mut y = anchor.to_vec();
        let mut fy = vec![0.0; n];
        self.sys.rhs(ts[order[0]], &y, &mut fy)?;
        for c in 0..n {
            u[c * k + order[0]] = y[c];
        }
        let mut z = vec![0.0; n];
        let mut fz = vec![0.0; n];
        let mut jz = vec![0.0; n * n];
        for w in order.windows(2) {
            let (t0, t1) = (ts[w[0]], ts[w[1]]);
            let s = t1 - t0;
            // explicit Euler start
            for c in 0..n {
                z[c] = y[c] + s * fy[c];
            }
            let mut converged = false;
            for _ in 0..12 {
                self.sys.rhs(t1, &z, &mut fz)?;
                self.sys.jacobian(t1, &z, &mut jz)?;
                self.stats.rhs_evals += 1;
                let g = DVector::from_fn(n, |c, _| z[c] - y[c] - 0.5 * s * (fy[c] + fz[c]));
                let m = DMatrix::from_fn(n, n, |i, j| {
                    (if i == j { 1.0 } else { 0.0 }) - 0.5 * s * jz[i * n + j]
                });
                let Some(dz) = m.lu().solve(&g) else {
                    return Ok(None);
                };
                for c in 0..n {
                    z[c] -= dz[c];
                }
                // only a starting guess: rounding-level accuracy is not needed
                if dz.amax() <= 1e-10 * max_abs(&z).max(f64::MIN_POSITIVE) {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Ok(None);
            }
            self.sys.rhs(t1, &z, &mut fy)?;
            y.copy_from_slice(&z);
            for c in 0..n {
                u[c * k + w[1]] = y[c];
            }
        }
        Ok(Some(u))
    }

    fn solve_linear(&mut self, ts: &[f64], anchor: &[f64], h: f64) -> Result<Option<Vec<f64>>> {
        let (n, k) = (self.sys.n, self.opts.k);
        let a = self.jac_all(ts, &vec![0.0; n * k])?;
        self.stats.rhs_evals += k;
        let m = self.system_matrix(h, &a);
        let w = DVector::from_fn(n * k, |r, _| anchor[r / k]);
        Ok(m.lu().solve(&w).map(|u| u.iter().copied().collect()))
    }

    fn solve_nonlinear(&mut self, ts: &[f64], anchor: &[f64], h: f64) -> Result<Option<Vec<f64>>> {
        let Some(mut u) = self.predictor(ts, anchor)? else {
            return Ok(None);
        };
        let mut r = self.residual(ts, &u, anchor, h)?;
        let mut prev_step = f64::INFINITY;
        for _ in 0..self.opts.newton_max_iter {
            self.stats.newton_iters += 1;
            let a = self.jac_all(ts, &u)?;
            let lu = self.system_matrix(h, &a).lu();
            let Some(delta) = lu.solve(&DVector::from_column_slice(&r)) else {
                return Ok(None);
            };
            let step = delta.amax();
            if !step.is_finite() {
                return Ok(None);
            }
            let umax = max_abs(&u);
            // converged, or stalled at the rounding level of the residual
            let small = step <= self.opts.eps * umax;
            let stalled = step <= NEWTON_NOISE * umax && step > 0.5 * prev_step;
            if small || stalled {
                for (ui, di) in u.iter_mut().zip(delta.iter()) {
                    *ui -= di;
                }
                return Ok(Some(u));
            }
            prev_step = step;
            // damping judged by the size of the next simplified Newton step,
            // which is far better scaled than the raw residual on stiff panels
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..8 {
                let trial: Vec<f64> = u
                    .iter()
                    .zip(delta.iter())
                    .map(|(x, d)| x - alpha * d)
                    .collect();
                if let Ok(rt) = self.residual(ts, &trial, anchor, h) {
                    let next = lu
                        .solve(&DVector::from_column_slice(&rt))
                        .map_or(f64::INFINITY, |v| v.amax());
                    if next.is_finite()
                        && (next <= (1.0 - 0.25 * alpha) * step || step <= NEWTON_NOISE * umax)
                    {
                        u = trial;
                        r = rt;
                        accepted = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !accepted {
                return Ok(None);
            }
        }
        Ok(None)
    }

    /// Solves on `[c, d]` and returns per-component coefficient vectors when
    /// the panel is resolved.
    fn panel(
        &mut self,
        c: f64,
        d: f64,
        anchor: &[f64],
    ) -> Result<Option<(Vec<Vec<f64>>, Vec<f64>)>> {
        let (n, k) = (self.sys.n, self.opts.k);
        let ts = self.spec.grid.mapped(c, d);
        let h = 0.5 * (d - c);
        let solved = if self.sys.linear {
            self.solve_linear(&ts, anchor, h)
        } else {
            self.solve_nonlinear(&ts, anchor, h)
        };
        let u = match solved {
            Ok(Some(u)) => u,
            Ok(None) => return Ok(None),
            // a bad iterate (e.g. a vanishing derivative) only condemns the panel
            Err(e) => {
                trace!("panel [{c}, {d}] failed: {e}");
                return Ok(None);
            }
        };
        if u.iter().any(|v| !v.is_finite()) {
            // a linear solve from finite data only blows up by overflow;
            // splitting cannot help
            if self.sys.linear && anchor.iter().all(|v| v.is_finite()) {
                return Err(Error::Range(c));
            }
            return Ok(None);
        }
        let mut coeffs = Vec::with_capacity(n);
        for comp in 0..n {
            let cf = self.spec.coeffs(&u[comp * k..(comp + 1) * k]);
            let norm = l2_norm(&cf);
            let scale = norm.max(self.sys.tail_floor[comp]);
            if tail_norm(&cf) > self.opts.eps * scale {
                return Ok(None);
            }
            coeffs.push(cf);
        }
        let end = match self.dir {
            Direction::Forward => k - 1,
            Direction::Backward => 0,
        };
        let y_end = (0..n).map(|comp| u[comp * k + end]).collect();
        Ok(Some((coeffs, y_end)))
    }
}

fn sweep(
    sys: &OdeSystem,
    (lo, hi): (f64, f64),
    y_anchor: &[f64],
    opts: SolverOptions,
    dir: Direction,
) -> Result<AdaptiveSolution> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "empty interval [{lo}, {hi}]"
        )));
    }
    if y_anchor.len() != sys.n {
        return Err(Error::InvalidArgument(format!(
            "initial vector has {} entries, system has {}",
            y_anchor.len(),
            sys.n
        )));
    }
    let mut solver = PanelSolver::new(sys, dir, opts)?;
    debug_assert!(solver.anchor_node() < opts.k);
    let min_width = (hi - lo) * 2f64.powi(-40);
    let mut stack = vec![(lo, hi, 0usize)];
    let mut y = y_anchor.to_vec();
    let mut pieces: Vec<(f64, f64, Vec<Vec<f64>>)> = Vec::new();
    while let Some((c, d, level)) = stack.pop() {
        if pieces.len() >= opts.max_panels {
            return Err(Error::PanelBudget(opts.max_panels));
        }
        match solver.panel(c, d, &y)? {
            Some((coeffs, y_end)) => {
                solver.stats.deepest_level = solver.stats.deepest_level.max(level);
                pieces.push((c, d, coeffs));
                y = y_end;
            }
            None => {
                solver.stats.rejected += 1;
                if d - c <= min_width {
                    return Err(Error::MinimumWidth { c, d });
                }
                let m = 0.5 * (c + d);
                match dir {
                    Direction::Forward => {
                        stack.push((m, d, level + 1));
                        stack.push((c, m, level + 1));
                    }
                    Direction::Backward => {
                        stack.push((c, m, level + 1));
                        stack.push((m, d, level + 1));
                    }
                }
            }
        }
    }
    if dir == Direction::Backward {
        pieces.reverse();
    }
    let mut stats = solver.stats;
    stats.panels = pieces.len();
    let mut bp = vec![pieces[0].0];
    bp.extend(pieces.iter().map(|p| p.1));
    let components = (0..sys.n)
        .map(|comp| {
            PiecewiseCheb::new(
                bp.clone(),
                pieces.iter().map(|p| p.2[comp].clone()).collect(),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    debug!(
        "{} sweep on [{lo}, {hi}]: {} panels, {} rejected",
        if dir == Direction::Forward {
            "forward"
        } else {
            "backward"
        },
        stats.panels,
        stats.rejected
    );
    Ok(AdaptiveSolution { components, stats })
}

/// Initial-value sweep on `[c_start, b]`, taking panels left to right.
pub fn solve_adaptive_forward(
    sys: &OdeSystem,
    interval: (f64, f64),
    y_init: &[f64],
    opts: SolverOptions,
) -> Result<AdaptiveSolution> {
    sweep(sys, interval, y_init, opts, Direction::Forward)
}

/// Terminal-value sweep on `[a, d_end]`, taking panels right to left.
pub fn solve_adaptive_backward(
    sys: &OdeSystem,
    interval: (f64, f64),
    y_term: &[f64],
    opts: SolverOptions,
) -> Result<AdaptiveSolution> {
    sweep(sys, interval, y_term, opts, Direction::Backward)
}

/// Whether the derivative component is positive at every panel node.
fn increasing(sol: &AdaptiveSolution) -> bool {
    let Ok(grid) = crate::chebyshev::cheb_nodes(sol.components[1].k()) else {
        return false;
    };
    sol.components[1].piece_coeffs().iter().all(|cf| {
        grid.nodes()
            .iter()
            .all(|&x| crate::chebyshev::clenshaw(cf, x) > 0.0)
    })
}

/// Leading-order phase on `[a, 0]`:
/// `g0(t) = -(3/2 w int_t^0 sqrt(-q))^(2/3)`, with the integral taken in
/// `u = sqrt(-s)` where the integrand `2 u^2 sqrt(q0(-u^2))` is smooth.
/// Returns a partition resolving `g0` together with `g0, g0', g0''` at the
/// nodes of each panel, component-major.
fn leading_order_left(
    c: &Coefficient,
    omega: f64,
    a: f64,
    floor: f64,
    opts: SolverOptions,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    const MAX_DEPTH: usize = 30;
    let spec = Spectral::new(opts.k)?;
    let k = opts.k;
    let resolved = |vals: &[f64], floor: f64| {
        let cf = spec.coeffs(vals);
        let norm = l2_norm(&cf);
        tail_norm(&cf) <= opts.eps * norm.max(floor)
    };
    let h = |v: f64| 2.0 * c.q0(-v * v, omega).max(0.0).sqrt();
    // near u = 0 the integral is u^3 int_0^1 x^2 h(u x) dx, which keeps its
    // relative accuracy as u -> 0; Clenshaw-Curtis weights come from the last
    // row of the integration matrix
    const QUAD_NODES: usize = 33;
    let quad = Spectral::new(QUAD_NODES)?;
    let scaled = |u: f64| -> f64 {
        (0..QUAD_NODES)
            .map(|i| {
                let x = 0.5 * (1.0 + quad.grid.nodes()[i]);
                0.5 * quad.integ[(QUAD_NODES - 1, i)] * x * x * h(u * x)
            })
            .sum()
    };
    let ucap = (-a).sqrt();
    let u1 = ucap.min(0.5);
    let base = u1.powi(3) * scaled(u1);
    // beyond u1, a piecewise antiderivative of u^2 h(u)
    let mut ubreaks = vec![u1];
    let mut ucoeffs: Vec<Vec<f64>> = Vec::new();
    let mut offset = base;
    let mut stack = if u1 < ucap {
        vec![(u1, ucap, 0usize)]
    } else {
        Vec::new()
    };
    while let Some((u0, uend, depth)) = stack.pop() {
        let us = spec.grid.mapped(u0, uend);
        let f: Vec<f64> = us.iter().map(|&u| u * u * h(u)).collect();
        if depth < MAX_DEPTH && !resolved(&f, 0.0) {
            let m = 0.5 * (u0 + uend);
            stack.push((m, uend, depth + 1));
            stack.push((u0, m, depth + 1));
            continue;
        }
        let hw = 0.5 * (uend - u0);
        let vals: Vec<f64> = (0..k)
            .map(|i| offset + hw * (0..k).map(|j| spec.integ[(i, j)] * f[j]).sum::<f64>())
            .collect();
        offset = vals[k - 1];
        ucoeffs.push(spec.coeffs(&vals));
        ubreaks.push(uend);
    }
    let outer = if ucoeffs.is_empty() {
        None
    } else {
        Some(PiecewiseCheb::new(ubreaks, ucoeffs)?)
    };
    let w = (1.5 * omega).powf(2.0 / 3.0);
    let g0 = |t: f64| -> Result<f64> {
        let u = (-t).max(0.0).sqrt().min(ucap);
        match &outer {
            Some(p) if u > u1 => Ok(-w * p.eval(u)?.powf(2.0 / 3.0)),
            _ => Ok(-w * u * u * scaled(u).powf(2.0 / 3.0)),
        }
    };
    let mut mesh = vec![a];
    let mut guess = Vec::new();
    let mut stack = vec![(a, 0.0, 0usize)];
    while let Some((c0, d0, depth)) = stack.pop() {
        let ts = spec.grid.mapped(c0, d0);
        let g: Vec<f64> = ts.iter().map(|&t| g0(t)).collect::<Result<_>>()?;
        if depth < MAX_DEPTH && !resolved(&g, floor) {
            let m = 0.5 * (c0 + d0);
            stack.push((m, d0, depth + 1));
            stack.push((c0, m, depth + 1));
            continue;
        }
        let scale = 2.0 / (d0 - c0);
        let diff = |v: &[f64]| -> Vec<f64> {
            (0..k)
                .map(|i| scale * (0..k).map(|j| spec.diff[(i, j)] * v[j]).sum::<f64>())
                .collect()
        };
        let g1 = diff(&g);
        let g2 = diff(&g1);
        guess.push([g, g1, g2].concat());
        mesh.push(d0);
    }
    Ok((mesh, guess))
}

/// The phase on `[a, 0]` as a two-point problem: value and slope at the
/// turning point, and at `a` the second derivative of the leading-order
/// phase. On this side the linearized equation has one mode growing in each
/// direction, so a condition at each end keeps both in check.
fn nonoscillatory_side(
    c: &Coefficient,
    omega: f64,
    a: f64,
    sys: &OdeSystem,
    win: &WindowResult,
    opts: SolverOptions,
) -> Result<AdaptiveSolution> {
    let (mesh, guess) = leading_order_left(c, omega, a, sys.tail_floor()[0], opts)?;
    let left = [EndCondition {
        comp: 2,
        value: guess[0][2 * opts.k],
    }];
    let right = [
        EndCondition {
            comp: 0,
            value: win.gamma0_at_zero,
        },
        EndCondition {
            comp: 1,
            value: win.dgamma_at_zero,
        },
    ];
    solve_two_point(sys, mesh, guess, &left, &right, opts)
}

/// Extends the window values of the phase to `[a, b]` by sweeping the
/// Airy-Kummer system out from the turning point in both directions.
pub fn build_phase(
    c: &Coefficient,
    omega: f64,
    (a, b): (f64, f64),
    win: &WindowResult,
    opts: SolverOptions,
) -> Result<AiryPhase> {
    if !(a < 0.0 && 0.0 < b) {
        return Err(Error::InvalidArgument(format!(
            "domain [{a}, {b}] must contain the turning point 0 in its interior"
        )));
    }
    if !(win.dgamma_at_zero > 0.0) {
        return Err(Error::InvalidPhase(format!(
            "window gives gamma'(0) = {}",
            win.dgamma_at_zero
        )));
    }
    let sys = airy_kummer_rhs(c, omega);
    let init = [win.gamma0_at_zero, win.dgamma_at_zero, win.d2gamma_at_zero];
    let (left, start) = match solve_adaptive_backward(&sys, (a, 0.0), &init, opts) {
        Ok(sol) if increasing(&sol) => (sol, init),
        outcome => {
            debug!(
                "terminal-value sweep on [{a}, 0] unusable ({}); solving as a two-point problem",
                outcome
                    .err()
                    .map_or("phase not increasing".to_string(), |e| e.to_string())
            );
            let sol = nonoscillatory_side(c, omega, a, &sys, win, opts)?;
            // the two-point solve fixes g''(0) itself; the window value
            // differs from it by the window's rounding in g'', and starting
            // the right side from it keeps g'' continuous across 0
            let at0 = sol.eval(0.0)?;
            (sol, [init[0], init[1], at0[2]])
        }
    };
    let right = solve_adaptive_forward(&sys, (0.0, b), &start, opts)?;
    let whole = AdaptiveSolution::join(&left, &right)?;
    let mut it = whole.components.into_iter();
    let (gamma, dgamma, d2gamma) = (it.next().unwrap(), it.next().unwrap(), it.next().unwrap());
    AiryPhase::new(
        omega,
        gamma,
        dgamma,
        d2gamma,
        PhaseMeta {
            a0: win.a0,
            k: opts.k,
            eps: opts.eps,
            iterations: win.iterations,
            zeta_history: win.zeta_history.clone(),
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::builtin;

    fn exp_sys() -> OdeSystem {
        OdeSystem::linear(1, |_, a| a[0] = 1.0)
    }

    #[test]
    fn exponential_forward_one_panel() {
        let s = solve_adaptive_forward(&exp_sys(), (0.0, 1.0), &[1.0], SolverOptions::default())
            .unwrap();
        // the upper-half tail of e^t on [0, 1] at k = 16 is about 2e-11
        assert_eq!(s.stats.panels, 2);
        let one = solve_adaptive_forward(
            &exp_sys(),
            (0.0, 1.0),
            &[1.0],
            SolverOptions::new(16, 1e-10),
        )
        .unwrap();
        assert_eq!(one.stats.panels, 1);
        let e = std::f64::consts::E;
        assert!((s.eval(1.0).unwrap()[0] - e).abs() <= 1e-13 * e);
    }

    #[test]
    fn exponential_backward() {
        let s = solve_adaptive_backward(&exp_sys(), (-1.0, 0.0), &[1.0], SolverOptions::default())
            .unwrap();
        let v = s.eval(-1.0).unwrap()[0];
        assert!((v - (-1f64).exp()).abs() <= 1e-13 * (-1f64).exp());
    }

    #[test]
    fn nonlinear_path_on_exponential() {
        let sys = OdeSystem::new(1, |_, y, out| {
            out[0] = y[0];
            Ok(())
        });
        assert!(!sys.is_linear());
        let s = solve_adaptive_forward(&sys, (0.0, 1.0), &[1.0], SolverOptions::default()).unwrap();
        let e = std::f64::consts::E;
        assert!((s.eval(1.0).unwrap()[0] - e).abs() <= 1e-13 * e);
    }

    #[test]
    fn riccati_needs_several_panels() {
        // y' = y^2, y(0) = 1 has y = 1/(1 - t)
        let sys = OdeSystem::new(1, |_, y, out| {
            out[0] = y[0] * y[0];
            Ok(())
        });
        let s =
            solve_adaptive_forward(&sys, (0.0, 0.99), &[1.0], SolverOptions::default()).unwrap();
        assert!(s.stats.panels > 1);
        for t in [0.1, 0.5, 0.9, 0.99] {
            let want = 1.0 / (1.0 - t);
            assert!((s.eval(t).unwrap()[0] - want).abs() <= 1e-11 * want, "{t}");
        }
    }

    #[test]
    fn kummer_rhs_at_exact_airy_state() {
        let c = builtin("airy").unwrap();
        let omega: f64 = 1024.0;
        let w23 = omega.powf(2.0 / 3.0);
        let sys = airy_kummer_rhs(&c, omega);
        let t = 0.75;
        let mut f = [0.0; 3];
        sys.rhs(t, &[w23 * t, w23, 0.0], &mut f).unwrap();
        assert!((f[0] - w23).abs() <= 1e-15 * w23);
        assert_eq!(f[1], 0.0);
        assert!(f[2].abs() <= 1e-13 * omega * omega * w23);
        assert!(matches!(
            sys.rhs(t, &[1.0, 0.0, 1.0], &mut f),
            Err(Error::SingularDerivative(_))
        ));
    }

    #[test]
    fn kummer_jacobian_matches_differences() {
        let c = builtin("ivp-q1").unwrap();
        let sys = airy_kummer_rhs(&c, 1.5);
        let y = [0.3, 1.2, 0.4];
        let mut j = [0.0; 9];
        sys.jacobian(1.0, &y, &mut j).unwrap();
        let fd = OdeSystem::new(3, {
            let s = sys.clone();
            move |t, y, out| s.rhs(t, y, out)
        });
        let mut jf = [0.0; 9];
        fd.jacobian(1.0, &y, &mut jf).unwrap();
        for (a, b) in j.iter().zip(&jf) {
            assert!((a - b).abs() <= 1e-6 * a.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn budget_is_enforced() {
        let sys = OdeSystem::linear(2, |_, a| {
            a.copy_from_slice(&[0.0, 1.0, -1e6, 0.0]);
        });
        let opts = SolverOptions {
            max_panels: 5,
            ..SolverOptions::default()
        };
        assert!(matches!(
            solve_adaptive_forward(&sys, (0.0, 10.0), &[1.0, 0.0], opts),
            Err(Error::PanelBudget(5))
        ));
    }

    #[test]
    fn bad_arguments() {
        let o = SolverOptions::default();
        assert!(solve_adaptive_forward(&exp_sys(), (1.0, 0.0), &[1.0], o).is_err());
        assert!(solve_adaptive_forward(&exp_sys(), (0.0, 1.0), &[1.0, 2.0], o).is_err());
    }
}

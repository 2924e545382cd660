//! Global collocation for two-point problems on a partition, used where the
//! terminal-value sweep is unstable.
//!
//! Each panel carries the integral-equation collocation of the forward
//! solver with its left value left free; adjacent panels are tied by
//! continuity and the system is closed by boundary conditions split between
//! the two ends. Newton runs on the whole partition at once, then panels
//! whose expansions fail the tail test are halved and the solve repeated.

use log::debug;

use super::banded::Banded;
use super::{AdaptiveSolution, OdeSystem, SolveStats, SolverOptions, NEWTON_NOISE};
use crate::chebyshev::{clenshaw, l2_norm, tail_norm, PiecewiseCheb, Spectral};
use crate::error::{Error, Result};

/// Refinement rounds before giving up.
const MAX_ROUNDS: usize = 60;

/// A condition `y[comp] = value` at one end of the interval.
#[derive(Debug, Clone, Copy)]
pub struct EndCondition {
    pub comp: usize,
    pub value: f64,
}

struct Problem<'a> {
    sys: &'a OdeSystem,
    spec: Spectral,
    opts: SolverOptions,
    left: &'a [EndCondition],
    right: &'a [EndCondition],
    stats: SolveStats,
}

impl Problem<'_> {
    fn n(&self) -> usize {
        self.sys.dimension()
    }

    fn col(&self, p: usize, comp: usize, j: usize) -> usize {
        let (n, k) = (self.n(), self.opts.k);
        p * n * k + comp * k + j
    }

    fn state(&self, x: &[f64], p: usize, j: usize) -> Vec<f64> {
        (0..self.n()).map(|m| x[self.col(p, m, j)]).collect()
    }

    fn residual(&mut self, mesh: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        let (n, k) = (self.n(), self.opts.k);
        let panels = mesh.len() - 1;
        let mut g = Vec::with_capacity(x.len());
        for bc in self.left {
            g.push(x[self.col(0, bc.comp, 0)] - bc.value);
        }
        let mut f = vec![0.0; n * k];
        let mut fy = vec![0.0; n];
        for p in 0..panels {
            let ts = self.spec.grid.mapped(mesh[p], mesh[p + 1]);
            let h = 0.5 * (mesh[p + 1] - mesh[p]);
            for (j, &t) in ts.iter().enumerate() {
                self.sys.rhs(t, &self.state(x, p, j), &mut fy)?;
                for m in 0..n {
                    f[m * k + j] = fy[m];
                }
            }
            self.stats.rhs_evals += k;
            for m in 0..n {
                let u0 = x[self.col(p, m, 0)];
                for i in 1..k {
                    let kf: f64 = (0..k).map(|j| self.spec.integ[(i, j)] * f[m * k + j]).sum();
                    g.push(x[self.col(p, m, i)] - u0 - h * kf);
                }
            }
            if p + 1 < panels {
                for m in 0..n {
                    g.push(x[self.col(p, m, k - 1)] - x[self.col(p + 1, m, 0)]);
                }
            }
        }
        for bc in self.right {
            g.push(x[self.col(panels - 1, bc.comp, k - 1)] - bc.value);
        }
        Ok(g)
    }

    fn jacobian(&self, mesh: &[f64], x: &[f64]) -> Result<Banded> {
        let (n, k) = (self.n(), self.opts.k);
        let panels = mesh.len() - 1;
        let mut entries: Vec<(usize, usize, f64)> = Vec::new();
        let mut row = 0;
        for bc in self.left {
            entries.push((row, self.col(0, bc.comp, 0), 1.0));
            row += 1;
        }
        let mut a = vec![0.0; n * n];
        let mut jac = vec![vec![0.0; n * n]; k];
        for p in 0..panels {
            let ts = self.spec.grid.mapped(mesh[p], mesh[p + 1]);
            let h = 0.5 * (mesh[p + 1] - mesh[p]);
            for (j, &t) in ts.iter().enumerate() {
                self.sys.jacobian(t, &self.state(x, p, j), &mut a)?;
                jac[j].copy_from_slice(&a);
            }
            for m in 0..n {
                for i in 1..k {
                    entries.push((row, self.col(p, m, i), 1.0));
                    entries.push((row, self.col(p, m, 0), -1.0));
                    for (j, aj) in jac.iter().enumerate() {
                        let w = h * self.spec.integ[(i, j)];
                        if w == 0.0 {
                            continue;
                        }
                        for m2 in 0..n {
                            let v = aj[m * n + m2];
                            if v != 0.0 {
                                entries.push((row, self.col(p, m2, j), -w * v));
                            }
                        }
                    }
                    row += 1;
                }
            }
            if p + 1 < panels {
                for m in 0..n {
                    entries.push((row, self.col(p, m, k - 1), 1.0));
                    entries.push((row, self.col(p + 1, m, 0), -1.0));
                    row += 1;
                }
            }
        }
        for bc in self.right {
            entries.push((row, self.col(panels - 1, bc.comp, k - 1), 1.0));
            row += 1;
        }
        debug_assert_eq!(row, x.len());
        let (mut kl, mut ku) = (0, 0);
        for &(r, c, _) in &entries {
            kl = kl.max(r.saturating_sub(c));
            ku = ku.max(c.saturating_sub(r));
        }
        let mut m = Banded::zeros(x.len(), kl, ku);
        for (r, c, v) in entries {
            m.add(r, c, v);
        }
        Ok(m)
    }

    /// Largest Newton step component, each measured against the size of
    /// its own solution component before or after the step.
    fn scaled_norm(&self, x: &[f64], dx: &[f64]) -> f64 {
        let (n, k) = (self.n(), self.opts.k);
        let panels = x.len() / (n * k);
        let mut out: f64 = 0.0;
        for m in 0..n {
            let mut size = self.sys.tail_floor()[m];
            let mut step: f64 = 0.0;
            for p in 0..panels {
                for j in 0..k {
                    let c = self.col(p, m, j);
                    size = size.max(x[c].abs()).max((x[c] - dx[c]).abs());
                    step = step.max(dx[c].abs());
                }
            }
            out = out.max(step / size.max(f64::MIN_POSITIVE));
        }
        out
    }

    /// Newton on the whole partition; `Ok(false)` when it fails to settle.
    fn newton(&mut self, mesh: &[f64], x: &mut Vec<f64>) -> Result<bool> {
        let mut g = self.residual(mesh, x)?;
        let mut prev_step = f64::INFINITY;
        for _ in 0..2 * self.opts.newton_max_iter {
            self.stats.newton_iters += 1;
            let lu = match self.jacobian(mesh, x)?.factor() {
                Ok(lu) => lu,
                Err(_) => return Ok(false),
            };
            let dx = lu.solve(&g);
            let step = self.scaled_norm(x, &dx);
            if !step.is_finite() {
                return Ok(false);
            }
            let small = step <= self.opts.eps;
            let stalled = step <= NEWTON_NOISE && step > 0.5 * prev_step;
            if small || stalled {
                for (xi, di) in x.iter_mut().zip(&dx) {
                    *xi -= di;
                }
                return Ok(true);
            }
            prev_step = step;
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..10 {
                let trial: Vec<f64> = x.iter().zip(&dx).map(|(xi, di)| xi - alpha * di).collect();
                if let Ok(gt) = self.residual(mesh, &trial) {
                    let next = self.scaled_norm(&trial, &lu.solve(&gt));
                    if next.is_finite()
                        && (next <= (1.0 - 0.25 * alpha) * step || step <= NEWTON_NOISE)
                    {
                        *x = trial;
                        g = gt;
                        accepted = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !accepted {
                return Ok(false);
            }
        }
        Ok(false)
    }

    fn panel_coeffs(&self, x: &[f64], p: usize) -> Vec<Vec<f64>> {
        let k = self.opts.k;
        (0..self.n())
            .map(|m| {
                let vals: Vec<f64> = (0..k).map(|j| x[self.col(p, m, j)]).collect();
                self.spec.coeffs(&vals)
            })
            .collect()
    }

    fn finish(
        &self,
        mesh: Vec<f64>,
        coeffs: Vec<Vec<Vec<f64>>>,
        deepest: usize,
        rounds: usize,
    ) -> Result<AdaptiveSolution> {
        let mut stats = self.stats;
        stats.panels = mesh.len() - 1;
        stats.deepest_level = deepest;
        debug!(
            "two-point solve on [{}, {}]: {} panels after {rounds} rounds",
            mesh[0],
            mesh[mesh.len() - 1],
            stats.panels
        );
        let components = (0..self.n())
            .map(|m| PiecewiseCheb::new(mesh.clone(), coeffs.iter().map(|c| c[m].clone()).collect()))
            .collect::<Result<Vec<_>>>()?;
        Ok(AdaptiveSolution { components, stats })
    }

    /// Node values of the solution given by `coeffs` on `mesh`, sampled on
    /// the grid of `[c, d]`, component-major.
    fn sample(&self, mesh: &[f64], coeffs: &[Vec<Vec<f64>>], c: f64, d: f64) -> Vec<f64> {
        let ts = self.spec.grid.mapped(c, d);
        let mut out = vec![0.0; self.n() * ts.len()];
        for (j, &t) in ts.iter().enumerate() {
            let p = mesh[1..mesh.len() - 1].partition_point(|&b| b <= t);
            let (lo, hi) = (mesh[p], mesh[p + 1]);
            let x = ((2.0 * t - lo - hi) / (hi - lo)).clamp(-1.0, 1.0);
            for (m, cf) in coeffs[p].iter().enumerate() {
                out[m * ts.len() + j] = clenshaw(cf, x);
            }
        }
        out
    }

    /// Greedily merges runs of adjacent panels whose union still passes the
    /// tail test; `None` when nothing merges. The two end panels are kept:
    /// a mismatch in the end conditions leaves boundary layers there that
    /// can be far thinner than the node spacing of a merged panel.
    fn coarsen(&self, mesh: &[f64], coeffs: &[Vec<Vec<f64>>]) -> Option<(Vec<f64>, Vec<f64>)> {
        let (n, k) = (self.n(), self.opts.k);
        let panels = mesh.len() - 1;
        let mut out_mesh = vec![mesh[0]];
        let mut out_x = Vec::new();
        let mut i = 0;
        while i < panels {
            let mut j = i;
            let mut vals = self.sample(mesh, coeffs, mesh[i], mesh[i + 1]);
            while i > 0 && j + 2 < panels {
                let trial = self.sample(mesh, coeffs, mesh[i], mesh[j + 2]);
                let cf: Vec<Vec<f64>> = (0..n)
                    .map(|m| self.spec.coeffs(&trial[m * k..(m + 1) * k]))
                    .collect();
                if !self.resolved(&cf) {
                    break;
                }
                vals = trial;
                j += 1;
            }
            out_mesh.push(mesh[j + 1]);
            out_x.extend(vals);
            i = j + 1;
        }
        (out_mesh.len() < mesh.len()).then_some((out_mesh, out_x))
    }

    fn resolved(&self, coeffs: &[Vec<f64>]) -> bool {
        coeffs.iter().enumerate().all(|(m, cf)| {
            let norm = l2_norm(cf);
            tail_norm(cf) <= self.opts.eps * norm.max(self.sys.tail_floor()[m])
        })
    }
}

/// Solves `y' = F(t, y)` on the partition `mesh` with `left` conditions at
/// `mesh[0]` and `right` conditions at the last breakpoint, refining until
/// every panel passes the tail test. `guess[p]` holds the starting values of
/// panel `p` at its nodes, component-major.
pub fn solve_two_point(
    sys: &OdeSystem,
    mesh: Vec<f64>,
    guess: Vec<Vec<f64>>,
    left: &[EndCondition],
    right: &[EndCondition],
    opts: SolverOptions,
) -> Result<AdaptiveSolution> {
    let n = sys.dimension();
    if left.len() + right.len() != n || left.iter().chain(right).any(|c| c.comp >= n) {
        return Err(Error::InvalidArgument(format!(
            "{} end conditions for a system of dimension {n}",
            left.len() + right.len()
        )));
    }
    if mesh.len() < 2 || guess.len() + 1 != mesh.len() || mesh.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidArgument("malformed partition".into()));
    }
    let k = opts.k;
    if guess.iter().any(|g| g.len() != n * k) {
        return Err(Error::InvalidArgument(
            "starting values do not match the grid".into(),
        ));
    }
    let mut prob = Problem {
        sys,
        spec: Spectral::new(k)?,
        opts,
        left,
        right,
        stats: SolveStats::default(),
    };
    let (lo, hi) = (mesh[0], mesh[mesh.len() - 1]);
    let min_width = (hi - lo) * 2f64.powi(-40);
    let mut mesh = mesh;
    let mut levels = vec![0usize; guess.len()];
    let mut x: Vec<f64> = guess.concat();
    // the first accepted solution, kept in case the re-solve on the
    // coarsened partition does worse
    let mut fine: Option<AdaptiveSolution> = None;
    let mut run = || -> Result<AdaptiveSolution> {
        for round in 0..MAX_ROUNDS {
            if !prob.newton(&mesh, &mut x)? {
                return Err(Error::NonConvergence {
                    iterations: prob.stats.newton_iters,
                    last: f64::NAN,
                    zeta_history: Vec::new(),
                });
            }
            let panels = mesh.len() - 1;
            let coeffs: Vec<Vec<Vec<f64>>> =
                (0..panels).map(|p| prob.panel_coeffs(&x, p)).collect();
            let bad: Vec<bool> = coeffs.iter().map(|c| !prob.resolved(c)).collect();
            if !bad.iter().any(|&b| b) {
                // refinement driven by early, inaccurate iterates leaves more
                // panels than the final solution needs: merge once and go on
                // refining from there
                let merged = if fine.is_none() {
                    prob.coarsen(&mesh, &coeffs)
                } else {
                    None
                };
                let deepest = levels.iter().copied().max().unwrap_or(0);
                let sol = prob.finish(mesh.clone(), coeffs, deepest, round + 1)?;
                match merged {
                    Some((m, xc)) => {
                        debug!("coarsening {panels} panels to {}", m.len() - 1);
                        fine = Some(sol);
                        levels = vec![0; m.len() - 1];
                        mesh = m;
                        x = xc;
                        continue;
                    }
                    None => return Ok(sol),
                }
            }
            // halve the unresolved panels, starting from the current solution
            let mut new_mesh = vec![lo];
            let mut new_levels = Vec::new();
            let mut new_x = Vec::new();
            for p in 0..panels {
                let (c, d) = (mesh[p], mesh[p + 1]);
                let halves: Vec<(f64, f64)> = if bad[p] {
                    if d - c <= min_width {
                        return Err(Error::MinimumWidth { c, d });
                    }
                    prob.stats.rejected += 1;
                    let mid = 0.5 * (c + d);
                    vec![(c, mid), (mid, d)]
                } else {
                    vec![(c, d)]
                };
                for &(c2, d2) in &halves {
                    let ts = prob.spec.grid.mapped(c2, d2);
                    for cf in &coeffs[p] {
                        new_x.extend(ts.iter().map(|&t| {
                            clenshaw(cf, ((2.0 * t - c - d) / (d - c)).clamp(-1.0, 1.0))
                        }));
                    }
                    new_mesh.push(d2);
                    new_levels.push(levels[p] + usize::from(bad[p]));
                }
            }
            if new_levels.len() > opts.max_panels {
                return Err(Error::PanelBudget(opts.max_panels));
            }
            mesh = new_mesh;
            levels = new_levels;
            x = new_x;
        }
        Err(Error::PanelBudget(opts.max_panels))
    };
    let outcome = run();
    match (outcome, fine) {
        (Ok(s), Some(f)) if f.stats.panels <= s.stats.panels => Ok(f),
        (Ok(s), _) => Ok(s),
        (Err(e), Some(f)) => {
            debug!("re-solve after coarsening failed ({e}); keeping the fine partition");
            Ok(f)
        }
        (Err(e), None) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // y'' = lambda^2 y as a system: one mode grows in each direction, so
    // neither sweep direction is stable for large lambda
    fn saddle(lambda: f64) -> OdeSystem {
        OdeSystem::linear(2, move |_, a| {
            a.copy_from_slice(&[0.0, 1.0, lambda * lambda, 0.0])
        })
    }

    #[test]
    fn saddle_boundary_layers() {
        let lambda = 200.0;
        let sys = saddle(lambda);
        let opts = SolverOptions::new(16, 1e-12);
        let k = opts.k;
        let mesh = vec![0.0, 0.5, 1.0];
        let guess = vec![vec![0.0; 2 * k]; 2];
        let left = [EndCondition {
            comp: 0,
            value: 1.0,
        }];
        let right = [EndCondition {
            comp: 0,
            value: 2.0,
        }];
        let sol = solve_two_point(&sys, mesh, guess, &left, &right, opts).unwrap();
        // y = e^{-lambda t} + 2 e^{lambda (t - 1)} up to exponentially small terms
        for i in 0..=100 {
            let t = i as f64 / 100.0;
            let want = (-lambda * t).exp() + 2.0 * (lambda * (t - 1.0)).exp();
            let got = sol.eval(t).unwrap()[0];
            assert!((got - want).abs() < 1e-10, "t = {t}: {got} vs {want}");
        }
        assert!(sol.stats.panels > 2);
    }

    #[test]
    fn condition_count_is_checked() {
        let sys = saddle(1.0);
        let left = [EndCondition {
            comp: 0,
            value: 1.0,
        }];
        let err = solve_two_point(
            &sys,
            vec![0.0, 1.0],
            vec![vec![0.0; 32]],
            &left,
            &[],
            SolverOptions::default(),
        );
        assert!(err.is_err());
    }
}

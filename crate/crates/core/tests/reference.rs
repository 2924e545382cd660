mod common;

use airyphase::airy::airy_eval;
use airyphase::coeff::builtin;
use airyphase::extend::{AdaptiveSolution, SolverOptions};
use airyphase::reference::{reference_solve, REFERENCE_MAX_PANELS};
use airyphase::Error;
use common::{equispaced, max_abs};

const BI0: f64 = 1.089929068841005586885846;
const DBI0: f64 = -0.7945704253078976327526653;

fn opts(eps: f64) -> SolverOptions {
    let mut o = SolverOptions::new(16, eps);
    o.max_panels = REFERENCE_MAX_PANELS;
    o
}

fn solve(name: &str, w: f64, dom: (f64, f64), y0: f64, dy0: f64, eps: f64) -> AdaptiveSolution {
    let c = builtin(name).unwrap();
    reference_solve(&c, w, dom, 0.0, y0, dy0, opts(eps)).unwrap()
}

#[test]
fn reproduces_bi() {
    let sol = solve("airy", 1.0, (-5.0, 5.0), BI0, DBI0, 1e-13);
    let mut checked = 0;
    for t in equispaced(-5.0, 5.0, 1001) {
        let want = airy_eval(t).unwrap();
        let got = sol.eval(t).unwrap();
        if want.bi.abs() > 1.0 {
            assert!((got[0] - want.bi).abs() <= 1e-12 * want.bi.abs(), "t={t}");
            checked += 1;
        }
        assert!((got[1] - want.dbi).abs() <= 1e-12 * want.dbi.abs().max(1.0), "t={t}");
    }
    assert!(checked > 300);
}

#[test]
fn wronskian_is_constant() {
    let dom = (-0.1, 5.0);
    let a = solve("ivp-q1", 256.0, dom, 1.0, 0.0, 1e-13);
    let b = solve("ivp-q1", 256.0, dom, 0.0, 1.0, 1e-13);
    for t in equispaced(dom.0, dom.1, 1000) {
        let (ya, yb) = (a.eval(t).unwrap(), b.eval(t).unwrap());
        let w = ya[0] * yb[1] - ya[1] * yb[0];
        assert!((w - 1.0).abs() <= 1e-9, "t={t}: {w}");
    }
}

#[test]
fn tightening_eps_changes_little() {
    let dom = (0.0, 5.0);
    for eps in [1e-9, 1e-11] {
        let a = solve("ivp-q3", 256.0, dom, 1.0, 0.0, eps);
        let b = solve("ivp-q3", 256.0, dom, 1.0, 0.0, eps / 10.0);
        let ts = equispaced(dom.0, dom.1, 1000);
        let scale = max_abs(ts.iter().map(|&t| a.eval(t).unwrap()[0]));
        let diff = max_abs(ts.iter().map(|&t| a.eval(t).unwrap()[0] - b.eval(t).unwrap()[0]));
        assert!(diff <= 10.0 * eps * scale, "eps {eps:e}: {diff:e}");
    }
}

#[test]
fn cost_grows_linearly_with_omega() {
    let lo = solve("ivp-q1", 256.0, (0.0, 5.0), 1.0, 0.0, 1e-13).stats.panels as f64;
    let hi = solve("ivp-q1", 512.0, (0.0, 5.0), 1.0, 0.0, 1e-13).stats.panels as f64;
    let r = hi / lo;
    assert!((1.7..=2.3).contains(&r), "{r}");
}

#[test]
fn overflow_and_bad_arguments() {
    let c = builtin("ivp-q1").unwrap();
    // grows like e^700 before reaching -1
    assert!(matches!(
        reference_solve(&c, 1024.0, (-1.0, 0.0), 0.0, 1.0, 0.0, opts(1e-13)),
        Err(Error::Range(_))
    ));
    assert!(reference_solve(&c, 256.0, (0.0, 1.0), 2.0, 1.0, 0.0, opts(1e-13)).is_err());
    assert!(reference_solve(&c, -1.0, (0.0, 1.0), 0.0, 1.0, 0.0, opts(1e-13)).is_err());
    let mut small = opts(1e-13);
    small.max_panels = 100;
    assert!(matches!(
        reference_solve(&c, 256.0, (0.0, 5.0), 0.0, 1.0, 0.0, small),
        Err(Error::PanelBudget(100))
    ));
}

#[test]
fn endpoint_anchors() {
    // anchored at either end, the sweep runs in one direction only
    let w = 64.0;
    let mid = solve("ivp-q3", w, (0.0, 2.0), 1.0, 0.0, 1e-13);
    let at1 = mid.eval(1.0).unwrap();
    let c = builtin("ivp-q3").unwrap();
    let left = reference_solve(&c, w, (1.0, 2.0), 1.0, at1[0], at1[1], opts(1e-13)).unwrap();
    let right = reference_solve(&c, w, (0.0, 1.0), 1.0, at1[0], at1[1], opts(1e-13)).unwrap();
    let scale = max_abs(at1.iter().copied());
    for t in equispaced(1.0, 2.0, 50) {
        assert!((left.eval(t).unwrap()[0] - mid.eval(t).unwrap()[0]).abs() <= 1e-10 * scale);
    }
    assert!((right.eval(0.0).unwrap()[0] - 1.0).abs() <= 1e-10 * scale);
}

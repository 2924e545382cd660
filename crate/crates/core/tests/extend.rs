mod common;

use airyphase::coeff::builtin;
use airyphase::extend::{
    airy_kummer_rhs, build_phase, solve_adaptive_backward, solve_adaptive_forward, SolverOptions,
};
use airyphase::phase::AiryPhase;
use airyphase::window::solve_window;
use airyphase::{compute_phase, PhaseParams};
use common::{max_abs, samples, worst_jump, worst_tail};

const EPS: f64 = 1e-13;

fn phase(name: &str, omega: f64) -> AiryPhase {
    let c = builtin(name).unwrap();
    compute_phase(&c, omega, c.domain(), &PhaseParams::default()).unwrap()
}

#[test]
fn third_component_solves_airy_kummer() {
    let c = builtin("ivp-q1").unwrap();
    let w = 256.0;
    let sys = airy_kummer_rhs(&c, w);
    let t = 1.0;
    for y in [[3.0, 40.0, -2.5], [-7.0, 12.0, 30.0], [55.0, 80.0, 0.1]] {
        let mut f = [0.0; 3];
        sys.rhs(t, &y, &mut f).unwrap();
        assert_eq!((f[0], f[1]), (y[1], y[2]));
        let (g, d1, d2, d3) = (y[0], y[1], y[2], f[2]);
        let res = w * w * c.q(t, w) - g * d1 * d1 + 0.75 * (d2 / d1).powi(2) - 0.5 * d3 / d1;
        let scale = (w * w * c.q(t, w)).abs() + (g * d1 * d1).abs();
        assert!(res.abs() <= 1e-14 * scale, "{res:e}");
    }
    let mut f = [0.0; 3];
    assert!(sys.rhs(t, &[1.0, 0.0, 1.0], &mut f).is_err());
}

#[test]
fn pure_airy_sweeps_are_exact() {
    let c = builtin("airy").unwrap();
    let w = 1024f64;
    let s = w.powf(2.0 / 3.0);
    let sys = airy_kummer_rhs(&c, w);
    let opts = SolverOptions::default();
    let fwd = solve_adaptive_forward(&sys, (0.0, 5.0), &[0.0, s, 0.0], opts).unwrap();
    let g5 = fwd.eval(5.0).unwrap()[0];
    assert!((g5 - 5.0 * s).abs() <= 1e-12 * 5.0 * s, "{g5} vs {}", 5.0 * s);
    let bwd = solve_adaptive_backward(&sys, (-5.0, 0.0), &[0.0, s, 0.0], opts).unwrap();
    let gm5 = bwd.eval(-5.0).unwrap()[0];
    assert!((gm5 + 5.0 * s).abs() <= 1e-12 * 5.0 * s, "{gm5}");
}

#[test]
fn q1_forward_sweep_satisfies_the_equation() {
    let c = builtin("ivp-q1").unwrap();
    let w = 256.0;
    let win = solve_window(&c, w, 0.25, 16, EPS, 30).unwrap();
    let p = build_phase(&c, w, (-5.0, 5.0), &win, SolverOptions::default()).unwrap();
    let qmax = max_abs(samples(0.0, 5.0, 1000, 1).into_iter().map(|t| c.q(t, w)));
    let res = max_abs(
        samples(0.0, 5.0, 1000, 2)
            .into_iter()
            .map(|t| p.airy_kummer_residual(&c, t).unwrap()),
    );
    assert!(res <= 1e-8 * w * w * qmax, "{res:e}");
    // window values are the initial data of the right-hand sweep
    let v = p.values(0.0).unwrap();
    assert_eq!(v.gamma, p.gamma().eval(0.0).unwrap());
    assert!((v.dgamma - win.dgamma_at_zero).abs() <= 1e-13 * win.dgamma_at_zero);
}

#[test]
fn nonoscillatory_side_is_increasing() {
    let p = phase("ivp-q1", 256.0);
    let d = p.dgamma();
    for t in common::equispaced(-5.0, 0.0, 10_000) {
        assert!(d.eval(t).unwrap() > 0.0, "g'({t})");
    }
    for (i, w) in d.breakpoints().windows(2).enumerate() {
        if w[1] <= 0.0 {
            for t in common::equispaced(w[0], w[1], 17) {
                assert!(d.eval_in(i, t) > 0.0);
            }
        }
    }
}

#[test]
fn pure_airy_phase_is_linear() {
    let c = builtin("airy").unwrap();
    for e in [8, 12, 16, 20] {
        let w = 2f64.powi(e);
        let p = compute_phase(&c, w, (-5.0, 5.0), &PhaseParams::default()).unwrap();
        let s = w.powf(2.0 / 3.0);
        assert!(p.num_pieces() <= 4, "2^{e}: {} pieces", p.num_pieces());
        let pts = samples(-5.0, 5.0, 1000, e as u64);
        let err = max_abs(pts.iter().map(|&t| p.gamma().eval(t).unwrap() - s * t));
        assert!(err <= 1e-12 * s * 5.0, "2^{e}: {err:e}");
        let d2 = max_abs(pts.iter().map(|&t| p.d2gamma().eval(t).unwrap()));
        assert!(d2 <= 1e-8 * s, "2^{e}: {d2:e}");
    }
}

#[test]
fn coefficient_count_is_flat_in_omega() {
    let lo = phase("ivp-q1", 2f64.powi(8)).num_coeffs() as f64;
    let hi = phase("ivp-q1", 2f64.powi(20)).num_coeffs() as f64;
    assert!(hi / lo < 2.0 && lo / hi < 2.0, "{lo} vs {hi}");
}

#[test]
fn q3_phase_has_one_zero_near_the_turning_point() {
    let w = 4096.0;
    let p = phase("ivp-q3", w);
    let t0 = p.invert_phase(0.0).unwrap();
    assert!(t0.abs() * w * w <= 1.0, "zero at {t0:e}");
    let pts = common::equispaced(-5.0, 5.0, 20_001);
    let g: Vec<f64> = pts.iter().map(|&t| p.gamma().eval(t).unwrap()).collect();
    assert!(g.windows(2).all(|v| v[1] > v[0]));
    assert_eq!(g.windows(2).filter(|v| v[0].signum() != v[1].signum()).count(), 1);
}

/// Acceptance, continuity and residual invariants on every accepted
/// builtin across the frequency range.
#[test]
fn assembled_phase_invariants() {
    for name in ["airy", "ivp-q1", "ivp-q3", "bvp-q1", "bvp-q2", "bvp-q3", "legendre(100,10)"] {
        let c = builtin(name).unwrap();
        for e in [8, 10, 12, 16, 20] {
            let w = 2f64.powi(e);
            let p = compute_phase(&c, w, c.domain(), &PhaseParams::default()).unwrap();
            let floors = airy_kummer_rhs(&c, w).tail_floor().to_vec();
            for (m, f) in [p.gamma(), p.dgamma(), p.d2gamma()].into_iter().enumerate() {
                let tail = worst_tail(f, EPS, floors[m]);
                assert!(tail <= 1.0, "{name} 2^{e} component {m}: tail {tail}");
                let jump = worst_jump(f, EPS);
                assert!(jump <= 100.0, "{name} 2^{e} component {m}: jump {jump}");
            }
            let (a, b) = p.domain();
            let pts = samples(a, b, 1000, e as u64);
            let qmax = max_abs(pts.iter().map(|&t| c.q(t, w)));
            let res = max_abs(pts.iter().map(|&t| p.airy_kummer_residual(&c, t).unwrap()));
            assert!(res <= 1e-8 * w * w * qmax, "{name} 2^{e}: residual {res:e}");
            assert!(pts.iter().all(|&t| p.dgamma().eval(t).unwrap() > 0.0));
        }
    }
}

#[test]
fn domain_must_straddle_the_turning_point() {
    let c = builtin("ivp-q1").unwrap();
    let win = solve_window(&c, 256.0, 0.25, 16, EPS, 30).unwrap();
    assert!(build_phase(&c, 256.0, (0.0, 5.0), &win, SolverOptions::default()).is_err());
    assert!(build_phase(&c, 256.0, (-5.0, -1.0), &win, SolverOptions::default()).is_err());
}

#![allow(dead_code)]

use airyphase::chebyshev::{l2_norm, tail_norm, PiecewiseCheb};

/// Deterministic uniform samples in `[a, b]`.
pub fn samples(a: f64, b: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut s = seed;
    (0..n)
        .map(|_| {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            a + (b - a) * ((s >> 11) as f64 / (1u64 << 53) as f64)
        })
        .collect()
}

pub fn equispaced(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Largest `tail / (eps max(norm, floor))` over the pieces; at most 1 when
/// every piece passes the acceptance test.
pub fn worst_tail(f: &PiecewiseCheb, eps: f64, floor: f64) -> f64 {
    f.piece_coeffs()
        .iter()
        .map(|c| tail_norm(c) / (eps * l2_norm(c).max(floor)))
        .fold(0.0, f64::max)
}

/// Largest jump at an interior breakpoint relative to `eps` times the
/// largest coefficient of the two adjacent pieces.
pub fn worst_jump(f: &PiecewiseCheb, eps: f64) -> f64 {
    let bp = f.breakpoints();
    let cf = f.piece_coeffs();
    (1..bp.len() - 1)
        .map(|i| {
            let jump = (f.eval_in(i - 1, bp[i]) - f.eval_in(i, bp[i])).abs();
            let m = cf[i - 1]
                .iter()
                .chain(&cf[i])
                .fold(0f64, |m, v| m.max(v.abs()));
            jump / (eps * m)
        })
        .fold(0.0, f64::max)
}

pub fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

//! Chebyshev extremal grids, spectral differentiation and integration
//! matrices, and single-interval / piecewise Chebyshev expansions.
//!
//! Nodes are always stored in ascending order,
//! `x_i = cos(pi (k - i) / (k - 1))` for `i = 1..k`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// The `k`-point Chebyshev extremal grid on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebGrid {
    nodes: Vec<f64>,
}

impl ChebGrid {
    pub fn k(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Nodes mapped affinely onto `[c, d]`.
    pub fn mapped(&self, c: f64, d: f64) -> Vec<f64> {
        let (mid, half) = ((c + d) / 2.0, (d - c) / 2.0);
        let last = self.nodes.len() - 1;
        self.nodes
            .iter()
            .enumerate()
            .map(|(i, &x)| match i {
                0 => c,
                i if i == last => d,
                _ => mid + half * x,
            })
            .collect()
    }
}

fn check_k(k: usize) -> Result<()> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!(
            "Chebyshev grids need at least 2 nodes, got {k}"
        )));
    }
    Ok(())
}

/// `cos(m pi / n)` for any integer `m`, evaluated through `sin` so that
/// symmetric nodes come out exactly antisymmetric.
fn cos_pi_ratio(m: usize, n: usize) -> f64 {
    let m = m % (2 * n);
    // cos(m pi / n) = sin(pi (n - 2m) / (2n))
    let num = n as f64 - 2.0 * m as f64;
    (PI * num / (2.0 * n as f64)).sin()
}

pub fn cheb_nodes(k: usize) -> Result<ChebGrid> {
    check_k(k)?;
    let n = k - 1;
    // cos(pi (n - j) / n) = sin(pi (2j - n) / (2n))
    let nodes = (0..k)
        .map(|j| (PI * (2.0 * j as f64 - n as f64) / (2.0 * n as f64)).sin())
        .collect();
    Ok(ChebGrid { nodes })
}

/// Spectral differentiation matrix on the ascending extremal grid.
///
/// Off-diagonal entries come from the barycentric weights
/// `w_j = (-1)^j` (halved at the endpoints); the diagonal is the negative
/// row sum so that constants are annihilated to rounding.
pub fn diff_matrix(k: usize) -> Result<DMatrix<f64>> {
    let grid = cheb_nodes(k)?;
    let x = grid.nodes();
    let w: Vec<f64> = (0..k)
        .map(|j| {
            let s = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == k - 1 {
                s / 2.0
            } else {
                s
            }
        })
        .collect();
    let mut d = DMatrix::zeros(k, k);
    for i in 0..k {
        let mut row_sum = 0.0;
        for j in 0..k {
            if i != j {
                let v = (w[j] / w[i]) / (x[i] - x[j]);
                d[(i, j)] = v;
                row_sum += v;
            }
        }
        d[(i, i)] = -row_sum;
    }
    Ok(d)
}

/// Matrix of the map from values at the grid to Chebyshev coefficients.
pub fn vals_to_coeffs_matrix(k: usize) -> Result<DMatrix<f64>> {
    check_k(k)?;
    let n = k - 1;
    let mut m = DMatrix::zeros(k, k);
    for j in 0..k {
        let cj = if j == 0 || j == n { 1.0 } else { 2.0 };
        for i in 0..k {
            let wi = if i == 0 || i == n { 0.5 } else { 1.0 };
            // ascending node i sits at angle (n - i) pi / n
            m[(j, i)] = cj / n as f64 * wi * cos_pi_ratio(j * (n - i), n);
        }
    }
    Ok(m)
}

/// Chebyshev coefficients of the interpolant through `values` sampled at the
/// ascending extremal grid.
pub fn vals_to_coeffs(values: &[f64]) -> Result<Vec<f64>> {
    let k = values.len();
    check_k(k)?;
    let n = k - 1;
    let mut out = vec![0.0; k];
    for (j, c) in out.iter_mut().enumerate() {
        let mut s = 0.0;
        for (i, &v) in values.iter().enumerate() {
            let wi = if i == 0 || i == n { 0.5 } else { 1.0 };
            s += wi * v * cos_pi_ratio(j * (n - i), n);
        }
        let cj = if j == 0 || j == n { 1.0 } else { 2.0 };
        *c = cj * s / n as f64;
    }
    Ok(out)
}

/// Values at the ascending extremal grid of the series with `coeffs`.
pub fn coeffs_to_vals(coeffs: &[f64]) -> Result<Vec<f64>> {
    let k = coeffs.len();
    check_k(k)?;
    let n = k - 1;
    Ok((0..k)
        .map(|i| {
            coeffs
                .iter()
                .enumerate()
                .map(|(j, &c)| c * cos_pi_ratio(j * (n - i), n))
                .sum()
        })
        .collect())
}

/// Indefinite integration matrix: values of `p` at the grid to values of
/// `int_{-1}^{t} p(s) ds` at the grid, exact for degree `< k`.
pub fn integration_matrix(k: usize) -> Result<DMatrix<f64>> {
    let v2c = vals_to_coeffs_matrix(k)?;
    let n = k - 1;
    let mut out = DMatrix::zeros(k, k);
    for col in 0..k {
        let c: Vec<f64> = (0..k).map(|j| v2c[(j, col)]).collect();
        // coefficients of the antiderivative, degree n + 1
        let mut b = vec![0.0; k + 1];
        let get = |j: usize| if j < k { c[j] } else { 0.0 };
        b[1] = get(0) - get(2) / 2.0;
        for (j, bj) in b.iter_mut().enumerate().skip(2) {
            *bj = (get(j - 1) - get(j + 1)) / (2.0 * j as f64);
        }
        // value at -1 of the antiderivative
        let at_minus_one: f64 = b
            .iter()
            .enumerate()
            .map(|(j, &v)| if j % 2 == 0 { v } else { -v })
            .sum();
        for i in 1..k {
            let mut s = 0.0;
            for (j, &bj) in b.iter().enumerate() {
                s += bj * cos_pi_ratio(j * (n - i), n);
            }
            out[(i, col)] = s - at_minus_one;
        }
    }
    Ok(out)
}

/// Clenshaw evaluation of `sum c_j T_j(x)` at `x` in `[-1, 1]`. Near the
/// endpoints the recurrence is run on differences of consecutive terms
/// (Reinsch's form), which keeps the rounding error linear in the length.
pub fn clenshaw(coeffs: &[f64], x: f64) -> f64 {
    let c0 = coeffs.first().copied().unwrap_or(0.0);
    let rest = coeffs.iter().skip(1).rev();
    if x.abs() <= 0.5 {
        let (mut b1, mut b2) = (0.0, 0.0);
        let x2 = 2.0 * x;
        for &c in rest {
            let b0 = c + x2 * b1 - b2;
            b2 = b1;
            b1 = b0;
        }
        return c0 + x * b1 - b2;
    }
    // x = s + u with s = +-1; d carries b_j - s b_{j+1}
    let s = x.signum();
    let u = x - s;
    let (mut b, mut d) = (0.0, 0.0);
    for &c in rest {
        d = c + 2.0 * u * b + s * d;
        b = d + s * b;
    }
    c0 + u * b + s * d
}

/// Coefficients of the derivative (with respect to `x` in `[-1, 1]`) of a
/// Chebyshev series. The result has the same length, last entry zero.
pub fn derivative_coeffs(coeffs: &[f64]) -> Vec<f64> {
    let k = coeffs.len();
    let mut d = vec![0.0; k];
    if k < 2 {
        return d;
    }
    for j in (0..k - 1).rev() {
        let next = if j + 2 < k { d[j + 2] } else { 0.0 };
        d[j] = next + 2.0 * (j + 1) as f64 * coeffs[j + 1];
    }
    d[0] /= 2.0;
    d
}

/// l2 norm, scaled so that entries near the top of the double range do not
/// overflow when squared.
pub fn l2_norm(v: &[f64]) -> f64 {
    let m = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if m == 0.0 || !m.is_finite() {
        return m;
    }
    m * v.iter().map(|x| (x / m) * (x / m)).sum::<f64>().sqrt()
}

/// Ratio of the l2 mass of the upper half of a coefficient vector to its
/// total l2 mass. Zero vectors give 0.
pub fn tail_ratio(coeffs: &[f64]) -> f64 {
    let total = l2_norm(coeffs);
    if total == 0.0 {
        return 0.0;
    }
    tail_norm(coeffs) / total
}

/// l2 norm of the upper-half coefficients, the numerator of [`tail_ratio`].
pub fn tail_norm(coeffs: &[f64]) -> f64 {
    l2_norm(&coeffs[(coeffs.len() / 2 + 1).min(coeffs.len())..])
}

/// A Chebyshev expansion on a single interval `[c, d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebExpansion {
    c: f64,
    d: f64,
    coeffs: Vec<f64>,
}

impl ChebExpansion {
    pub fn new(c: f64, d: f64, coeffs: Vec<f64>) -> Result<Self> {
        check_k(coeffs.len())?;
        if !(d > c) {
            return Err(Error::InvalidArgument(format!(
                "expansion interval [{c}, {d}] is empty"
            )));
        }
        Ok(Self { c, d, coeffs })
    }

    /// Builds the expansion interpolating `values` at the grid mapped to `[c, d]`.
    pub fn from_values(c: f64, d: f64, values: &[f64]) -> Result<Self> {
        Self::new(c, d, vals_to_coeffs(values)?)
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.c, self.d)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    fn to_unit(&self, t: f64) -> f64 {
        (2.0 * t - (self.d + self.c)) / (self.d - self.c)
    }

    pub fn eval(&self, t: f64) -> f64 {
        clenshaw(&self.coeffs, self.to_unit(t))
    }

    /// Expansion of the derivative with respect to `t`.
    pub fn derivative(&self) -> Self {
        let scale = 2.0 / (self.d - self.c);
        let coeffs = derivative_coeffs(&self.coeffs)
            .into_iter()
            .map(|v| v * scale)
            .collect();
        Self {
            c: self.c,
            d: self.d,
            coeffs,
        }
    }
}

/// Piecewise Chebyshev expansion over `xi_0 < xi_1 < ... < xi_m`.
///
/// Piece `i` owns `[xi_i, xi_{i+1})`; the last piece is closed on the right.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseCheb {
    breakpoints: Vec<f64>,
    coeffs: Vec<Vec<f64>>,
}

impl PiecewiseCheb {
    pub fn new(breakpoints: Vec<f64>, coeffs: Vec<Vec<f64>>) -> Result<Self> {
        if breakpoints.len() < 2 || coeffs.len() != breakpoints.len() - 1 {
            return Err(Error::InvalidArgument(format!(
                "{} breakpoints cannot carry {} pieces",
                breakpoints.len(),
                coeffs.len()
            )));
        }
        if breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument(
                "breakpoints must be strictly increasing".into(),
            ));
        }
        let k = coeffs[0].len();
        check_k(k)?;
        if coeffs.iter().any(|c| c.len() != k) {
            return Err(Error::InvalidArgument(
                "all pieces must have the same number of coefficients".into(),
            ));
        }
        Ok(Self {
            breakpoints,
            coeffs,
        })
    }

    /// Assembles contiguous expansions, which must share endpoints exactly.
    pub fn from_pieces(pieces: &[ChebExpansion]) -> Result<Self> {
        let first = pieces
            .first()
            .ok_or_else(|| Error::InvalidArgument("no pieces".into()))?;
        let mut breakpoints = vec![first.c];
        for (i, p) in pieces.iter().enumerate() {
            if i > 0 && p.c != breakpoints[i] {
                return Err(Error::InvalidArgument(format!(
                    "piece {i} starts at {} but the previous one ends at {}",
                    p.c, breakpoints[i]
                )));
            }
            breakpoints.push(p.d);
        }
        Self::new(
            breakpoints,
            pieces.iter().map(|p| p.coeffs.clone()).collect(),
        )
    }

    pub fn k(&self) -> usize {
        self.coeffs[0].len()
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn piece_coeffs(&self) -> &[Vec<f64>] {
        &self.coeffs
    }

    pub fn num_pieces(&self) -> usize {
        self.coeffs.len()
    }

    /// Total number of stored coefficients.
    pub fn num_coeffs(&self) -> usize {
        self.coeffs.len() * self.k()
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.breakpoints[0], *self.breakpoints.last().unwrap())
    }

    pub fn piece(&self, i: usize) -> ChebExpansion {
        ChebExpansion {
            c: self.breakpoints[i],
            d: self.breakpoints[i + 1],
            coeffs: self.coeffs[i].clone(),
        }
    }

    /// Index of the piece owning `t`.
    pub fn locate(&self, t: f64) -> Result<usize> {
        let (lo, hi) = self.domain();
        if !(t >= lo && t <= hi) {
            return Err(Error::Domain { t, lo, hi });
        }
        let m = self.coeffs.len();
        let idx = self.breakpoints.partition_point(|&b| b <= t);
        Ok((idx - 1).min(m - 1))
    }

    pub fn eval_in(&self, piece: usize, t: f64) -> f64 {
        let (c, d) = (self.breakpoints[piece], self.breakpoints[piece + 1]);
        clenshaw(&self.coeffs[piece], (2.0 * t - (d + c)) / (d - c))
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        let i = self.locate(t)?;
        Ok(self.eval_in(i, t))
    }

    pub fn derivative(&self) -> Self {
        let coeffs = (0..self.num_pieces())
            .map(|i| self.piece(i).derivative().coeffs)
            .collect();
        Self {
            breakpoints: self.breakpoints.clone(),
            coeffs,
        }
    }
}

pub fn eval_piecewise(f: &PiecewiseCheb, t: f64) -> Result<f64> {
    f.eval(t)
}

#[derive(Serialize, Deserialize)]
struct PiecewiseRepr {
    breakpoints: Vec<f64>,
    k: usize,
    coeffs: Vec<Vec<f64>>,
}

impl Serialize for PiecewiseCheb {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PiecewiseRepr {
            breakpoints: self.breakpoints.clone(),
            k: self.k(),
            coeffs: self.coeffs.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PiecewiseCheb {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = PiecewiseRepr::deserialize(d)?;
        if repr.coeffs.iter().any(|c| c.len() != repr.k) {
            return Err(serde::de::Error::custom("coefficient rows do not match k"));
        }
        PiecewiseCheb::new(repr.breakpoints, repr.coeffs).map_err(serde::de::Error::custom)
    }
}

/// Chebyshev machinery for a fixed order, built once and shared.
#[derive(Debug, Clone)]
pub struct Spectral {
    pub grid: ChebGrid,
    pub diff: DMatrix<f64>,
    pub integ: DMatrix<f64>,
    pub v2c: DMatrix<f64>,
}

impl Spectral {
    pub fn new(k: usize) -> Result<Self> {
        Ok(Self {
            grid: cheb_nodes(k)?,
            diff: diff_matrix(k)?,
            integ: integration_matrix(k)?,
            v2c: vals_to_coeffs_matrix(k)?,
        })
    }

    pub fn k(&self) -> usize {
        self.grid.k()
    }

    pub fn coeffs(&self, values: &[f64]) -> Vec<f64> {
        let k = self.k();
        (0..k)
            .map(|j| (0..k).map(|i| self.v2c[(j, i)] * values[i]).sum())
            .collect()
    }
}

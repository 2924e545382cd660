//! Band LU with partial pivoting, enough for the block-bidiagonal systems of
//! the global collocation solve.

use crate::error::{Error, Result};

/// Square matrix with `kl` sub- and `ku` super-diagonals, stored by rows
/// with room for the fill that row interchanges produce.
#[derive(Debug, Clone)]
pub struct Banded {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl Banded {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.kl + self.ku);
        i * self.width + j + self.kl - i
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(
            j + self.kl >= i && j <= i + self.ku,
            "entry ({i}, {j}) is outside the band"
        );
        let p = self.idx(i, j);
        self.data[p] += v;
    }

    /// Factors in place and returns the row interchanges.
    pub fn factor(mut self) -> Result<BandedLu> {
        let (n, kl) = (self.n, self.kl);
        let span = kl + self.ku;
        let mut piv = vec![0usize; n];
        for j in 0..n {
            let last_row = (j + kl).min(n - 1);
            let mut p = j;
            let mut best = self.data[self.idx(j, j)].abs();
            for i in j + 1..=last_row {
                let v = self.data[self.idx(i, j)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(Error::SingularSystem(format!("band pivot {j} vanishes")));
            }
            piv[j] = p;
            let last_col = (j + span).min(n - 1);
            if p != j {
                for col in j..=last_col {
                    let (a, b) = (self.idx(j, col), self.idx(p, col));
                    self.data.swap(a, b);
                }
            }
            let d = self.data[self.idx(j, j)];
            for i in j + 1..=last_row {
                let ij = self.idx(i, j);
                let l = self.data[ij] / d;
                self.data[ij] = l;
                if l == 0.0 {
                    continue;
                }
                for col in j + 1..=last_col {
                    let (a, b) = (self.idx(i, col), self.idx(j, col));
                    self.data[a] -= l * self.data[b];
                }
            }
        }
        Ok(BandedLu { m: self, piv })
    }
}

#[derive(Debug, Clone)]
pub struct BandedLu {
    m: Banded,
    piv: Vec<usize>,
}

impl BandedLu {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let m = &self.m;
        let (n, kl) = (m.n, m.kl);
        let span = kl + m.ku;
        let mut x = b.to_vec();
        for j in 0..n {
            x.swap(j, self.piv[j]);
            let xj = x[j];
            if xj != 0.0 {
                for i in j + 1..=(j + kl).min(n - 1) {
                    x[i] -= m.data[m.idx(i, j)] * xj;
                }
            }
        }
        for j in (0..n).rev() {
            let mut s = x[j];
            for col in j + 1..=(j + span).min(n - 1) {
                s -= m.data[m.idx(j, col)] * x[col];
            }
            x[j] = s / m.data[m.idx(j, j)];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn matches_dense_solve() {
        let n = 40;
        let (kl, ku) = (3, 5);
        let mut dense = DMatrix::zeros(n, n);
        let mut band = Banded::zeros(n, kl, ku);
        let mut seed = 7u64;
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                seed = seed
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                // small diagonal forces interchanges
                let v = (seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
                    + if i == j { 1e-3 } else { 0.0 };
                dense[(i, j)] = v;
                band.add(i, j, v);
            }
        }
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let want = dense.lu().solve(&DVector::from_column_slice(&b)).unwrap();
        let got = band.factor().unwrap().solve(&b);
        for i in 0..n {
            assert!((want[i] - got[i]).abs() < 1e-9 * want.amax(), "{i}");
        }
    }

    #[test]
    fn singular_is_reported() {
        let mut band = Banded::zeros(3, 1, 1);
        band.add(0, 0, 1.0);
        band.add(1, 0, 1.0);
        band.add(2, 2, 1.0);
        assert!(band.factor().is_err());
    }
}

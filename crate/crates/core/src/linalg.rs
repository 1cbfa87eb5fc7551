//! Banded direct solvers.
//!
//! Five-point and three-point stencils on a row-major grid give matrices
//! whose nonzeros sit within `nx` diagonals of the main one, so a dense band
//! factorization costs `O(N * nx^2)` and is reused across right-hand sides.

use crate::error::{Error, Result};

/// General band matrix with `kl` sub- and `ku` super-diagonals, factored by
/// Gaussian elimination with partial pivoting.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        // Extra kl super-diagonals of fill-in from row interchanges.
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.kl + self.ku);
        i * self.width + (j + self.kl - i)
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(
            j + self.kl >= i && j <= i + self.ku,
            "entry ({i},{j}) outside band"
        );
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl < i || j > i + self.ku {
            return 0.0;
        }
        self.data[self.slot(i, j)]
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.data[self.slot(i, j)] * x[j]).sum()
            })
            .collect()
    }

    /// LU factorization with partial pivoting, consuming the matrix.
    pub fn factor(mut self) -> Result<BandLu> {
        let n = self.n;
        let (kl, ku) = (self.kl, self.ku);
        let mut pivots = vec![0usize; n];
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tiny = scale * f64::EPSILON * 1e-3;
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + kl + ku).min(n - 1);
            let mut p = k;
            let mut pmax = self.data[self.slot(k, k)].abs();
            for i in k + 1..=last_row {
                let v = self.data[self.slot(i, k)].abs();
                if v > pmax {
                    pmax = v;
                    p = i;
                }
            }
            if !(pmax > tiny) {
                return Err(Error::Factorization(k));
            }
            pivots[k] = p;
            if p != k {
                for j in k..=last_col {
                    let (a, b) = (self.slot(k, j), self.slot(p, j));
                    self.data.swap(a, b);
                }
            }
            let pivot = self.data[self.slot(k, k)];
            for i in k + 1..=last_row {
                let sik = self.slot(i, k);
                let l = self.data[sik] / pivot;
                self.data[sik] = l;
                if l != 0.0 {
                    for j in k + 1..=last_col {
                        let akj = self.data[self.slot(k, j)];
                        let sij = self.slot(i, j);
                        self.data[sij] -= l * akj;
                    }
                }
            }
        }
        Ok(BandLu { m: self, pivots })
    }
}

/// Factored form of a [`BandMatrix`].
#[derive(Debug, Clone)]
pub struct BandLu {
    m: BandMatrix,
    pivots: Vec<usize>,
}

impl BandLu {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let m = &self.m;
        let n = m.n;
        let mut x = b.to_vec();
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                x.swap(k, p);
            }
            let xk = x[k];
            for i in k + 1..=(k + m.kl).min(n - 1) {
                x[i] -= m.data[m.slot(i, k)] * xk;
            }
        }
        for k in (0..n).rev() {
            let last_col = (k + m.kl + m.ku).min(n - 1);
            let mut s = x[k];
            for j in k + 1..=last_col {
                s -= m.data[m.slot(k, j)] * x[j];
            }
            x[k] = s / m.data[m.slot(k, k)];
        }
        x
    }
}

/// Symmetric positive definite band matrix (lower band stored) with an
/// in-place Cholesky factorization.
#[derive(Debug, Clone)]
pub struct SymBandMatrix {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl SymBandMatrix {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + (self.bw + j - i)
    }

    /// Adds `v` at `(i, j)`; only the lower triangle (`j <= i`) is stored.
    pub fn add_lower(&mut self, i: usize, j: usize, v: f64) {
        assert!(j <= i && i - j <= self.bw, "entry ({i},{j}) outside band");
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    pub fn factor(mut self) -> Result<BandCholesky> {
        let (n, bw) = (self.n, self.bw);
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let k0 = j0.max(j.saturating_sub(bw));
                let mut s = self.data[self.slot(i, j)];
                for k in k0..j {
                    s -= self.data[self.slot(i, k)] * self.data[self.slot(j, k)];
                }
                if i == j {
                    if !(s > 0.0) {
                        return Err(Error::Factorization(i));
                    }
                    let sii = self.slot(i, i);
                    self.data[sii] = s.sqrt();
                } else {
                    let sij = self.slot(i, j);
                    self.data[sij] = s / self.data[self.slot(j, j)];
                }
            }
        }
        Ok(BandCholesky { l: self })
    }
}

/// Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    l: SymBandMatrix,
}

impl BandCholesky {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let l = &self.l;
        let n = l.n;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in i.saturating_sub(l.bw)..i {
                s -= l.data[l.slot(i, k)] * y[k];
            }
            y[i] = s / l.data[l.slot(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..=(i + l.bw).min(n - 1) {
                s -= l.data[l.slot(k, i)] * y[k];
            }
            y[i] = s / l.data[l.slot(i, i)];
        }
        y
    }
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_band(n: usize, kl: usize, ku: usize, rng: &mut ChaCha8Rng) -> BandMatrix {
        let mut m = BandMatrix::zeros(n, kl, ku);
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                m.add(i, j, rng.gen_range(-1.0..1.0));
            }
        }
        m
    }

    #[test]
    fn lu_solves_random_nonsymmetric_band() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(n, kl, ku) in &[(1, 0, 0), (5, 1, 1), (40, 3, 2), (64, 8, 8)] {
            let m = random_band(n, kl, ku, &mut rng);
            let x: Vec<f64> = (0..n).map(|i| (i as f64).sin() + 2.0).collect();
            let b = m.matvec(&x);
            let lu = m.factor().unwrap();
            let y = lu.solve(&b);
            let err = x.iter().zip(&y).fold(0.0f64, |e, (a, b)| e.max((a - b).abs()));
            assert!(err < 1e-8, "n={n} err={err}");
        }
    }

    #[test]
    fn lu_needs_pivoting() {
        // Zero leading entry forces a row swap.
        let mut m = BandMatrix::zeros(2, 1, 1);
        m.add(0, 1, 1.0);
        m.add(1, 0, 1.0);
        m.add(1, 1, 1.0);
        let x = m.factor().unwrap().solve(&[2.0, 5.0]);
        assert!((x[0] - 3.0).abs() < 1e-14 && (x[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let m = BandMatrix::zeros(3, 1, 1);
        assert!(matches!(m.factor(), Err(Error::Factorization(0))));
    }

    #[test]
    fn cholesky_matches_lu_on_tridiagonal() {
        let n = 30;
        let mut s = SymBandMatrix::zeros(n, 1);
        let mut g = BandMatrix::zeros(n, 1, 1);
        for i in 0..n {
            s.add_lower(i, i, 2.5);
            g.add(i, i, 2.5);
            if i > 0 {
                s.add_lower(i, i - 1, -1.0);
                g.add(i, i - 1, -1.0);
                g.add(i - 1, i, -1.0);
            }
        }
        let b: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let x1 = s.factor().unwrap().solve(&b);
        let x2 = g.factor().unwrap().solve(&b);
        for (a, b) in x1.iter().zip(&x2) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let mut s = SymBandMatrix::zeros(2, 1);
        s.add_lower(0, 0, 1.0);
        s.add_lower(1, 0, 2.0);
        s.add_lower(1, 1, 1.0);
        assert!(s.factor().is_err());
    }
}

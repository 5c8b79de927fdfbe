//! Banded matrices with an LU factorization under partial pivoting.

use crate::error::{Error, Result};

/// Square matrix with `kl` sub- and `ku` super-diagonals.
///
/// Rows carry `kl` extra columns on the right so the factorization has room for pivoting fill.
#[derive(Clone, Debug)]
pub struct Banded {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl Banded {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Banded {
        let width = 2 * kl + ku + 1;
        Banded { n, kl, ku, width, data: vec![0.0; n * width] }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    fn idx(&self, r: usize, c: usize) -> usize {
        debug_assert!(c + self.kl >= r && c <= r + self.kl + self.ku);
        r * self.width + c + self.kl - r
    }

    fn in_band(&self, r: usize, c: usize) -> bool {
        c + self.kl >= r && c <= r + self.ku
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        if self.in_band(r, c) {
            self.data[self.idx(r, c)]
        } else {
            0.0
        }
    }

    /// Add `v` to entry `(r, c)`; the entry must lie inside the band.
    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        assert!(self.in_band(r, c), "entry ({r}, {c}) outside the band");
        let i = self.idx(r, c);
        self.data[i] += v;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|r| {
                let lo = r.saturating_sub(self.kl);
                let hi = (r + self.ku + 1).min(self.n);
                (lo..hi).map(|c| self.data[self.idx(r, c)] * x[c]).sum()
            })
            .collect()
    }

    /// LU with row pivoting, in place.
    pub fn factor(mut self) -> Result<BandedLu> {
        let n = self.n;
        let reach = self.kl + self.ku;
        let mut piv = vec![0usize; n];
        for k in 0..n {
            let last = (k + self.kl).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.idx(k, k)].abs();
            for r in k + 1..=last {
                let v = self.data[self.idx(r, k)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(Error::BadParams(format!("singular banded matrix at row {k}")));
            }
            piv[k] = p;
            let cmax = (k + reach).min(n - 1);
            if p != k {
                for c in k..=cmax {
                    let (a, b) = (self.idx(k, c), self.idx(p, c));
                    self.data.swap(a, b);
                }
            }
            let pivot = self.data[self.idx(k, k)];
            for r in k + 1..=last {
                let ir = self.idx(r, k);
                let l = self.data[ir] / pivot;
                self.data[ir] = l;
                if l == 0.0 {
                    continue;
                }
                for c in k + 1..=cmax {
                    let kc = self.data[self.idx(k, c)];
                    let rc = self.idx(r, c);
                    self.data[rc] -= l * kc;
                }
            }
        }
        Ok(BandedLu { m: self, piv })
    }
}

#[derive(Clone, Debug)]
pub struct BandedLu {
    m: Banded,
    piv: Vec<usize>,
}

impl BandedLu {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let a = &self.m;
        let n = a.n;
        let mut x = b.to_vec();
        for k in 0..n {
            x.swap(k, self.piv[k]);
            let xk = x[k];
            if xk != 0.0 {
                for r in k + 1..=(k + a.kl).min(n - 1) {
                    x[r] -= a.data[a.idx(r, k)] * xk;
                }
            }
        }
        for k in (0..n).rev() {
            let mut s = x[k];
            for c in k + 1..=(k + a.kl + a.ku).min(n - 1) {
                s -= a.data[a.idx(k, c)] * x[c];
            }
            x[k] = s / a.data[a.idx(k, k)];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut m: Vec<Vec<f64>> = a.iter().zip(b).map(|(r, v)| [r.clone(), vec![*v]].concat()).collect();
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| m[i][k].abs().total_cmp(&m[j][k].abs())).unwrap();
            m.swap(k, p);
            for r in k + 1..n {
                let l = m[r][k] / m[k][k];
                for c in k..=n {
                    m[r][c] -= l * m[k][c];
                }
            }
        }
        let mut x = vec![0.0; n];
        for k in (0..n).rev() {
            x[k] = (m[k][n] - (k + 1..n).map(|c| m[k][c] * x[c]).sum::<f64>()) / m[k][k];
        }
        x
    }

    #[test]
    fn tridiagonal_system() {
        let n = 50;
        let mut a = Banded::zeros(n, 1, 1);
        for i in 0..n {
            a.add(i, i, 2.0);
            if i > 0 {
                a.add(i, i - 1, -1.0);
            }
            if i + 1 < n {
                a.add(i, i + 1, -1.0);
            }
        }
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let b = a.matvec(&x);
        let y = a.factor().unwrap().solve(&b);
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn singular_is_reported() {
        let a = Banded::zeros(4, 1, 1);
        assert!(a.factor().is_err());
    }

    proptest! {
        #[test]
        fn matches_dense_elimination(
            n in 3usize..30,
            kl in 0usize..4,
            ku in 0usize..4,
            seed in 0u64..1000,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
            let mut a = Banded::zeros(n, kl, ku);
            let mut dense = vec![vec![0.0; n]; n];
            for r in 0..n {
                for c in r.saturating_sub(kl)..(r + ku + 1).min(n) {
                    let v: f64 = rng.gen_range(-1.0..1.0) + if r == c { 0.1 } else { 0.0 };
                    a.add(r, c, v);
                    dense[r][c] = v;
                }
            }
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let expected = dense_solve(&dense, &b);
            prop_assume!(expected.iter().all(|v| v.abs() < 1e6));
            let got = a.factor().unwrap().solve(&b);
            for (u, v) in expected.iter().zip(&got) {
                prop_assert!((u - v).abs() <= 1e-8 * u.abs().max(1.0));
            }
        }
    }
}

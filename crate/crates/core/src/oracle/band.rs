//! Banded LU factorization with partial pivoting for complex matrices.
//!
//! Row `r` stores columns `r - kl ..= r + kl + ku`, which leaves room for
//! the fill-in that row interchanges create in `U`. Interchanges touch only
//! the columns not yet eliminated and multipliers stay where they were
//! computed, so the solve replays pivots and eliminations step by step.

use num_complex::Complex64;

#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<Complex64>,
}

#[derive(Debug, Clone)]
pub struct BandLu {
    m: BandMatrix,
    piv: Vec<usize>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        BandMatrix {
            n,
            kl,
            ku,
            width,
            data: vec![Complex64::new(0.0, 0.0); n * width],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn offset(&self, r: usize, c: usize) -> usize {
        debug_assert!(c + self.kl >= r && c <= r + self.kl + self.ku);
        r * self.width + (c + self.kl - r)
    }

    /// Adds `v` at `(r, c)`, which must lie inside the declared band.
    pub fn add(&mut self, r: usize, c: usize, v: Complex64) {
        assert!(
            c + self.kl >= r && c <= r + self.ku,
            "({r}, {c}) lies outside the band"
        );
        let o = self.offset(r, c);
        self.data[o] += v;
    }

    pub fn clear_row(&mut self, r: usize) {
        let start = r * self.width;
        self.data[start..start + self.width].fill(Complex64::new(0.0, 0.0));
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        if c + self.kl < r || c > r + self.kl + self.ku {
            Complex64::new(0.0, 0.0)
        } else {
            self.data[self.offset(r, c)]
        }
    }

    /// Factors in place. Fails with the index of the first zero pivot.
    pub fn factor(mut self) -> Result<BandLu, usize> {
        let n = self.n;
        let (kl, reach) = (self.kl, self.kl + self.ku);
        let mut piv = vec![0usize; n];
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + reach).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.offset(k, k)].norm_sqr();
            for r in k + 1..=last_row {
                let v = self.data[self.offset(r, k)].norm_sqr();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            piv[k] = p;
            if best == 0.0 {
                return Err(k);
            }
            if p != k {
                for c in k..=last_col {
                    let (a, b) = (self.offset(k, c), self.offset(p, c));
                    self.data.swap(a, b);
                }
            }
            let pivot = self.data[self.offset(k, k)];
            let inv = 1.0 / pivot;
            let len = last_col - k;
            let krow = self.offset(k, k) + 1;
            for r in k + 1..=last_row {
                let o = self.offset(r, k);
                let l = self.data[o] * inv;
                self.data[o] = l;
                if l == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let rrow = o + 1;
                // rows k and r are disjoint slices of the storage
                let (head, tail) = self.data.split_at_mut(rrow);
                let src = &head[krow..krow + len];
                let dst = &mut tail[..len];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d -= l * s;
                }
            }
        }
        Ok(BandLu { m: self, piv })
    }
}

impl BandLu {
    pub fn dim(&self) -> usize {
        self.m.n
    }

    /// Solves `A x = b` in place.
    pub fn solve(&self, b: &mut [Complex64]) {
        let m = &self.m;
        let n = m.n;
        let reach = m.kl + m.ku;
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk == Complex64::new(0.0, 0.0) {
                continue;
            }
            for r in k + 1..=(k + m.kl).min(n - 1) {
                b[r] -= m.data[m.offset(r, k)] * bk;
            }
        }
        for k in (0..n).rev() {
            let mut s = b[k];
            for c in k + 1..=(k + reach).min(n - 1) {
                s -= m.data[m.offset(k, c)] * b[c];
            }
            b[k] = s / m.data[m.offset(k, k)];
        }
    }
}

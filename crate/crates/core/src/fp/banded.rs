//! Symmetric positive-definite banded matrices and their Cholesky factorization.

use crate::error::{Error, Result};

/// Lower band of a symmetric matrix. Row `i` stores `A[i][i-bw..=i]` in column
/// order, so entry `(i, j)` lives at `i * (bw + 1) + j + bw - i`.
#[derive(Debug, Clone)]
pub struct SymBand {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl SymBand {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Adds `v` to `A[i][j]` (and implicitly `A[j][i]`). Requires `|i - j| <= bandwidth`.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        assert!(r - c <= self.bw, "entry ({i}, {j}) outside the band");
        self.data[r * (self.bw + 1) + c + self.bw - r] += v;
    }

    pub fn mul(&self, x: &[f64], out: &mut [f64]) {
        let (bw, w) = (self.bw, self.bw + 1);
        out[..self.n].fill(0.0);
        for i in 0..self.n {
            let m = bw.min(i);
            let row = &self.data[i * w + bw - m..(i + 1) * w - 1];
            let xs = &x[i - m..i];
            let xi = x[i];
            let mut acc = self.data[(i + 1) * w - 1] * xi;
            for (a, xv) in row.iter().zip(xs) {
                acc += a * xv;
            }
            for (o, a) in out[i - m..i].iter_mut().zip(row) {
                *o += a * xi;
            }
            out[i] += acc;
        }
    }
}

#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    l: Vec<f64>,
    inv_diag: Vec<f64>,
}

impl BandCholesky {
    pub fn factor(a: &SymBand) -> Result<Self> {
        let (n, bw) = (a.n, a.bw);
        let w = bw + 1;
        let mut l = vec![0.0; n * w];
        // position of column j in the stored row i
        let at = |i: usize, j: usize| i * w + j + bw - i;
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let mut s = a.data[at(i, j)];
                for k in lo..j {
                    s -= l[at(i, k)] * l[at(j, k)];
                }
                if j == i {
                    if s <= 0.0 || !s.is_finite() {
                        return Err(Error::LinearSolve { residual: f64::NAN });
                    }
                    l[at(i, i)] = s.sqrt();
                } else {
                    l[at(i, j)] = s / l[at(j, j)];
                }
            }
        }
        let inv_diag = (0..n).map(|i| 1.0 / l[at(i, i)]).collect();
        Ok(Self { n, bw, l, inv_diag })
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        for i in 0..n {
            let m = bw.min(i);
            let row = &self.l[i * w + bw - m..(i + 1) * w - 1];
            let mut s = x[i];
            for (a, xv) in row.iter().zip(&x[i - m..i]) {
                s -= a * xv;
            }
            x[i] = s * self.inv_diag[i];
        }
        // Lᵀ y = z column by column, so rows of L are read contiguously
        for i in (0..n).rev() {
            let m = bw.min(i);
            let xi = x[i] * self.inv_diag[i];
            x[i] = xi;
            let row = &self.l[i * w + bw - m..(i + 1) * w - 1];
            for (xv, a) in x[i - m..i].iter_mut().zip(row) {
                *xv -= a * xi;
            }
        }
    }
}

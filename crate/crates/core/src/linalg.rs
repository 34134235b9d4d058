//! Small dense symmetric positive-definite linear algebra on row-major
//! `Vec<f64>` storage.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;

/// Lower-triangular Cholesky factor of an `n × n` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky {
    pub n: usize,
    pub l: Vec<f64>,
}

impl Cholesky {
    /// Factorizes `a` (row-major, only the lower triangle is read).
    /// Returns `None` when a pivot is not strictly positive.
    pub fn factor(a: &[f64], n: usize) -> Option<Self> {
        debug_assert_eq!(a.len(), n * n);
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let row_j = j * n;
            let mut d = a[row_j + j];
            for k in 0..j {
                d -= l[row_j + k] * l[row_j + k];
            }
            if !(d > 0.0) || !d.is_finite() {
                return None;
            }
            let djj = math::sqrt(d);
            l[row_j + j] = djj;
            for i in j + 1..n {
                let row_i = i * n;
                let mut s = a[row_i + j];
                for k in 0..j {
                    s -= l[row_i + k] * l[row_j + k];
                }
                l[row_i + j] = s / djj;
            }
        }
        Some(Cholesky { n, l })
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.l[i * self.n + j]
    }

    /// Solves `L z = b` in place.
    pub fn forward(&self, b: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            let s: f64 = row.iter().zip(&b[..i]).map(|(a, c)| a * c).sum();
            b[i] = (b[i] - s) / self.l[i * n + i];
        }
    }

    /// Solves `Lᵀ z = b` in place.
    pub fn backward(&self, b: &mut [f64]) {
        let n = self.n;
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in i + 1..n {
                s -= self.l[k * n + i] * b[k];
            }
            b[i] = s / self.l[i * n + i];
        }
    }

    /// Solves `(L Lᵀ) z = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut z = b.to_vec();
        self.forward(&mut z);
        self.backward(&mut z);
        z
    }

    pub fn log_det_half(&self) -> f64 {
        (0..self.n).map(|i| math::ln(self.at(i, i))).sum()
    }

    /// Full inverse `(L Lᵀ)⁻¹`, row-major.
    pub fn inverse(&self) -> Vec<f64> {
        let n = self.n;
        // Row-major L⁻¹, lower triangular.
        let mut linv = vec![0.0; n * n];
        for j in 0..n {
            linv[j * n + j] = 1.0 / self.l[j * n + j];
            for i in j + 1..n {
                let mut s = 0.0;
                for k in j..i {
                    s -= self.l[i * n + k] * linv[k * n + j];
                }
                linv[i * n + j] = s / self.l[i * n + i];
            }
        }
        // A⁻¹ = L⁻ᵀ L⁻¹; entry (i, j) = Σ_{k ≥ max(i,j)} linv[k,i] linv[k,j].
        let mut inv = vec![0.0; n * n];
        for k in 0..n {
            let row = &linv[k * n..k * n + k + 1];
            for i in 0..=k {
                let lki = row[i];
                if lki == 0.0 {
                    continue;
                }
                let dst = &mut inv[i * n..i * n + i + 1];
                for (d, &lkj) in dst.iter_mut().zip(&row[..=i]) {
                    *d += lki * lkj;
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                inv[j * n + i] = inv[i * n + j];
            }
        }
        inv
    }
}

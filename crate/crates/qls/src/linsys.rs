//! Banded LU factorization with partial pivoting.
//!
//! The Newton refinement solves `(-Δ_h + diag(c)) δ = -F` where the matrix
//! is banded (bandwidth `n` on the 2D grid, 1 on the radial line) and
//! indefinite near a mountain-pass point, so an LDLᵀ without pivoting is
//! not safe. Storage follows the usual band layout widened by `kl` extra
//! superdiagonals for pivoting fill-in.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinSysError {
    #[error("matrix is numerically singular at column {0}")]
    Singular(usize),
}

/// General band matrix with `kl` sub- and `ku` superdiagonals.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    /// Column-major panels of height `2*kl + ku + 1`; entry `(i, j)` lives
    /// at row `kl + ku + i - j` of column `j`.
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let stride = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            data: vec![0.0; stride * n],
        }
    }

    fn stride(&self) -> usize {
        2 * self.kl + self.ku + 1
    }

    #[inline]
    fn offset(&self, i: usize, j: usize) -> usize {
        debug_assert!(i + self.kl + self.ku >= j && i <= j + self.kl);
        j * self.stride() + (self.kl + self.ku + i - j)
    }

    /// Panics if `(i, j)` lies outside the band.
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let k = self.offset(i, j);
        self.data[k] = value;
    }

    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        let k = self.offset(i, j);
        self.data[k] += value;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i + self.kl + self.ku < j || i > j + self.kl {
            return 0.0;
        }
        self.data[self.offset(i, j)]
    }

    /// In-place partial-pivoting LU (the unblocked band algorithm).
    pub fn lu_factor(mut self) -> Result<BandLu, LinSysError> {
        let n = self.n;
        let kl = self.kl;
        let kuw = self.kl + self.ku; // working upper bandwidth after pivoting
        let mut ipiv = vec![0usize; n];

        for j in 0..n {
            let pmax = kl.min(n - 1 - j);
            let mut piv = 0usize;
            let mut pval = self.get(j, j).abs();
            for k in 1..=pmax {
                let cand = self.get(j + k, j).abs();
                if cand > pval {
                    pval = cand;
                    piv = k;
                }
            }
            if pval == 0.0 {
                return Err(LinSysError::Singular(j));
            }
            ipiv[j] = j + piv;
            if piv != 0 {
                let cmax = (j + kuw).min(n - 1);
                for c in j..=cmax {
                    let a = self.offset(j, c);
                    let b = self.offset(j + piv, c);
                    self.data.swap(a, b);
                }
            }
            let pivot = self.get(j, j);
            for k in 1..=pmax {
                let m = self.get(j + k, j) / pivot;
                self.set(j + k, j, m);
                if m != 0.0 {
                    let cmax = (j + kuw).min(n - 1);
                    for c in (j + 1)..=cmax {
                        let upd = m * self.get(j, c);
                        if upd != 0.0 {
                            let idx = self.offset(j + k, c);
                            self.data[idx] -= upd;
                        }
                    }
                }
            }
        }

        Ok(BandLu { mat: self, ipiv })
    }
}

/// Factored form; solves by forward elimination + back substitution.
#[derive(Debug, Clone)]
pub struct BandLu {
    mat: BandMatrix,
    ipiv: Vec<usize>,
}

impl BandLu {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.mat.n;
        assert_eq!(rhs.len(), n);
        let kl = self.mat.kl;
        let kuw = self.mat.kl + self.mat.ku;
        let mut x = rhs.to_vec();

        for j in 0..n {
            x.swap(j, self.ipiv[j]);
            let xj = x[j];
            if xj != 0.0 {
                let pmax = kl.min(n - 1 - j);
                for k in 1..=pmax {
                    x[j + k] -= self.mat.get(j + k, j) * xj;
                }
            }
        }
        for j in (0..n).rev() {
            let cmax = (j + kuw).min(n - 1);
            let mut acc = x[j];
            for c in (j + 1)..=cmax {
                acc -= self.mat.get(j, c) * x[c];
            }
            x[j] = acc / self.mat.get(j, j);
        }
        x
    }
}

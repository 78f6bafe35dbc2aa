//! Transition matrices and Perron–Frobenius data.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Square matrix of non-negative integers, row-major.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TransitionMatrix {
    n: usize,
    entries: Vec<u64>,
}

impl TransitionMatrix {
    pub fn from_rows(rows: Vec<Vec<u64>>) -> Result<TransitionMatrix> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidArgument("matrix is not square".into()));
        }
        Ok(TransitionMatrix {
            n,
            entries: rows.into_iter().flatten().collect(),
        })
    }

    pub fn zeros(n: usize) -> TransitionMatrix {
        TransitionMatrix {
            n,
            entries: vec![0; n * n],
        }
    }

    pub fn identity(n: usize) -> TransitionMatrix {
        let mut m = TransitionMatrix::zeros(n);
        for i in 0..n {
            m.entries[i * n + i] = 1;
        }
        m
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.entries[i * self.n + j]
    }

    #[inline]
    pub fn add_to(&mut self, i: usize, j: usize, v: u64) {
        self.entries[i * self.n + j] += v;
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.entries.chunks(self.n.max(1)).map(<[u64]>::to_vec).collect()
    }

    /// Column sums: the combinatorial image lengths of the edges.
    pub fn column_sums(&self) -> Vec<u64> {
        (0..self.n)
            .map(|j| (0..self.n).map(|i| self.get(i, j)).sum())
            .collect()
    }

    /// Saturating product.
    pub fn mul(&self, other: &TransitionMatrix) -> TransitionMatrix {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = TransitionMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a == 0 {
                    continue;
                }
                for j in 0..n {
                    let v = a.saturating_mul(other.get(k, j));
                    let slot = &mut out.entries[i * n + j];
                    *slot = slot.saturating_add(v);
                }
            }
        }
        out
    }

    pub fn pow(&self, k: u32) -> TransitionMatrix {
        let mut result = TransitionMatrix::identity(self.n);
        let mut base = self.clone();
        let mut k = k;
        while k > 0 {
            if k & 1 == 1 {
                result = result.mul(&base);
            }
            base = base.mul(&base);
            k >>= 1;
        }
        result
    }

    /// Strong connectivity of the support digraph `i → j` when `A[i][j] > 0`.
    /// A 1×1 matrix is irreducible iff its entry is positive.
    pub fn is_irreducible(&self) -> bool {
        let n = self.n;
        if n == 0 {
            return false;
        }
        if n == 1 {
            return self.entries[0] > 0;
        }
        let reach = |forward: bool| {
            let mut seen = vec![false; n];
            seen[0] = true;
            let mut stack = vec![0];
            while let Some(i) = stack.pop() {
                for j in 0..n {
                    let e = if forward { self.get(i, j) } else { self.get(j, i) };
                    if e > 0 && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
            seen.into_iter().all(|s| s)
        };
        reach(true) && reach(false)
    }

    /// Perron–Frobenius eigenvalue within `tol`.
    ///
    /// Power iteration on `B = A + I`, which is primitive when `A` is
    /// irreducible. The Collatz–Wielandt quotients `min (Bx)_i / x_i` and
    /// `max (Bx)_i / x_i` bracket the dominant eigenvalue of `B`; iteration
    /// stops once the bracket is narrower than `tol`.
    pub fn pf_eigenvalue(&self, tol: f64) -> Result<f64> {
        self.pf_pair(tol).map(|(l, _)| l)
    }

    /// Eigenvalue and a positive eigenvector normalized to unit sum.
    pub fn pf_pair(&self, tol: f64) -> Result<(f64, Vec<f64>)> {
        const MAX_ITER: usize = 1_000_000;
        if !self.is_irreducible() {
            return Err(Error::ReducibleMatrix);
        }
        let n = self.n;
        let mut x = vec![1.0 / n as f64; n];
        let mut y = vec![0.0; n];
        let mut last = f64::NAN;
        for _ in 0..MAX_ITER {
            for i in 0..n {
                let mut s = x[i];
                for j in 0..n {
                    s += self.get(i, j) as f64 * x[j];
                }
                y[i] = s;
            }
            let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
            for i in 0..n {
                let q = y[i] / x[i];
                lo = lo.min(q);
                hi = hi.max(q);
            }
            let total: f64 = y.iter().sum();
            for i in 0..n {
                x[i] = y[i] / total;
            }
            last = 0.5 * (lo + hi) - 1.0;
            if hi - lo <= tol {
                return Ok((last, x));
            }
        }
        Err(Error::NoConvergence {
            iterations: MAX_ITER,
            last,
        })
    }
}

impl fmt::Debug for TransitionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.rows()).finish()
    }
}

pub fn is_irreducible_matrix(a: &TransitionMatrix) -> bool {
    a.is_irreducible()
}

pub fn pf_eigenvalue(a: &TransitionMatrix, tol: f64) -> Result<f64> {
    a.pf_eigenvalue(tol)
}

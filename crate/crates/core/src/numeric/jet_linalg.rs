//! Small dense linear algebra over [`Jet`] entries.
//!
//! Rank decisions are taken on real parts so that derivative coefficients
//! follow the branch chosen for the value. Under locally constant rank the
//! resulting pseudoinverse is smooth and agrees with the SVD one.

use super::jet::Jet;
use super::matrix::DenseMatrix;
use super::svd::svd;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct JetMat {
    rows: usize,
    cols: usize,
    data: Vec<Jet>,
}

impl JetMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        JetMat {
            rows,
            cols,
            data: vec![Jet::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Jet::constant(1.0));
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<Jet>) -> Self {
        assert_eq!(data.len(), rows * cols, "JetMat size mismatch");
        JetMat { rows, cols, data }
    }

    pub fn from_dense(m: &DenseMatrix) -> Self {
        JetMat {
            rows: m.rows(),
            cols: m.cols(),
            data: m.data().iter().map(|&v| Jet::constant(v)).collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> Jet {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Jet) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[Jet] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn re(&self) -> DenseMatrix {
        DenseMatrix::new(self.rows, self.cols, self.data.iter().map(Jet::re).collect()).expect("shape is consistent")
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(Jet::is_finite)
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn matmul(&self, rhs: &JetMat) -> Self {
        assert_eq!(self.cols, rhs.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for j in 0..rhs.cols {
                let mut s = Jet::zero();
                for k in 0..self.cols {
                    s += self.get(i, k) * rhs.get(k, j);
                }
                out.set(i, j, s);
            }
        }
        out
    }

    pub fn matvec(&self, v: &[Jet]) -> Vec<Jet> {
        assert_eq!(self.cols, v.len(), "matvec shape mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| *a * *b).sum())
            .collect()
    }

    pub fn scale(&self, s: Jet) -> Self {
        JetMat {
            data: self.data.iter().map(|a| *a * s).collect(),
            ..*self
        }
    }

    pub fn neg(&self) -> Self {
        JetMat {
            data: self.data.iter().map(|a| -*a).collect(),
            ..*self
        }
    }

    pub fn sub(&self, rhs: &JetMat) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        JetMat {
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| *a - *b).collect(),
            ..*self
        }
    }

    fn select_cols(&self, idx: &[usize]) -> Self {
        let mut out = Self::zeros(self.rows, idx.len());
        for i in 0..self.rows {
            for (k, &j) in idx.iter().enumerate() {
                out.set(i, k, self.get(i, j));
            }
        }
        out
    }

    /// Solves `self · X = rhs` for square `self`, pivoting on real parts.
    pub fn solve(&self, rhs: &JetMat) -> Option<JetMat> {
        assert_eq!(self.rows, self.cols);
        assert_eq!(self.rows, rhs.rows);
        let n = self.rows;
        let m = rhs.cols;
        let mut a = self.clone();
        let mut b = rhs.clone();
        for k in 0..n {
            let mut p = k;
            let mut best = a.get(k, k).re().abs();
            for i in k + 1..n {
                let v = a.get(i, k).re().abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 {
                return None;
            }
            if p != k {
                for j in 0..n {
                    a.data.swap(p * n + j, k * n + j);
                }
                for j in 0..m {
                    b.data.swap(p * m + j, k * m + j);
                }
            }
            let inv = a.get(k, k).recip();
            for i in k + 1..n {
                let f = a.get(i, k) * inv;
                for j in k..n {
                    let v = a.get(i, j) - f * a.get(k, j);
                    a.set(i, j, v);
                }
                for j in 0..m {
                    let v = b.get(i, j) - f * b.get(k, j);
                    b.set(i, j, v);
                }
            }
        }
        for k in (0..n).rev() {
            let inv = a.get(k, k).recip();
            for j in 0..m {
                let mut s = b.get(k, j);
                for i in k + 1..n {
                    s -= a.get(k, i) * b.get(i, j);
                }
                b.set(k, j, s * inv);
            }
        }
        Some(b)
    }

    fn inverse(&self) -> Option<JetMat> {
        self.solve(&JetMat::identity(self.rows))
    }
}

/// Pseudoinverse of a jet matrix.
///
/// The numeric rank `r` comes from an SVD of the real part. Full row or
/// column rank use the normal-equation formulas; otherwise the matrix is
/// factored as `B·C` with `B` made of `r` pivot columns and the result is
/// `Cᵀ(CCᵀ)⁻¹(BᵀB)⁻¹Bᵀ`.
pub fn pinv_jet(m: &JetMat, rank_tol: f64) -> Result<JetMat> {
    if !m.is_finite() {
        return Err(Error::NonFinite("jet pseudoinverse input".into()));
    }
    let re = m.re();
    let r = svd(&re)?.rank(rank_tol);
    let (rows, cols) = (m.rows, m.cols);
    if r == 0 {
        return Ok(JetMat::zeros(cols, rows));
    }
    let singular = || Error::NonFinite("singular Gram matrix in pseudoinverse".into());
    let mt = m.transpose();
    if r == rows && rows <= cols {
        let g = m.matmul(&mt).inverse().ok_or_else(singular)?;
        return Ok(mt.matmul(&g));
    }
    if r == cols {
        let g = mt.matmul(m).inverse().ok_or_else(singular)?;
        return Ok(g.matmul(&mt));
    }
    let piv = pivot_columns(&re, r);
    let b = m.select_cols(&piv);
    let bt = b.transpose();
    let btb_inv = bt.matmul(&b).inverse().ok_or_else(singular)?;
    let c = btb_inv.matmul(&bt).matmul(m);
    let ct = c.transpose();
    let cct_inv = c.matmul(&ct).inverse().ok_or_else(singular)?;
    Ok(ct.matmul(&cct_inv).matmul(&btb_inv).matmul(&bt))
}

// Greedy column pivoting by residual norm (modified Gram–Schmidt).
fn pivot_columns(m: &DenseMatrix, r: usize) -> Vec<usize> {
    let cols = m.cols();
    let mut work: Vec<Vec<f64>> = (0..cols).map(|j| m.col(j)).collect();
    let mut chosen = Vec::with_capacity(r);
    for _ in 0..r {
        let mut best = None;
        let mut best_norm = -1.0;
        for (j, c) in work.iter().enumerate() {
            if chosen.contains(&j) {
                continue;
            }
            let n: f64 = c.iter().map(|v| v * v).sum();
            if n > best_norm {
                best_norm = n;
                best = Some(j);
            }
        }
        let j = best.expect("rank exceeds column count");
        chosen.push(j);
        let norm = best_norm.sqrt();
        if norm == 0.0 {
            continue;
        }
        let q: Vec<f64> = work[j].iter().map(|v| v / norm).collect();
        for c in work.iter_mut() {
            let d: f64 = c.iter().zip(&q).map(|(a, b)| a * b).sum();
            for (ci, qi) in c.iter_mut().zip(&q) {
                *ci -= d * qi;
            }
        }
    }
    chosen.sort_unstable();
    chosen
}

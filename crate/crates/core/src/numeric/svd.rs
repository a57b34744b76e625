//! Singular value decomposition by one-sided Jacobi rotations, and the
//! Moore–Penrose pseudoinverse built on it.

use super::matrix::DenseMatrix;
use crate::{Error, Result};

const MAX_SWEEPS: usize = 80;

/// Thin SVD `m = u · diag(sigma) · vᵀ` with `sigma` sorted descending.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: DenseMatrix,
    pub sigma: Vec<f64>,
    pub v: DenseMatrix,
}

impl Svd {
    pub fn sigma_max(&self) -> f64 {
        self.sigma.first().copied().unwrap_or(0.0)
    }

    /// Number of singular values at or above `rank_tol * sigma_max`.
    pub fn rank(&self, rank_tol: f64) -> usize {
        let cut = rank_tol * self.sigma_max();
        if self.sigma_max() == 0.0 {
            return 0;
        }
        self.sigma.iter().filter(|&&s| s >= cut && s > 0.0).count()
    }
}

pub fn svd(m: &DenseMatrix) -> Result<Svd> {
    m.ensure_finite("svd input")?;
    if m.rows() >= m.cols() {
        Ok(jacobi_tall(m))
    } else {
        let t = jacobi_tall(&m.transpose());
        Ok(Svd {
            u: t.v,
            sigma: t.sigma,
            v: t.u,
        })
    }
}

// Hestenes iteration on the columns of a matrix with rows >= cols.
fn jacobi_tall(m: &DenseMatrix) -> Svd {
    let (rows, cols) = m.shape();
    let mut a = m.transpose(); // columns of m stored as rows for locality
    let mut v = DenseMatrix::identity(cols);
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for k in 0..rows {
                    let x = a[(p, k)];
                    let y = a[(q, k)];
                    alpha += x * x;
                    beta += y * y;
                    gamma += x * y;
                }
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for k in 0..rows {
                    let x = a[(p, k)];
                    let y = a[(q, k)];
                    a[(p, k)] = c * x - s * y;
                    a[(q, k)] = s * x + c * y;
                }
                for k in 0..cols {
                    let x = v[(k, p)];
                    let y = v[(k, q)];
                    v[(k, p)] = c * x - s * y;
                    v[(k, q)] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sigma: Vec<f64> = (0..cols).map(|j| a.row(j).iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&i, &j| sigma[j].total_cmp(&sigma[i]).then(i.cmp(&j)));
    let mut u = DenseMatrix::zeros(rows, cols);
    let mut vs = DenseMatrix::zeros(cols, cols);
    for (new, &old) in order.iter().enumerate() {
        let s = sigma[old];
        for k in 0..rows {
            u[(k, new)] = if s > 0.0 { a[(old, k)] / s } else { 0.0 };
        }
        for k in 0..cols {
            vs[(k, new)] = v[(k, old)];
        }
    }
    sigma = order.iter().map(|&i| sigma[i]).collect();
    Svd { u, sigma, v: vs }
}

/// Moore–Penrose pseudoinverse; singular values below `rank_tol · σ_max`
/// are treated as zero.
pub fn pseudoinverse(m: &DenseMatrix, rank_tol: f64) -> Result<DenseMatrix> {
    if !(rank_tol > 0.0) {
        return Err(Error::InvalidInput("rank_tol must be positive".into()));
    }
    let d = svd(m)?;
    let (rows, cols) = m.shape();
    let mut out = DenseMatrix::zeros(cols, rows);
    let r = d.rank(rank_tol);
    for k in 0..r {
        let inv = 1.0 / d.sigma[k];
        for i in 0..cols {
            let vi = d.v[(i, k)] * inv;
            if vi == 0.0 {
                continue;
            }
            for j in 0..rows {
                out[(i, j)] += vi * d.u[(j, k)];
            }
        }
    }
    Ok(out)
}

/// Numeric rank at relative tolerance `rank_tol`.
pub fn numeric_rank(m: &DenseMatrix, rank_tol: f64) -> Result<usize> {
    Ok(svd(m)?.rank(rank_tol))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_is_its_own_pseudoinverse() {
        let p = pseudoinverse(&DenseMatrix::identity(3), 1e-10).unwrap();
        assert!(p.sub(&DenseMatrix::identity(3)).max_abs() < 1e-15);
    }

    #[test]
    fn diagonal_with_zero() {
        let p = pseudoinverse(&DenseMatrix::diag(&[2.0, 0.0]), 1e-12).unwrap();
        assert_eq!(p, DenseMatrix::diag(&[0.5, 0.0]));
    }

    #[test]
    fn wide_matrix_reconstructs() {
        let m = DenseMatrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.5]]);
        let d = svd(&m).unwrap();
        let us = DenseMatrix::from_rows(
            &(0..2)
                .map(|i| (0..2).map(|k| d.u[(i, k)] * d.sigma[k]).collect())
                .collect::<Vec<_>>(),
        );
        let rec = us.matmul(&d.v.transpose());
        assert!(rec.sub(&m).max_abs() < 1e-12);
        assert!(d.sigma[0] >= d.sigma[1]);
    }

    #[test]
    fn nan_rejected() {
        let m = DenseMatrix::from_rows(&[vec![f64::NAN]]);
        assert!(matches!(pseudoinverse(&m, 1e-10), Err(Error::NonFinite(_))));
    }

    #[test]
    fn zero_matrix_has_zero_pseudoinverse() {
        let p = pseudoinverse(&DenseMatrix::zeros(2, 3), 1e-10).unwrap();
        assert_eq!(p.shape(), (3, 2));
        assert_eq!(p.max_abs(), 0.0);
    }
}

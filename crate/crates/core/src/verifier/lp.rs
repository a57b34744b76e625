//! Dense two-phase simplex for `A u ≤ r` with free `u`.
//!
//! Phase 1 minimises the total slack of `A u − s ≤ r, s ≥ 0`. A positive
//! optimum proves infeasibility; the optimal duals of that program are a
//! Farkas multiplier. Bland's rule is used throughout, so the pivot
//! sequence is deterministic and cannot cycle.

use serde::{Deserialize, Serialize};

use crate::numeric::matrix::{norm_inf, DenseMatrix};
use crate::{Error, Result};

const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-11;
/// Phase-1 optimum above this counts as infeasible (rows are equilibrated).
pub const FEAS_TOL: f64 = 1e-9;

/// Multiplier proving `A u ≤ r` has no solution: `λ ≥ 0`, `λᵀA = 0`,
/// `λᵀr < 0`, normalised to `λᵀr = −1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FarkasCertificate {
    pub lambda: Vec<f64>,
    /// `‖λᵀA‖∞`.
    pub residual_eq: f64,
    /// `λᵀr`.
    pub value: f64,
}

impl FarkasCertificate {
    /// Recomputes the defining quantities against `(a, r)`.
    pub fn recheck(&self, a: &DenseMatrix, r: &[f64]) -> (f64, f64, f64) {
        let min_l = self.lambda.iter().copied().fold(f64::INFINITY, f64::min);
        let res = norm_inf(&a.vecmat(&self.lambda));
        let val: f64 = self.lambda.iter().zip(r).map(|(l, v)| l * v).sum();
        (min_l, res, val)
    }

    pub fn is_valid(&self, a: &DenseMatrix, r: &[f64], tol: f64) -> bool {
        let (min_l, res, val) = self.recheck(a, r);
        min_l >= 0.0 && res <= tol && val < 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LpVerdict {
    Feasible(Vec<f64>),
    Infeasible(FarkasCertificate),
}

impl LpVerdict {
    pub fn is_feasible(&self) -> bool {
        matches!(self, LpVerdict::Feasible(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpSolution {
    Optimal { u: Vec<f64>, value: f64 },
    Infeasible(FarkasCertificate),
    Unbounded,
}

struct Tableau {
    // m rows of [coefficients | rhs]
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    n_cols: usize,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.t[i][self.n_cols]
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.t[row][col];
        for v in self.t[row].iter_mut() {
            *v /= p;
        }
        self.t[row][col] = 1.0;
        let pr = self.t[row].clone();
        for (i, r) in self.t.iter_mut().enumerate() {
            if i == row {
                continue;
            }
            let f = r[col];
            if f == 0.0 {
                continue;
            }
            for (v, pv) in r.iter_mut().zip(&pr) {
                *v -= f * pv;
            }
            r[col] = 0.0;
        }
        self.basis[row] = col;
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut d = cost.to_vec();
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = cost[b];
            if cb == 0.0 {
                continue;
            }
            for (j, dj) in d.iter_mut().enumerate() {
                *dj -= cb * self.t[i][j];
            }
        }
        d
    }

    /// Runs Bland's rule; `allowed[j]` gates entering columns.
    /// Returns false when unbounded.
    fn optimise(&mut self, cost: &[f64], allowed: &[bool], max_iter: usize) -> Result<bool> {
        for _ in 0..max_iter {
            let d = self.reduced_costs(cost);
            let enter = (0..self.n_cols).find(|&j| allowed[j] && d[j] < -COST_TOL);
            let Some(col) = enter else {
                return Ok(true);
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.t.len() {
                let a = self.t[i][col];
                if a <= PIVOT_TOL {
                    continue;
                }
                let ratio = self.rhs(i).max(0.0) / a;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((k, best)) => {
                        if ratio < best - 1e-14 || (ratio <= best + 1e-14 && self.basis[i] < self.basis[k]) {
                            Some((i, ratio))
                        } else {
                            Some((k, best))
                        }
                    }
                };
            }
            match leave {
                None => return Ok(false),
                Some((row, _)) => self.pivot(row, col),
            }
        }
        Err(Error::MaxIterations(max_iter))
    }
}

struct Prepared {
    tab: Tableau,
    sign: Vec<f64>,
    scale: Vec<f64>,
    n: usize,
    m: usize,
}

// Column layout: u+ (n) | u- (n) | w (m) | s (m)
fn prepare(a: &DenseMatrix, r: &[f64]) -> Result<Prepared> {
    let (m, n) = a.shape();
    if r.len() != m {
        return Err(Error::InvalidInput("stack row count differs from right side".into()));
    }
    if !a.is_finite() || r.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("linear program data".into()));
    }
    let n_cols = 2 * n + 2 * m;
    let mut t = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    let mut sign = Vec::with_capacity(m);
    let mut scale = Vec::with_capacity(m);
    for i in 0..m {
        let row = a.row(i);
        let d = row.iter().fold(r[i].abs(), |acc, v| acc.max(v.abs()));
        let d = if d > 0.0 { d } else { 1.0 };
        let sg = if r[i] < 0.0 { -1.0 } else { 1.0 };
        let mut line = vec![0.0; n_cols + 1];
        for j in 0..n {
            line[j] = sg * row[j] / d;
            line[n + j] = -sg * row[j] / d;
        }
        line[2 * n + i] = sg;
        line[2 * n + m + i] = -sg;
        line[n_cols] = sg * r[i] / d;
        basis.push(if sg > 0.0 { 2 * n + i } else { 2 * n + m + i });
        t.push(line);
        sign.push(sg);
        scale.push(d);
    }
    Ok(Prepared {
        tab: Tableau { t, basis, n_cols },
        sign,
        scale,
        n,
        m,
    })
}

fn iteration_cap(n: usize, m: usize) -> usize {
    200 * (2 * n + 2 * m + 1)
}

fn primal(p: &Prepared) -> Vec<f64> {
    let mut z = vec![0.0; p.tab.n_cols];
    for (i, &b) in p.tab.basis.iter().enumerate() {
        z[b] = p.tab.rhs(i);
    }
    (0..p.n).map(|j| z[j] - z[p.n + j]).collect()
}

fn certificate(p: &Prepared, a: &DenseMatrix, r: &[f64]) -> Result<FarkasCertificate> {
    let m = p.m;
    let n = p.n;
    // Phase-1 duals y solve B^T y = c_B in the signed, scaled system.
    let mut bmat = DenseMatrix::zeros(m, m);
    let mut cb = vec![0.0; m];
    for (k, &col) in p.tab.basis.iter().enumerate() {
        for i in 0..m {
            let s = p.sign[i];
            bmat[(i, k)] = if col < n {
                s * a[(i, col)] / p.scale[i]
            } else if col < 2 * n {
                -s * a[(i, col - n)] / p.scale[i]
            } else if col < 2 * n + m {
                if col - 2 * n == i {
                    s
                } else {
                    0.0
                }
            } else if col - 2 * n - m == i {
                -s
            } else {
                0.0
            };
        }
        cb[k] = if col >= 2 * n + m { 1.0 } else { 0.0 };
    }
    let y = bmat
        .transpose()
        .solve_vec(&cb)
        .ok_or_else(|| Error::NonFinite("singular simplex basis".into()))?;
    let mut lambda: Vec<f64> = (0..m).map(|i| (-p.sign[i] * y[i]).max(0.0) / p.scale[i]).collect();
    let value: f64 = lambda.iter().zip(r).map(|(l, v)| l * v).sum();
    if !(value < 0.0) {
        return Err(Error::NonFinite("degenerate Farkas multiplier".into()));
    }
    for l in lambda.iter_mut() {
        *l /= -value;
    }
    let residual_eq = norm_inf(&a.vecmat(&lambda));
    let value = lambda.iter().zip(r).map(|(l, v)| l * v).sum();
    Ok(FarkasCertificate {
        lambda,
        residual_eq,
        value,
    })
}

/// Runs phase 1; `Ok(Err(cert))` when infeasible.
fn phase_one(a: &DenseMatrix, r: &[f64]) -> Result<std::result::Result<Prepared, FarkasCertificate>> {
    let mut p = prepare(a, r)?;
    let (n, m) = (p.n, p.m);
    let mut cost = vec![0.0; p.tab.n_cols];
    for c in cost.iter_mut().skip(2 * n + m) {
        *c = 1.0;
    }
    let allowed = vec![true; p.tab.n_cols];
    p.tab.optimise(&cost, &allowed, iteration_cap(n, m))?;
    let objective: f64 = p
        .tab
        .basis
        .iter()
        .enumerate()
        .filter(|(_, &b)| b >= 2 * n + m)
        .map(|(i, _)| p.tab.rhs(i))
        .sum();
    if objective > FEAS_TOL {
        return Ok(Err(certificate(&p, a, r)?));
    }
    Ok(Ok(p))
}

/// Feasibility of `A u ≤ r` with a witness or a Farkas certificate.
pub fn lp_feasible_raw(a: &DenseMatrix, r: &[f64]) -> Result<LpVerdict> {
    if a.rows() == 0 {
        return Ok(LpVerdict::Feasible(vec![0.0; a.cols()]));
    }
    match phase_one(a, r)? {
        Ok(p) => Ok(LpVerdict::Feasible(primal(&p))),
        Err(cert) => Ok(LpVerdict::Infeasible(cert)),
    }
}

/// `min cᵀu` subject to `A u ≤ r`.
pub fn lp_minimize(c: &[f64], a: &DenseMatrix, r: &[f64]) -> Result<LpSolution> {
    let n = a.cols();
    if c.len() != n {
        return Err(Error::InvalidInput("cost length differs from variable count".into()));
    }
    if a.rows() == 0 {
        return Ok(if c.iter().all(|v| *v == 0.0) {
            LpSolution::Optimal {
                u: vec![0.0; n],
                value: 0.0,
            }
        } else {
            LpSolution::Unbounded
        });
    }
    let mut p = match phase_one(a, r)? {
        Ok(p) => p,
        Err(cert) => return Ok(LpSolution::Infeasible(cert)),
    };
    let m = p.m;
    // Drive zero-level artificials out of the basis where possible.
    for i in 0..m {
        if p.tab.basis[i] >= 2 * n + m {
            if let Some(col) = (0..2 * n + m).find(|&j| p.tab.t[i][j].abs() > PIVOT_TOL) {
                p.tab.pivot(i, col);
            }
        }
    }
    let mut cost = vec![0.0; p.tab.n_cols];
    for j in 0..n {
        cost[j] = c[j];
        cost[n + j] = -c[j];
    }
    let allowed: Vec<bool> = (0..p.tab.n_cols).map(|j| j < 2 * n + m).collect();
    if !p.tab.optimise(&cost, &allowed, iteration_cap(n, m))? {
        return Ok(LpSolution::Unbounded);
    }
    let u = primal(&p);
    let value = c.iter().zip(&u).map(|(a, b)| a * b).sum();
    Ok(LpSolution::Optimal { u, value })
}

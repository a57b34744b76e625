//! Dense primal active-set solver for strictly convex QPs.

use serde::{Deserialize, Serialize};

use crate::numeric::matrix::{dot, norm2, norm_inf, DenseMatrix};
use crate::verifier::lp::{lp_feasible_raw, FarkasCertificate, LpVerdict};
use crate::{Error, Result};

/// Residual allowed on returned solutions.
pub const KKT_TOL: f64 = 1e-8;
const ACTIVE_TOL: f64 = 1e-10;
const INDEP_TOL: f64 = 1e-10;

/// `min ½ uᵀHu + cᵀu` s.t. `E u = e`, `A u ≤ r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QpProblem {
    pub hessian: DenseMatrix,
    pub linear: Vec<f64>,
    pub eq_a: DenseMatrix,
    pub eq_b: Vec<f64>,
    pub ineq_a: DenseMatrix,
    pub ineq_b: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FilterStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterResult {
    pub status: FilterStatus,
    pub u: Option<Vec<f64>>,
    /// Inequality rows active at the solution.
    pub active_set: Vec<usize>,
    /// `½ uᵀHu + cᵀu`; `None` when infeasible.
    pub objective: Option<f64>,
    pub certificate: Option<FarkasCertificate>,
}

impl FilterResult {
    pub fn is_optimal(&self) -> bool {
        self.status == FilterStatus::Optimal
    }
}

impl QpProblem {
    /// Projection of `u_nom` in the Euclidean norm.
    pub fn projection(u_nom: &[f64]) -> Self {
        let n = u_nom.len();
        QpProblem {
            hessian: DenseMatrix::identity(n),
            linear: u_nom.iter().map(|v| -v).collect(),
            eq_a: DenseMatrix::zeros(0, n),
            eq_b: Vec::new(),
            ineq_a: DenseMatrix::zeros(0, n),
            ineq_b: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.linear.len()
    }

    pub fn rows(&self) -> usize {
        self.eq_b.len() + self.ineq_b.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        let ok =
            self.hessian.shape() == (n, n) && self.eq_a.shape() == (self.eq_b.len(), n) && self.ineq_a.shape() == (self.ineq_b.len(), n);
        if !ok {
            return Err(Error::InvalidInput("QP dimensions inconsistent".into()));
        }
        let finite = self.hessian.is_finite()
            && self.eq_a.is_finite()
            && self.ineq_a.is_finite()
            && self.linear.iter().chain(&self.eq_b).chain(&self.ineq_b).all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite("QP data".into()));
        }
        for i in 0..n {
            for j in 0..i {
                if (self.hessian[(i, j)] - self.hessian[(j, i)]).abs() > 1e-12 * self.hessian.max_abs().max(1.0) {
                    return Err(Error::InvalidInput("QP Hessian not symmetric".into()));
                }
            }
        }
        Ok(())
    }

    pub fn objective(&self, u: &[f64]) -> f64 {
        0.5 * dot(u, &self.hessian.matvec(u)) + dot(&self.linear, u)
    }

    /// Largest equality or inequality violation at `u`.
    pub fn violation(&self, u: &[f64]) -> f64 {
        let eq = self
            .eq_a
            .matvec(u)
            .iter()
            .zip(&self.eq_b)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let ineq = self
            .ineq_a
            .matvec(u)
            .iter()
            .zip(&self.ineq_b)
            .map(|(a, b)| a - b)
            .fold(0.0, f64::max);
        eq.max(ineq)
    }

    /// Inequality-only stack with each equality split into two rows.
    pub fn as_inequalities(&self) -> (DenseMatrix, Vec<f64>) {
        let n = self.n();
        let mut a = DenseMatrix::zeros(0, n);
        let mut r = Vec::new();
        for i in 0..self.eq_b.len() {
            a.push_row(self.eq_a.row(i));
            r.push(self.eq_b[i]);
            let neg: Vec<f64> = self.eq_a.row(i).iter().map(|v| -v).collect();
            a.push_row(&neg);
            r.push(-self.eq_b[i]);
        }
        for i in 0..self.ineq_b.len() {
            a.push_row(self.ineq_a.row(i));
            r.push(self.ineq_b[i]);
        }
        (a, r)
    }
}

// Working-set row: equality (index into eq rows) or inequality.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Row {
    Eq(usize),
    Ineq(usize),
}

fn row_of<'a>(qp: &'a QpProblem, r: Row) -> &'a [f64] {
    match r {
        Row::Eq(i) => qp.eq_a.row(i),
        Row::Ineq(i) => qp.ineq_a.row(i),
    }
}

/// Gram-Schmidt test: is `v` independent of the rows already kept?
fn independent(basis: &mut Vec<Vec<f64>>, v: &[f64]) -> bool {
    let scale = norm2(v);
    if scale == 0.0 {
        return false;
    }
    let mut w = v.to_vec();
    for q in basis.iter() {
        let c = dot(q, &w);
        for (wi, qi) in w.iter_mut().zip(q) {
            *wi -= c * qi;
        }
    }
    let nw = norm2(&w);
    if nw <= INDEP_TOL * scale {
        return false;
    }
    basis.push(w.iter().map(|v| v / nw).collect());
    true
}

fn orthobasis(qp: &QpProblem, work: &[Row]) -> Vec<Vec<f64>> {
    let mut basis = Vec::new();
    for &r in work {
        independent(&mut basis, row_of(qp, r));
    }
    basis
}

/// Solves `[H Wᵀ; W 0][p; λ] = [−g; 0]`.
fn kkt_step(qp: &QpProblem, work: &[Row], grad: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = qp.n();
    let k = work.len();
    let mut m = DenseMatrix::zeros(n + k, n + k);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = qp.hessian[(i, j)];
        }
    }
    for (w, &r) in work.iter().enumerate() {
        for (j, &v) in row_of(qp, r).iter().enumerate() {
            m[(n + w, j)] = v;
            m[(j, n + w)] = v;
        }
    }
    let mut rhs = vec![0.0; n + k];
    for i in 0..n {
        rhs[i] = -grad[i];
    }
    let sol = m
        .solve_vec(&rhs)
        .ok_or_else(|| Error::InvalidInput("KKT system singular (Hessian not positive definite?)".into()))?;
    Ok((sol[..n].to_vec(), sol[n..].to_vec()))
}

fn infeasible(cert: FarkasCertificate) -> FilterResult {
    FilterResult {
        status: FilterStatus::Infeasible,
        u: None,
        active_set: Vec::new(),
        objective: None,
        certificate: Some(cert),
    }
}

fn optimal(qp: &QpProblem, u: Vec<f64>, mut active: Vec<usize>) -> FilterResult {
    active.sort_unstable();
    FilterResult {
        status: FilterStatus::Optimal,
        objective: Some(qp.objective(&u)),
        u: Some(u),
        active_set: active,
        certificate: None,
    }
}

/// Primal active-set method. Feasibility is decided first by the phase-1
/// LP, whose Farkas multiplier is attached to infeasible results.
pub fn solve_qp(qp: &QpProblem) -> Result<FilterResult> {
    qp.validate()?;
    let n = qp.n();
    let unconstrained = qp
        .hessian
        .solve_vec(&qp.linear.iter().map(|v| -v).collect::<Vec<_>>())
        .ok_or_else(|| Error::InvalidInput("QP Hessian singular".into()))?;
    if qp.violation(&unconstrained) <= ACTIVE_TOL {
        let active = (0..qp.ineq_b.len())
            .filter(|&i| (dot(qp.ineq_a.row(i), &unconstrained) - qp.ineq_b[i]).abs() <= ACTIVE_TOL)
            .collect();
        return Ok(optimal(qp, unconstrained, active));
    }

    let (sa, sr) = qp.as_inequalities();
    let mut u = match lp_feasible_raw(&sa, &sr)? {
        LpVerdict::Infeasible(cert) => return Ok(infeasible(cert)),
        LpVerdict::Feasible(w) => w,
    };

    // Initial working set: independent equalities, then active inequalities.
    let mut work: Vec<Row> = Vec::new();
    let mut basis = Vec::new();
    for i in 0..qp.eq_b.len() {
        if independent(&mut basis, qp.eq_a.row(i)) {
            work.push(Row::Eq(i));
        }
    }
    for i in 0..qp.ineq_b.len() {
        let slack = qp.ineq_b[i] - dot(qp.ineq_a.row(i), &u);
        if slack.abs() <= ACTIVE_TOL * (1.0 + qp.ineq_b[i].abs()) && independent(&mut basis, qp.ineq_a.row(i)) {
            work.push(Row::Ineq(i));
        }
    }

    let cap = 100 * (n + qp.rows()).max(1);
    for _ in 0..cap {
        let grad: Vec<f64> = qp.hessian.matvec(&u).iter().zip(&qp.linear).map(|(a, b)| a + b).collect();
        let (p, lambda) = kkt_step(qp, &work, &grad)?;
        let scale = 1.0 + norm_inf(&u);
        if norm_inf(&p) <= 1e-12 * scale {
            // Most negative inequality multiplier, lowest index on ties.
            let mut drop: Option<(usize, f64, usize)> = None;
            for (w, &r) in work.iter().enumerate() {
                if let Row::Ineq(i) = r {
                    let l = lambda[w];
                    if l < -1e-12 {
                        let better = match drop {
                            None => true,
                            Some((_, best, bi)) => l < best || (l == best && i < bi),
                        };
                        if better {
                            drop = Some((w, l, i));
                        }
                    }
                }
            }
            match drop {
                None => {
                    let active = work
                        .iter()
                        .filter_map(|r| match r {
                            Row::Ineq(i) => Some(*i),
                            Row::Eq(_) => None,
                        })
                        .collect();
                    return Ok(optimal(qp, u, active));
                }
                Some((w, _, _)) => {
                    work.remove(w);
                    continue;
                }
            }
        }
        // Ratio test over inequalities outside the working set.
        let mut alpha = 1.0;
        let mut blocking: Option<usize> = None;
        let pn = norm2(&p);
        for i in 0..qp.ineq_b.len() {
            if work.contains(&Row::Ineq(i)) {
                continue;
            }
            let a = qp.ineq_a.row(i);
            let ap = dot(a, &p);
            if ap <= 1e-14 * norm2(a) * pn {
                continue;
            }
            let step = ((qp.ineq_b[i] - dot(a, &u)) / ap).max(0.0);
            if step < alpha {
                alpha = step;
                blocking = Some(i);
            }
        }
        for (ui, pi) in u.iter_mut().zip(&p) {
            *ui += alpha * pi;
        }
        if let Some(i) = blocking {
            let mut b = orthobasis(qp, &work);
            if independent(&mut b, qp.ineq_a.row(i)) {
                work.push(Row::Ineq(i));
            }
        }
    }
    Err(Error::MaxIterations(cap))
}

//! Per-step CBF quadratic program: stay close to a nominal input while
//! keeping the manifold compatible and the barrier condition satisfied.

pub mod qp;

use crate::model::{constraint_jacobians, control_influence, DaeSystem};
use crate::numeric::jet::Jet;
use crate::numeric::matrix::{norm_inf, DenseMatrix};
use crate::projection::{hierarchy_terms, BarrierSpec, ProjectedDynamics};
use crate::{Error, Result};

pub use qp::{solve_qp, FilterResult, FilterStatus, QpProblem, KKT_TOL};

/// Right sides below this count as zero when a compatibility row vanishes.
pub const TRIVIAL_RHS: f64 = 1e-10;

/// Compatibility rows `P^(k) η^(k) g_d u = −P^(k) J_d^(k) f_d`, one block
/// per level `k = 1..=ν`, with all-zero rows kept.
pub fn compatibility_blocks(pd: &ProjectedDynamics, x: &[f64]) -> Result<(DenseMatrix, Vec<f64>)> {
    let sys = &pd.system;
    pd.check_on_manifold(x)?;
    let gd = sys.g_d(x);
    let fd = sys.f_d(x);
    let mut e_mat = DenseMatrix::zeros(0, sys.n_u);
    let mut e_vec = Vec::new();
    for k in 1..=pd.nu() {
        let p = pd.projection_operator(x, k)?;
        let eta = control_influence(sys, x, k, pd.analysis.d_prime)?;
        let (jd, _) = constraint_jacobians(sys, x, k)?;
        let lhs = p.matmul(&eta).matmul(&gd);
        let rhs: Vec<f64> = p.matvec(&jd.matvec(&fd)).iter().map(|v| -v).collect();
        for i in 0..lhs.rows() {
            e_mat.push_row(lhs.row(i));
            e_vec.push(rhs[i]);
        }
    }
    Ok((e_mat, e_vec))
}

/// Compatibility equalities with trivially satisfied rows removed.
pub fn assemble_compatibility(pd: &ProjectedDynamics, x: &[f64]) -> Result<(DenseMatrix, Vec<f64>)> {
    let (full, rhs) = compatibility_blocks(pd, x)?;
    let mut e_mat = DenseMatrix::zeros(0, full.cols());
    let mut e_vec = Vec::new();
    for (i, &e) in rhs.iter().enumerate() {
        if norm_inf(full.row(i)) <= pd.tol.rank_tol {
            if e.abs() < TRIVIAL_RHS {
                continue;
            }
            return Err(Error::StructuralInfeasibility {
                level: 1 + i / pd.system.n_m.max(1),
                row: i,
                rhs: e,
            });
        }
        e_mat.push_row(full.row(i));
        e_vec.push(e);
    }
    Ok((e_mat, e_vec))
}

fn base_qp(sys: &DaeSystem, u_nom: &[f64], a_row: &[f64], c_const: f64) -> Result<QpProblem> {
    if u_nom.len() != sys.n_u {
        return Err(Error::InvalidInput("nominal input has wrong length".into()));
    }
    let mut qp = QpProblem::projection(u_nom);
    let neg: Vec<f64> = a_row.iter().map(|v| -v).collect();
    qp.ineq_a.push_row(&neg);
    qp.ineq_b.push(c_const);
    let poly = &sys.input_polytope;
    for i in 0..poly.rows() {
        qp.ineq_a.push_row(poly.a.row(i));
        qp.ineq_b.push(poly.r[i]);
    }
    Ok(qp)
}

/// DAE-aware CBF-QP at `x`. Inequality row 0 is the barrier row
/// `−a_row·u ≤ c_const`; the input polytope follows.
pub fn assemble_filter_qp(pd: &ProjectedDynamics, spec: &BarrierSpec, x: &[f64], u_nom: &[f64]) -> Result<QpProblem> {
    let (e_mat, e_vec) = assemble_compatibility(pd, x)?;
    let terms = pd.hocbf_terms(spec, x)?;
    let mut qp = base_qp(&pd.system, u_nom, &terms.a_row, terms.c_const)?;
    qp.eq_a = e_mat;
    qp.eq_b = e_vec;
    Ok(qp)
}

pub fn aware_filter(pd: &ProjectedDynamics, spec: &BarrierSpec, x: &[f64], u_nom: &[f64]) -> Result<FilterResult> {
    solve_qp(&assemble_filter_qp(pd, spec, x, u_nom)?)
}

/// Baseline QP that treats the differential equations as a plain ODE:
/// the barrier hierarchy is taken along `(f_d, g_d)` with `x_a` frozen and
/// no compatibility rows are added.
pub fn unaware_qp(sys: &DaeSystem, spec: &BarrierSpec, x: &[f64], u_nom: &[f64]) -> Result<QpProblem> {
    if x.len() != sys.n_x() || x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("state".into()));
    }
    let drift = |y: &[Jet]| {
        let mut f = sys.f_d_jet(y);
        f.resize(sys.n_x(), Jet::zero());
        f
    };
    let gd = sys.g_d(x);
    let mut g = DenseMatrix::zeros(sys.n_x(), sys.n_u);
    for i in 0..sys.n_d {
        for j in 0..sys.n_u {
            g[(i, j)] = gd[(i, j)];
        }
    }
    let terms = hierarchy_terms(spec, x, &drift, &g)?;
    base_qp(sys, u_nom, &terms.a_row, terms.c_const)
}

pub fn dae_unaware_filter(sys: &DaeSystem, spec: &BarrierSpec, x: &[f64], u_nom: &[f64]) -> Result<FilterResult> {
    solve_qp(&unaware_qp(sys, spec, x, u_nom)?)
}

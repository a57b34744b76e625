//! Semi-explicit control-affine DAE models and their structural analysis.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::numeric::diff::{directional, jacobian_jet, VectorFn};
use crate::numeric::jet::{constants, Jet};
use crate::numeric::jet_linalg::JetMat;
use crate::numeric::matrix::{norm_inf, DenseMatrix};
use crate::numeric::svd::numeric_rank;
use crate::{Error, Result, Tolerances};

/// Deepest drift differentiation tried when searching for `d'`.
pub const MAX_D_PRIME: usize = 3;
/// Fraction of probes that must agree on `d'`.
pub const D_PRIME_QUORUM: f64 = 0.9;

/// Input constraint `A_u u ≤ r_u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputPolytope {
    pub a: DenseMatrix,
    pub r: Vec<f64>,
}

impl InputPolytope {
    /// `|u_i| ≤ bound` for every input.
    pub fn boxed(n_u: usize, bound: f64) -> Self {
        let mut a = DenseMatrix::zeros(2 * n_u, n_u);
        for i in 0..n_u {
            a[(2 * i, i)] = 1.0;
            a[(2 * i + 1, i)] = -1.0;
        }
        InputPolytope {
            a,
            r: vec![bound; 2 * n_u],
        }
    }

    pub fn unbounded(n_u: usize) -> Self {
        InputPolytope {
            a: DenseMatrix::zeros(0, n_u),
            r: Vec::new(),
        }
    }

    pub fn rows(&self) -> usize {
        self.r.len()
    }

    pub fn contains(&self, u: &[f64], tol: f64) -> bool {
        self.a.matvec(u).iter().zip(&self.r).all(|(lhs, r)| *lhs <= r + tol)
    }

    /// Clips `u` into a box polytope; other shapes are returned unchanged.
    pub fn clamp_box(&self, u: &[f64]) -> Vec<f64> {
        let mut out = u.to_vec();
        for i in 0..self.rows() {
            let row = self.a.row(i);
            let nz: Vec<usize> = (0..row.len()).filter(|&j| row[j] != 0.0).collect();
            if nz.len() != 1 {
                continue;
            }
            let j = nz[0];
            let limit = self.r[i] / row[j];
            if row[j] > 0.0 {
                out[j] = out[j].min(limit);
            } else {
                out[j] = out[j].max(limit);
            }
        }
        out
    }
}

/// `ẋ_d = f_d(x) + g_d(x) u`, `0 = φ(x)` with `x = [x_d; x_a]`.
///
/// `constraint_chain[k]` is the state-only form of the k-th derivative of
/// `φ`, with all derivatives of the algebraic states eliminated.
#[derive(Clone)]
pub struct DaeSystem {
    pub name: String,
    pub n_d: usize,
    pub n_a: usize,
    pub n_u: usize,
    pub n_m: usize,
    pub f_d: VectorFn,
    /// Row-major `n_d × n_u` input matrix.
    pub g_d: VectorFn,
    pub constraint_chain: Vec<VectorFn>,
    pub declared_index: usize,
    pub input_polytope: InputPolytope,
}

impl fmt::Debug for DaeSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DaeSystem")
            .field("name", &self.name)
            .field("n_d", &self.n_d)
            .field("n_a", &self.n_a)
            .field("n_u", &self.n_u)
            .field("n_m", &self.n_m)
            .field("declared_index", &self.declared_index)
            .finish()
    }
}

impl DaeSystem {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        n_d: usize,
        n_a: usize,
        n_u: usize,
        n_m: usize,
        f_d: VectorFn,
        g_d: VectorFn,
        constraint_chain: Vec<VectorFn>,
        declared_index: usize,
        input_polytope: InputPolytope,
    ) -> Result<Self> {
        if declared_index < 1 {
            return Err(Error::InvalidInput("declared index must be at least 1".into()));
        }
        if constraint_chain.len() != declared_index + 1 {
            return Err(Error::InvalidInput(format!(
                "constraint chain has {} entries, index {declared_index} needs {}",
                constraint_chain.len(),
                declared_index + 1
            )));
        }
        if n_d == 0 || n_u == 0 || n_m == 0 {
            return Err(Error::InvalidInput("dimensions must be positive".into()));
        }
        if input_polytope.a.rows() > 0 && input_polytope.a.cols() != n_u {
            return Err(Error::InvalidInput("input polytope width differs from n_u".into()));
        }
        Ok(DaeSystem {
            name: name.into(),
            n_d,
            n_a,
            n_u,
            n_m,
            f_d,
            g_d,
            constraint_chain,
            declared_index,
            input_polytope,
        })
    }

    pub fn n_x(&self) -> usize {
        self.n_d + self.n_a
    }

    pub fn f_d_jet(&self, x: &[Jet]) -> Vec<Jet> {
        (self.f_d)(x)
    }

    pub fn g_d_jet(&self, x: &[Jet]) -> JetMat {
        JetMat::from_vec(self.n_d, self.n_u, (self.g_d)(x))
    }

    pub fn f_d(&self, x: &[f64]) -> Vec<f64> {
        self.f_d_jet(&constants(x)).iter().map(Jet::re).collect()
    }

    pub fn g_d(&self, x: &[f64]) -> DenseMatrix {
        self.g_d_jet(&constants(x)).re()
    }

    /// `φ^(k)(x)`.
    pub fn constraint(&self, x: &[f64], k: usize) -> Vec<f64> {
        (self.constraint_chain[k])(&constants(x)).iter().map(Jet::re).collect()
    }

    pub fn phi(&self, x: &[f64]) -> Vec<f64> {
        self.constraint(x, 0)
    }

    /// `‖φ(x)‖∞`.
    pub fn phi_residual(&self, x: &[f64]) -> f64 {
        norm_inf(&self.phi(x))
    }

    /// Largest `‖φ^(k)(x)‖∞` over `k = 0..ν−1`.
    pub fn chain_residual(&self, x: &[f64]) -> f64 {
        (0..self.declared_index)
            .map(|k| norm_inf(&self.constraint(x, k)))
            .fold(0.0, f64::max)
    }

    /// Raw differential field with frozen algebraic states and input `u`.
    pub fn raw_field(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        let f = self.f_d(x);
        let g = self.g_d(x);
        let gu = g.matvec(u);
        f.iter().zip(&gu).map(|(a, b)| a + b).collect()
    }
}

/// Jacobians of `φ^(k)` at a jet point, split into differential and
/// algebraic columns.
pub fn constraint_jacobians_jet(sys: &DaeSystem, x: &[Jet], k: usize) -> Result<(JetMat, JetMat)> {
    let j = jacobian_jet(&*sys.constraint_chain[k], x)?;
    Ok(split_columns(&j, sys.n_d))
}

fn split_columns(j: &JetMat, n_d: usize) -> (JetMat, JetMat) {
    let rows = j.rows();
    let n_a = j.cols() - n_d;
    let mut jd = JetMat::zeros(rows, n_d);
    let mut ja = JetMat::zeros(rows, n_a);
    for i in 0..rows {
        for c in 0..n_d {
            jd.set(i, c, j.get(i, c));
        }
        for c in 0..n_a {
            ja.set(i, c, j.get(i, n_d + c));
        }
    }
    (jd, ja)
}

/// `(J_d^(k), J_a^(k))` at a real point.
pub fn constraint_jacobians(sys: &DaeSystem, x: &[f64], k: usize) -> Result<(DenseMatrix, DenseMatrix)> {
    if k > sys.declared_index {
        return Err(Error::InvalidInput(format!(
            "level {k} exceeds declared index {}",
            sys.declared_index
        )));
    }
    if x.len() != sys.n_x() || x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("state".into()));
    }
    let (jd, ja) = constraint_jacobians_jet(sys, &constants(x), k)?;
    Ok((jd.re(), ja.re()))
}

/// `η^(k)(x) = (J_d^(k) f_d)^(d'−1) J_d^(k)`.
///
/// With several constraints the power is taken row by row, i.e. as
/// `diag(J_d f_d)^(d'−1) J_d`.
pub fn control_influence(sys: &DaeSystem, x: &[f64], level: usize, d_prime: usize) -> Result<DenseMatrix> {
    if d_prime == 0 {
        return Err(Error::InvalidInput("d' must be at least 1".into()));
    }
    let (jd, _) = constraint_jacobians(sys, x, level)?;
    if d_prime == 1 {
        return Ok(jd);
    }
    let jf = jd.matvec(&sys.f_d(x));
    let mut eta = jd.clone();
    for (i, s) in jf.iter().enumerate() {
        let w = s.powi(d_prime as i32 - 1);
        for v in eta.row_mut(i) {
            *v *= w;
        }
    }
    eta.ensure_finite("control influence")?;
    Ok(eta)
}

/// Result of [`analyze_index`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexAnalysis {
    pub nu: usize,
    pub d_prime: usize,
    pub d: usize,
    /// Smallest numeric rank of `J_a^(ν)` seen over the probes.
    pub j_a_rank: usize,
    pub regular: bool,
}

/// `L_g L_f^(k−1) x_d` on the raw differential subsystem with `x_a` frozen,
/// as a row-major `n_d × n_u` matrix.
fn raw_input_coupling(sys: &DaeSystem, x: &[f64], k: usize) -> Result<DenseMatrix> {
    let n_d = sys.n_d;
    let n_x = sys.n_x();
    // q_j(y) = L_f^j x_d evaluated by nesting directional derivatives.
    fn drift_power(sys: &DaeSystem, y: &[Jet], j: usize, comp: usize) -> Jet {
        if j == 0 {
            return y[comp];
        }
        let mut v = sys.f_d_jet(y);
        v.resize(sys.n_x(), Jet::zero());
        directional(&|z: &[Jet]| drift_power(sys, z, j - 1, comp), y, &v)
    }
    let xj = constants(x);
    let g = sys.g_d_jet(&xj);
    let mut out = DenseMatrix::zeros(n_d, sys.n_u);
    for comp in 0..n_d {
        for col in 0..sys.n_u {
            let mut dir = vec![Jet::zero(); n_x];
            for (r, slot) in dir.iter_mut().enumerate().take(n_d) {
                *slot = g.get(r, col);
            }
            let v = directional(&|z: &[Jet]| drift_power(sys, z, k - 1, comp), &xj, &dir);
            out[(comp, col)] = v.re();
        }
    }
    out.ensure_finite("input coupling")?;
    Ok(out)
}

/// Index, constraint-coupled relative degree and regularity at `probes`.
///
/// `ν` is the declared index; the analysis only confirms it. `d'` is the
/// smallest `k` for which `J_d^(ν) L_g L_f^(k−1) x_d` is nonzero at a
/// quorum of the probes.
pub fn analyze_index(sys: &DaeSystem, probes: &[Vec<f64>], tol: &Tolerances) -> Result<IndexAnalysis> {
    if probes.is_empty() {
        return Err(Error::InvalidInput("no probe points".into()));
    }
    let nu = sys.declared_index;
    let mut deficient = Vec::new();
    let mut j_a_rank = usize::MAX;
    let mut jds = Vec::with_capacity(probes.len());
    for (p, x) in probes.iter().enumerate() {
        let res = sys.phi_residual(x);
        if !(res <= tol.manifold_tol) {
            return Err(Error::OffManifold {
                residual: res,
                tol: tol.manifold_tol,
            });
        }
        let (jd, ja) = constraint_jacobians(sys, x, nu)?;
        let rank = numeric_rank(&ja, tol.rank_tol)?;
        j_a_rank = j_a_rank.min(rank);
        if rank < sys.n_m {
            deficient.push(p);
        }
        jds.push(jd);
    }
    if !deficient.is_empty() {
        return Err(Error::InconsistentIndex {
            level: nu,
            probes: deficient,
        });
    }

    let need = (D_PRIME_QUORUM * probes.len() as f64).ceil() as usize;
    let mut d_prime = None;
    for k in 1..=MAX_D_PRIME {
        let mut hits = 0;
        for (x, jd) in probes.iter().zip(&jds) {
            let coupling = jd.matmul(&raw_input_coupling(sys, x, k)?);
            if coupling.max_abs() > tol.rank_tol {
                hits += 1;
            }
        }
        if hits >= need {
            d_prime = Some(k);
            break;
        }
    }
    let d_prime = d_prime.ok_or_else(|| {
        Error::InvalidInput(format!(
            "input does not reach the constraint within {MAX_D_PRIME} drift differentiations"
        ))
    })?;

    let offending = regularity_failures(sys, probes, nu, d_prime, tol)?;
    if !offending.is_empty() {
        return Err(Error::RegularityViolated { probes: offending });
    }
    Ok(IndexAnalysis {
        nu,
        d_prime,
        d: nu + d_prime - 1,
        j_a_rank,
        regular: true,
    })
}

/// Probes where `[J_a^(ν) | η^(ν) g_d]` loses full row rank.
pub fn regularity_failures(sys: &DaeSystem, probes: &[Vec<f64>], nu: usize, d_prime: usize, tol: &Tolerances) -> Result<Vec<usize>> {
    let mut bad = Vec::new();
    for (p, x) in probes.iter().enumerate() {
        if !extended_jacobian_regular(sys, x, nu, d_prime, tol)? {
            bad.push(p);
        }
    }
    Ok(bad)
}

pub fn extended_jacobian_regular(sys: &DaeSystem, x: &[f64], nu: usize, d_prime: usize, tol: &Tolerances) -> Result<bool> {
    let (_, ja) = constraint_jacobians(sys, x, nu)?;
    let eta_g = control_influence(sys, x, nu, d_prime)?.matmul(&sys.g_d(x));
    let mut ext = DenseMatrix::zeros(sys.n_m, ja.cols() + eta_g.cols());
    for i in 0..sys.n_m {
        for j in 0..ja.cols() {
            ext[(i, j)] = ja[(i, j)];
        }
        for j in 0..eta_g.cols() {
            ext[(i, ja.cols() + j)] = eta_g[(i, j)];
        }
    }
    Ok(numeric_rank(&ext, tol.rank_tol)? == sys.n_m)
}

/// Probes where some `φ^(k)`, `k < ν`, fails to vanish.
pub fn chain_failures(sys: &DaeSystem, probes: &[Vec<f64>], tol: f64) -> Vec<usize> {
    probes
        .iter()
        .enumerate()
        .filter(|(_, x)| !(sys.chain_residual(x) <= tol))
        .map(|(i, _)| i)
        .collect()
}

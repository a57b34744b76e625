//! Projected dynamics on the constraint manifold and the Lie-derivative
//! machinery behind (high-order) barrier conditions.

use std::fmt;

use crate::model::{constraint_jacobians, constraint_jacobians_jet, extended_jacobian_regular, DaeSystem, IndexAnalysis};
use crate::numeric::diff::{directional, ScalarFn};
use crate::numeric::jet::{constants, max_level, Jet};
use crate::numeric::jet_linalg::{pinv_jet, JetMat};
use crate::numeric::matrix::{norm_inf, DenseMatrix};
use crate::numeric::svd::pseudoinverse;
use crate::{Error, Result, Tolerances};

/// Candidate barrier `b`, safety function `h` and linear class-K gains.
///
/// `gains[i]` multiplies `ψ_i` in `ψ_(i+1) = L_f̂ ψ_i + gains[i] ψ_i`; the
/// last gain enters the enforced row.
#[derive(Clone)]
pub struct BarrierSpec {
    pub b: ScalarFn,
    pub h: ScalarFn,
    pub hocbf_order: usize,
    pub gains: Vec<f64>,
}

impl fmt::Debug for BarrierSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BarrierSpec")
            .field("hocbf_order", &self.hocbf_order)
            .field("gains", &self.gains)
            .finish()
    }
}

impl BarrierSpec {
    pub fn new(b: ScalarFn, h: ScalarFn, hocbf_order: usize, gains: Vec<f64>) -> Result<Self> {
        if hocbf_order == 0 {
            return Err(Error::InvalidInput("HOCBF order must be at least 1".into()));
        }
        if gains.len() != hocbf_order {
            return Err(Error::InvalidInput(format!(
                "order {hocbf_order} needs {hocbf_order} gains, got {}",
                gains.len()
            )));
        }
        if gains.iter().any(|k| !(k.is_finite() && *k > 0.0)) {
            return Err(Error::InvalidInput("class-K gains must be positive".into()));
        }
        Ok(BarrierSpec { b, h, hocbf_order, gains })
    }

    /// Same order with one gain repeated at every level.
    pub fn uniform(b: ScalarFn, h: ScalarFn, hocbf_order: usize, kappa: f64) -> Result<Self> {
        Self::new(b, h, hocbf_order, vec![kappa; hocbf_order])
    }

    pub fn b(&self, x: &[f64]) -> f64 {
        (self.b)(&constants(x)).re()
    }

    pub fn h(&self, x: &[f64]) -> f64 {
        (self.h)(&constants(x)).re()
    }

    /// Copy with `b` shifted by a constant.
    pub fn with_offset(&self, offset: f64) -> Self {
        let b = self.b.clone();
        BarrierSpec {
            b: std::sync::Arc::new(move |x: &[Jet]| b(x) + offset),
            ..self.clone()
        }
    }
}

/// Terms of the enforced barrier row `a_row · u + c_const ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct HocbfTerms {
    /// `ψ_0 … ψ_(d−1)` at the point.
    pub psi: Vec<f64>,
    pub a_row: Vec<f64>,
    pub c_const: f64,
    /// `L_f̂ ψ_(d−1)`, i.e. `c_const` without the class-K term.
    pub lf_last: f64,
}

/// Projected fields `f̂`, `ĝ` and projectors built from a [`DaeSystem`].
#[derive(Clone, Debug)]
pub struct ProjectedDynamics {
    pub system: DaeSystem,
    pub analysis: IndexAnalysis,
    pub tol: Tolerances,
}

impl ProjectedDynamics {
    pub fn new(system: DaeSystem, analysis: IndexAnalysis, tol: Tolerances) -> Self {
        ProjectedDynamics { system, analysis, tol }
    }

    pub fn nu(&self) -> usize {
        self.analysis.nu
    }

    pub fn check_on_manifold(&self, x: &[f64]) -> Result<()> {
        let res = self.system.phi_residual(x);
        if res <= self.tol.manifold_tol {
            Ok(())
        } else {
            Err(Error::OffManifold {
                residual: res,
                tol: self.tol.manifold_tol,
            })
        }
    }

    /// `(f̂, ĝ)` at a jet point, no manifold or regularity checks.
    pub fn fields_jet(&self, x: &[Jet]) -> Result<(Vec<Jet>, JetMat)> {
        let sys = &self.system;
        let (jd, ja) = constraint_jacobians_jet(sys, x, self.nu())?;
        let ja_pinv = pinv_jet(&ja, self.tol.rank_tol)?;
        let m = ja_pinv.matmul(&jd).neg();
        let fd = sys.f_d_jet(x);
        let gd = sys.g_d_jet(x);
        let fa = m.matvec(&fd);
        let ga = m.matmul(&gd);
        let mut f_hat = fd;
        f_hat.extend(fa);
        let mut g_hat = JetMat::zeros(sys.n_x(), sys.n_u);
        for i in 0..sys.n_d {
            for j in 0..sys.n_u {
                g_hat.set(i, j, gd.get(i, j));
            }
        }
        for i in 0..sys.n_a {
            for j in 0..sys.n_u {
                g_hat.set(sys.n_d + i, j, ga.get(i, j));
            }
        }
        Ok((f_hat, g_hat))
    }

    /// `f̂` at a jet point, with NaN entries standing in for failures so the
    /// call can sit inside differentiated closures.
    pub(crate) fn f_hat_or_nan(&self, x: &[Jet]) -> Vec<Jet> {
        match self.fields_jet(x) {
            Ok((f, _)) => f,
            Err(_) => vec![Jet::constant(f64::NAN).promote(max_level(x)); x.len()],
        }
    }

    /// Projected fields at a manifold point.
    pub fn projected_fields(&self, x: &[f64]) -> Result<(Vec<f64>, DenseMatrix)> {
        self.check_on_manifold(x)?;
        if !extended_jacobian_regular(&self.system, x, self.nu(), self.analysis.d_prime, &self.tol)? {
            return Err(Error::RegularityViolated { probes: vec![0] });
        }
        self.fields_unchecked(x)
    }

    /// Projected fields without the manifold and regularity checks; used
    /// inside integrator stages that sit slightly off the manifold.
    pub fn fields_unchecked(&self, x: &[f64]) -> Result<(Vec<f64>, DenseMatrix)> {
        let (f, g) = self.fields_jet(&constants(x))?;
        let f: Vec<f64> = f.iter().map(Jet::re).collect();
        let g = g.re();
        if f.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("projected drift".into()));
        }
        g.ensure_finite("projected input matrix")?;
        Ok((f, g))
    }

    /// `P^(k)(x) = I − J_a^(k) (J_a^(k))†`.
    pub fn projection_operator(&self, x: &[f64], k: usize) -> Result<DenseMatrix> {
        if k < 1 || k > self.nu() {
            return Err(Error::InvalidInput(format!("projection level {k} outside 1..={}", self.nu())));
        }
        let (_, ja) = constraint_jacobians(&self.system, x, k)?;
        projector_from(&ja, self.tol.rank_tol)
    }

    /// `L_f̂^j ψ` at a jet point.
    fn lf_power(&self, psi: &dyn Fn(&[Jet]) -> Jet, y: &[Jet], j: usize) -> Jet {
        if j == 0 {
            return psi(y);
        }
        let f = self.f_hat_or_nan(y);
        directional(&|z: &[Jet]| self.lf_power(psi, z, j - 1), y, &f)
    }

    /// `(L_f̂^k ψ(x), L_ĝ L_f̂^(k−1) ψ(x))`.
    pub fn lie_chain(&self, psi: &dyn Fn(&[Jet]) -> Jet, x: &[f64], order: usize) -> Result<(f64, Vec<f64>)> {
        if order == 0 {
            return Err(Error::InvalidInput("Lie chain order must be at least 1".into()));
        }
        let xj = constants(x);
        let lf = self.lf_power(psi, &xj, order).re();
        let (_, g) = self.fields_jet(&xj)?;
        let mut row = Vec::with_capacity(self.system.n_u);
        for j in 0..self.system.n_u {
            let dir: Vec<Jet> = (0..g.rows()).map(|i| g.get(i, j)).collect();
            let v = directional(&|z: &[Jet]| self.lf_power(psi, z, order - 1), &xj, &dir);
            row.push(v.re());
        }
        if !lf.is_finite() || row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Lie derivative".into()));
        }
        Ok((lf, row))
    }

    /// Values of the hierarchy and the enforced row at `x`.
    pub fn hocbf_terms(&self, spec: &BarrierSpec, x: &[f64]) -> Result<HocbfTerms> {
        let (_, g) = self.fields_jet(&constants(x))?;
        let drift = |y: &[Jet]| self.f_hat_or_nan(y);
        let terms = hierarchy_terms(spec, x, &drift, &g.re())?;
        let norm = norm_inf(&terms.a_row);
        if norm < self.tol.rank_tol && spec.b(x).abs() <= self.tol.boundary_band {
            return Err(Error::DegenerateRow { norm });
        }
        Ok(terms)
    }
}

/// `ψ_i` at a jet point for the hierarchy in `spec` along `drift`.
fn psi_jet(spec: &BarrierSpec, drift: &dyn Fn(&[Jet]) -> Vec<Jet>, y: &[Jet], i: usize) -> Jet {
    if i == 0 {
        return (spec.b)(y);
    }
    let f = drift(y);
    let lv = max_level(y).max(max_level(&f));
    let lifted: Vec<Jet> = y.iter().zip(&f).map(|(&a, &b)| Jet::lift_at(a, b, lv)).collect();
    let w = psi_jet(spec, drift, &lifted, i - 1).promote(lv + 1);
    let (value, lie) = w.split();
    lie + value * spec.gains[i - 1]
}

/// Hierarchy values, input row and constant term for an arbitrary
/// control-affine field `(drift, g)` evaluated at `x`.
pub fn hierarchy_terms(spec: &BarrierSpec, x: &[f64], drift: &dyn Fn(&[Jet]) -> Vec<Jet>, g: &DenseMatrix) -> Result<HocbfTerms> {
    let d = spec.hocbf_order;
    let xj = constants(x);
    let psi: Vec<f64> = (0..d).map(|i| psi_jet(spec, drift, &xj, i).re()).collect();
    let f = drift(&xj);
    let last = |z: &[Jet]| psi_jet(spec, drift, z, d - 1);
    let lf_last = directional(&last, &xj, &f).re();
    let a_row: Vec<f64> = (0..g.cols()).map(|j| directional(&last, &xj, &constants(&g.col(j))).re()).collect();
    let c_const = lf_last + spec.gains[d - 1] * psi[d - 1];
    if !c_const.is_finite() || a_row.iter().any(|v| !v.is_finite()) || psi.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("barrier hierarchy".into()));
    }
    Ok(HocbfTerms {
        psi,
        a_row,
        c_const,
        lf_last,
    })
}

/// `I − A A†` for a real matrix.
pub fn projector_from(ja: &DenseMatrix, rank_tol: f64) -> Result<DenseMatrix> {
    let p = pseudoinverse(ja, rank_tol)?;
    let n = ja.rows();
    Ok(DenseMatrix::identity(n).sub(&ja.matmul(&p)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{analyze_index, InputPolytope};
    use crate::numeric::diff::{gradient, VectorFn};
    use std::sync::Arc;

    fn toy_pd() -> ProjectedDynamics {
        let phi: VectorFn = Arc::new(|x: &[Jet]| vec![x[0] - x[1]]);
        let sys = DaeSystem::new(
            "toy",
            1,
            1,
            1,
            1,
            Arc::new(|_x: &[Jet]| vec![Jet::zero()]),
            Arc::new(|_x: &[Jet]| vec![Jet::constant(1.0)]),
            vec![phi.clone(), phi],
            1,
            InputPolytope::unbounded(1),
        )
        .unwrap();
        let tol = Tolerances::default();
        let a = analyze_index(&sys, &[vec![0.2, 0.2]], &tol).unwrap();
        ProjectedDynamics::new(sys, a, tol)
    }

    // ẋ1 = x2, ẋ2 = u with a trivial algebraic state x3 = x1
    fn double_integrator() -> ProjectedDynamics {
        let phi: VectorFn = Arc::new(|x: &[Jet]| vec![x[2] - x[0]]);
        let sys = DaeSystem::new(
            "di",
            2,
            1,
            1,
            1,
            Arc::new(|x: &[Jet]| vec![x[1], Jet::zero()]),
            Arc::new(|_x: &[Jet]| vec![Jet::zero(), Jet::constant(1.0)]),
            vec![phi.clone(), phi],
            1,
            InputPolytope::unbounded(1),
        )
        .unwrap();
        let tol = Tolerances::default();
        let a = analyze_index(&sys, &[vec![0.0, 1.0, 0.0]], &tol).unwrap();
        ProjectedDynamics::new(sys, a, tol)
    }

    #[test]
    fn toy_fields() {
        let (f, g) = toy_pd().projected_fields(&[0.4, 0.4]).unwrap();
        assert_eq!(f, vec![0.0, 0.0]);
        assert_eq!(g, DenseMatrix::from_rows(&[vec![1.0], vec![1.0]]));
    }

    #[test]
    fn off_manifold_rejected() {
        let r = toy_pd().projected_fields(&[0.4, 0.0]);
        assert!(matches!(r, Err(Error::OffManifold { .. })));
    }

    #[test]
    fn full_rank_projector_vanishes() {
        let p = toy_pd().projection_operator(&[0.1, 0.1], 1).unwrap();
        assert_eq!(p.max_abs(), 0.0);
    }

    #[test]
    fn rank_deficient_projector() {
        let ja = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]);
        let p = projector_from(&ja, 1e-10).unwrap();
        assert_eq!(p, DenseMatrix::diag(&[0.0, 1.0]));
    }

    #[test]
    fn constant_psi_has_zero_lie_derivatives() {
        let pd = double_integrator();
        let (lf, lg) = pd.lie_chain(&|_: &[Jet]| Jet::constant(2.0), &[0.3, 1.0, 0.3], 2).unwrap();
        assert_eq!(lf, 0.0);
        assert_eq!(lg, vec![0.0]);
    }

    #[test]
    fn double_integrator_relative_degree_two() {
        let pd = double_integrator();
        let (lf, lg) = pd.lie_chain(&|x: &[Jet]| x[0], &[0.3, 1.0, 0.3], 2).unwrap();
        assert_eq!(lf, 0.0);
        assert_eq!(lg, vec![1.0]);
        let (lf1, lg1) = pd.lie_chain(&|x: &[Jet]| x[0], &[0.3, 1.0, 0.3], 1).unwrap();
        assert_eq!((lf1, lg1), (1.0, vec![0.0]));
    }

    #[test]
    fn order_one_terms_are_plain_cbf() {
        let pd = toy_pd();
        let b: ScalarFn = Arc::new(|x: &[Jet]| 1.0 - x[0] * x[0]);
        let spec = BarrierSpec::uniform(b.clone(), b, 1, 3.0).unwrap();
        let x = [0.5, 0.5];
        let t = pd.hocbf_terms(&spec, &x).unwrap();
        let grad = gradient(&*spec.b, &x).unwrap();
        let (f, g) = pd.projected_fields(&x).unwrap();
        let lf: f64 = grad.iter().zip(&f).map(|(a, b)| a * b).sum();
        let lg: f64 = grad.iter().zip(g.col(0)).map(|(a, b)| a * b).sum();
        assert!((t.c_const - (lf + 3.0 * 0.75)).abs() < 1e-14);
        assert!((t.a_row[0] - lg).abs() < 1e-14);
        assert_eq!(t.psi, vec![0.75]);
    }

    #[test]
    fn constant_barrier_row_is_trivial() {
        let pd = double_integrator();
        let b: ScalarFn = Arc::new(|_: &[Jet]| Jet::constant(2.0));
        let spec = BarrierSpec::uniform(b.clone(), b, 3, 1.0).unwrap();
        let t = pd.hocbf_terms(&spec, &[0.0, 1.0, 0.0]).unwrap();
        assert_eq!(t.a_row, vec![0.0]);
        assert!(t.c_const > 0.0);
    }

    #[test]
    fn second_order_hierarchy_on_double_integrator() {
        // b = x1: ψ1 = x2 + k0 x1, row: u + k1 (x2 + k0 x1) + k0 x2
        let pd = double_integrator();
        let b: ScalarFn = Arc::new(|x: &[Jet]| x[0]);
        let spec = BarrierSpec::new(b.clone(), b, 2, vec![2.0, 5.0]).unwrap();
        let x = [0.3, -1.0, 0.3];
        let t = pd.hocbf_terms(&spec, &x).unwrap();
        assert!((t.psi[1] - (-1.0 + 0.6)).abs() < 1e-14);
        assert!((t.a_row[0] - 1.0).abs() < 1e-14);
        let expect = 2.0 * -1.0 + 5.0 * (-1.0 + 0.6);
        assert!((t.c_const - expect).abs() < 1e-13);
    }

    #[test]
    fn gains_validated() {
        let b: ScalarFn = Arc::new(|x: &[Jet]| x[0]);
        assert!(BarrierSpec::new(b.clone(), b.clone(), 2, vec![1.0]).is_err());
        assert!(BarrierSpec::new(b.clone(), b, 1, vec![-1.0]).is_err());
    }
}

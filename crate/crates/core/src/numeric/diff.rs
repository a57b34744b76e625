//! Forward-mode differentiation on top of [`Jet`].

use std::sync::Arc;

use super::jet::{max_level, Jet};
use super::jet_linalg::JetMat;
use super::matrix::DenseMatrix;
use crate::{Error, Result};

/// Vector-valued map evaluable on jets.
pub type VectorFn = Arc<dyn Fn(&[Jet]) -> Vec<Jet> + Send + Sync>;
/// Scalar map evaluable on jets.
pub type ScalarFn = Arc<dyn Fn(&[Jet]) -> Jet + Send + Sync>;

/// Value of a map together with its Jacobian at a point.
#[derive(Debug, Clone)]
pub struct DualVector {
    pub value: Vec<f64>,
    /// `value.len() × seeds` matrix of first derivatives.
    pub tangent: DenseMatrix,
}

impl DualVector {
    pub fn seeds(&self) -> usize {
        self.tangent.cols()
    }
}

/// Evaluates `f` and all its first derivatives at `x`. Each seed direction
/// is pushed through as its own single-infinitesimal pass.
pub fn dual_eval(f: &dyn Fn(&[Jet]) -> Vec<Jet>, x: &[f64]) -> Result<DualVector> {
    let base: Vec<Jet> = x.iter().map(|&v| Jet::constant(v)).collect();
    let value: Vec<f64> = f(&base).iter().map(Jet::re).collect();
    let cols = jacobian_jet(f, &base)?;
    let mut tangent = DenseMatrix::zeros(value.len(), x.len());
    for i in 0..value.len() {
        for j in 0..x.len() {
            tangent[(i, j)] = cols.get(i, j).re();
        }
    }
    if value.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("map value".into()));
    }
    Ok(DualVector { value, tangent })
}

/// Jacobian `∂f/∂x` at a real point.
pub fn jacobian(f: &dyn Fn(&[Jet]) -> Vec<Jet>, x: &[f64]) -> Result<DenseMatrix> {
    let base: Vec<Jet> = x.iter().map(|&v| Jet::constant(v)).collect();
    let j = jacobian_jet(f, &base)?;
    let out = j.re();
    out.ensure_finite("jacobian")?;
    Ok(out)
}

/// Jacobian at a jet point; entries keep the derivative structure of `x`.
pub fn jacobian_jet(f: &dyn Fn(&[Jet]) -> Vec<Jet>, x: &[Jet]) -> Result<JetMat> {
    let lv = max_level(x);
    let n = x.len();
    let mut cols: Vec<Vec<Jet>> = Vec::with_capacity(n);
    let mut rows = None;
    for j in 0..n {
        let seeded: Vec<Jet> = x
            .iter()
            .enumerate()
            .map(|(k, &xk)| {
                let t = if k == j { 1.0 } else { 0.0 };
                Jet::lift_at(xk, Jet::constant(t), lv)
            })
            .collect();
        let y = f(&seeded);
        rows.get_or_insert(y.len());
        cols.push(y.iter().map(|v| v.promote(lv + 1).eps()).collect());
    }
    let m = match rows {
        Some(m) => m,
        None => f(x).len(),
    };
    let mut out = JetMat::zeros(m, n);
    for (j, c) in cols.iter().enumerate() {
        if c.len() != m {
            return Err(Error::InvalidInput("map output length varies".into()));
        }
        for (i, v) in c.iter().enumerate() {
            out.set(i, j, *v);
        }
    }
    if !out.is_finite() {
        return Err(Error::NonFinite("jacobian".into()));
    }
    Ok(out)
}

/// Gradient of a scalar map at a jet point.
pub fn gradient_jet(f: &dyn Fn(&[Jet]) -> Jet, x: &[Jet]) -> Result<Vec<Jet>> {
    let j = jacobian_jet(&|y: &[Jet]| vec![f(y)], x)?;
    Ok(j.row(0).to_vec())
}

pub fn gradient(f: &dyn Fn(&[Jet]) -> Jet, x: &[f64]) -> Result<Vec<f64>> {
    let base: Vec<Jet> = x.iter().map(|&v| Jet::constant(v)).collect();
    Ok(gradient_jet(f, &base)?.iter().map(Jet::re).collect())
}

/// Directional derivative `Dψ(x)·v` as a jet at the level of `x` and `v`.
pub fn directional(f: &dyn Fn(&[Jet]) -> Jet, x: &[Jet], v: &[Jet]) -> Jet {
    assert_eq!(x.len(), v.len(), "direction length mismatch");
    let lv = max_level(x).max(max_level(v));
    let lifted: Vec<Jet> = x.iter().zip(v).map(|(&a, &b)| Jet::lift_at(a, b, lv)).collect();
    f(&lifted).promote(lv + 1).eps()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_map_has_identity_jacobian() {
        let j = jacobian(&|x: &[Jet]| x.to_vec(), &[1.0, -2.0, 0.5]).unwrap();
        assert_eq!(j, DenseMatrix::identity(3));
    }

    #[test]
    fn hand_differentiated_example() {
        let f = |x: &[Jet]| vec![x[0] * x[0], x[0] * x[1]];
        let j = jacobian(&f, &[2.0, 3.0]).unwrap();
        assert_eq!(j, DenseMatrix::from_rows(&[vec![4.0, 0.0], vec![3.0, 2.0]]));
    }

    #[test]
    fn dual_vector_tracks_seed_count() {
        let f = |x: &[Jet]| vec![x[0] * x[1] * x[2]];
        let d = dual_eval(&f, &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(d.seeds(), 3);
        assert_eq!(d.value, vec![6.0]);
        assert_eq!(d.tangent.row(0), &[6.0, 3.0, 2.0]);
    }

    #[test]
    fn non_finite_reported() {
        let f = |x: &[Jet]| vec![x[0].ln()];
        assert!(matches!(jacobian(&f, &[0.0]), Err(Error::NonFinite(_))));
    }

    #[test]
    fn directional_of_constant_is_zero() {
        let f = |_: &[Jet]| Jet::constant(3.0);
        let d = directional(&f, &[Jet::constant(1.0)], &[Jet::constant(5.0)]);
        assert_eq!(d.re(), 0.0);
    }
}

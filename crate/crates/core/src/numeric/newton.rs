use super::diff::jacobian;
use super::jet::Jet;
use super::matrix::norm_inf;
use super::svd::pseudoinverse;
use crate::{Error, Result};

const BACKTRACK: usize = 12;
const PINV_TOL: f64 = 1e-12;

/// Newton iteration on `r(x) = 0` with a pseudoinverse step, so
/// over- and under-determined residuals are handled in the least-squares
/// / minimum-norm sense. A halving line search guards each step.
pub fn newton_root(r: &dyn Fn(&[Jet]) -> Vec<Jet>, x0: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let all: Vec<usize> = (0..x0.len()).collect();
    newton_root_subset(r, x0, &all, tol, max_iter)
}

/// Newton iteration moving only the coordinates listed in `free`.
pub fn newton_root_subset(r: &dyn Fn(&[Jet]) -> Vec<Jet>, x0: &[f64], free: &[usize], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let eval = |x: &[f64]| -> Vec<f64> {
        let xj: Vec<Jet> = x.iter().map(|&v| Jet::constant(v)).collect();
        r(&xj).iter().map(Jet::re).collect()
    };
    let mut x = x0.to_vec();
    let mut res = eval(&x);
    let mut norm = norm_inf(&res);
    if !norm.is_finite() {
        return Err(Error::NonFinite("newton residual".into()));
    }
    for it in 0..max_iter {
        if norm <= tol {
            return Ok(x);
        }
        let sub = |z: &[Jet]| {
            let mut full: Vec<Jet> = x.iter().map(|&v| Jet::constant(v)).collect();
            for (k, &i) in free.iter().enumerate() {
                full[i] = z[k];
            }
            r(&full)
        };
        let z0: Vec<f64> = free.iter().map(|&i| x[i]).collect();
        let j = jacobian(&sub, &z0)?;
        let step = pseudoinverse(&j, PINV_TOL)?.matvec(&res);
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..BACKTRACK {
            let mut trial = x.clone();
            for (k, &i) in free.iter().enumerate() {
                trial[i] -= lambda * step[k];
            }
            let tr = eval(&trial);
            let tn = norm_inf(&tr);
            if tn.is_finite() && tn < norm {
                x = trial;
                res = tr;
                norm = tn;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(Error::NoConvergence {
                last: x,
                residual: norm,
                iterations: it + 1,
            });
        }
    }
    if norm <= tol {
        Ok(x)
    } else {
        Err(Error::NoConvergence {
            last: x,
            residual: norm,
            iterations: max_iter,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_converges_in_one_step() {
        let x = newton_root(&|x: &[Jet]| vec![x[0] - 1.0], &[0.0], 1e-14, 1).unwrap();
        assert_eq!(x, vec![1.0]);
    }

    #[test]
    fn square_root_of_four() {
        let x = newton_root(&|x: &[Jet]| vec![x[0] * x[0] - 4.0], &[3.0], 1e-12, 50).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn reports_stall() {
        let e = newton_root(&|x: &[Jet]| vec![x[0] * x[0] + 1.0], &[0.5], 1e-12, 20);
        match e {
            Err(Error::NoConvergence { residual, .. }) => assert!(residual >= 1.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn subset_leaves_other_coordinates() {
        let r = |x: &[Jet]| vec![x[1] - x[0] * x[0]];
        let x = newton_root_subset(&r, &[3.0, 0.0], &[1], 1e-12, 10).unwrap();
        assert_eq!(x[0], 3.0);
        assert!((x[1] - 9.0).abs() < 1e-12);
    }
}

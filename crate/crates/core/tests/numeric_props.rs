use daecbf_core::numeric::diff::jacobian;
use daecbf_core::numeric::jet::Jet;
use daecbf_core::numeric::matrix::DenseMatrix;
use daecbf_core::numeric::newton::newton_root;
use daecbf_core::numeric::svd::{numeric_rank, pseudoinverse};
use proptest::prelude::*;

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = DenseMatrix> {
    prop::collection::vec(-3.0f64..3.0, rows * cols).prop_map(move |d| DenseMatrix::new(rows, cols, d).unwrap())
}

fn shaped() -> impl Strategy<Value = DenseMatrix> {
    (1usize..5, 1usize..5).prop_flat_map(|(r, c)| matrix(r, c))
}

/// Product of an `r×k` and a `k×c` factor, so the rank is at most `k`.
fn low_rank() -> impl Strategy<Value = DenseMatrix> {
    (2usize..5, 2usize..5, 1usize..2).prop_flat_map(|(r, c, k)| (matrix(r, k), matrix(k, c)).prop_map(|(a, b)| a.matmul(&b)))
}

fn close(a: &DenseMatrix, b: &DenseMatrix, tol: f64) -> bool {
    a.sub(b).max_abs() <= tol * (1.0 + a.max_abs().max(b.max_abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn penrose_conditions(a in prop_oneof![shaped(), low_rank()]) {
        let p = pseudoinverse(&a, 1e-10).unwrap();
        prop_assert!(close(&a.matmul(&p).matmul(&a), &a, 1e-9));
        prop_assert!(close(&p.matmul(&a).matmul(&p), &p, 1e-9));
        let ap = a.matmul(&p);
        let pa = p.matmul(&a);
        prop_assert!(close(&ap, &ap.transpose(), 1e-9));
        prop_assert!(close(&pa, &pa.transpose(), 1e-9));
    }

    #[test]
    fn low_rank_is_detected(a in low_rank()) {
        prop_assert!(numeric_rank(&a, 1e-10).unwrap() <= 1);
    }

    #[test]
    fn jacobian_matches_central_differences(x in prop::collection::vec(-1.5f64..1.5, 3)) {
        let f = |z: &[Jet]| vec![z[0].sin() * z[1] + z[2] * z[2], (z[0] * z[2]).exp() - z[1].cos(), z[1] / (z[2] * z[2] + 1.0)];
        let j = jacobian(&f, &x).unwrap();
        let h = 1e-6;
        for c in 0..3 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[c] += h;
            xm[c] -= h;
            let fp = f(&xp.iter().map(|&v| Jet::constant(v)).collect::<Vec<_>>());
            let fm = f(&xm.iter().map(|&v| Jet::constant(v)).collect::<Vec<_>>());
            for r in 0..3 {
                let fd = (fp[r].re() - fm[r].re()) / (2.0 * h);
                prop_assert!((fd - j[(r, c)]).abs() < 1e-6 * (1.0 + fd.abs()), "({r},{c}): {fd} vs {}", j[(r, c)]);
            }
        }
    }

    #[test]
    fn newton_projection_is_idempotent(x in prop::collection::vec(-2.0f64..2.0, 3)) {
        // Unit sphere in R³: the root set is reached and a second solve
        // leaves the point where it is.
        let r = |z: &[Jet]| vec![z[0] * z[0] + z[1] * z[1] + z[2] * z[2] - 1.0];
        prop_assume!(x.iter().map(|v| v * v).sum::<f64>() > 0.05);
        let y = newton_root(&r, &x, 1e-13, 50).unwrap();
        let n: f64 = y.iter().map(|v| v * v).sum();
        prop_assert!((n - 1.0).abs() <= 1e-12);
        let z = newton_root(&r, &y, 1e-13, 50).unwrap();
        prop_assert_eq!(y, z);
    }
}

#[test]
fn rank_deficient_pseudoinverse_by_hand() {
    // [[1, 1], [1, 1]]† = [[1, 1], [1, 1]] / 4
    let a = DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
    let p = pseudoinverse(&a, 1e-10).unwrap();
    for v in p.data() {
        assert!((v - 0.25).abs() < 1e-14);
    }
}

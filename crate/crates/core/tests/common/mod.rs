//! Brute-force oracles shared by the integration tests. They use plain
//! vectors and their own elimination so that they do not lean on the code
//! under test.
#![allow(dead_code)]

use rand::Rng;

/// Row-major dense matrix as nested vectors.
pub type Rows = Vec<Vec<f64>>;

/// Solves a square system by Gaussian elimination with partial pivoting.
pub fn gauss_solve(a: &Rows, b: &[f64]) -> Option<Vec<f64>> {
    let n = a.len();
    let mut m: Rows = a
        .iter()
        .zip(b)
        .map(|(row, &v)| {
            let mut r = row.clone();
            r.push(v);
            r
        })
        .collect();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs()))?;
        if m[p][c].abs() < 1e-12 {
            return None;
        }
        m.swap(c, p);
        for i in 0..n {
            if i != c {
                let f = m[i][c] / m[c][c];
                for j in c..=n {
                    m[i][j] -= f * m[c][j];
                }
            }
        }
    }
    Some((0..n).map(|i| m[i][n] / m[i][i]).collect())
}

/// Numeric rank by Gaussian elimination with partial pivoting.
pub fn rank(rows: &Rows, tol: f64) -> usize {
    let mut m = rows.clone();
    let (nr, nc) = (m.len(), m.first().map_or(0, Vec::len));
    let mut r = 0;
    for c in 0..nc {
        if r == nr {
            break;
        }
        let p = (r..nr).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
        if m[p][c].abs() <= tol {
            continue;
        }
        m.swap(r, p);
        for i in r + 1..nr {
            let f = m[i][c] / m[r][c];
            for j in c..nc {
                m[i][j] -= f * m[r][j];
            }
        }
        r += 1;
    }
    r
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    go(0, n, k, &mut cur, &mut out);
    out
}

/// Whether `A u ≤ r` has a solution, by enumerating the vertices of the
/// system restricted to a maximal set of independent columns.
pub fn vertex_feasible(a: &Rows, r: &[f64], tol: f64) -> bool {
    let n = a.first().map_or(0, Vec::len);
    // Independent columns span the column space of A, so the restricted
    // system is feasible exactly when the original one is, and it is pointed.
    let mut cols: Vec<usize> = Vec::new();
    for c in 0..n {
        let mut trial = cols.clone();
        trial.push(c);
        let sub: Rows = a.iter().map(|row| trial.iter().map(|&j| row[j]).collect()).collect();
        if rank(&sub, 1e-9) == trial.len() {
            cols = trial;
        }
    }
    let k = cols.len();
    let sub: Rows = a.iter().map(|row| cols.iter().map(|&j| row[j]).collect()).collect();
    if k == 0 {
        return r.iter().all(|&v| v >= -tol);
    }
    for rows in combinations(a.len(), k) {
        let sq: Rows = rows.iter().map(|&i| sub[i].clone()).collect();
        let rhs: Vec<f64> = rows.iter().map(|&i| r[i]).collect();
        if let Some(v) = gauss_solve(&sq, &rhs) {
            let ok = sub
                .iter()
                .zip(r)
                .all(|(row, &ri)| row.iter().zip(&v).map(|(p, q)| p * q).sum::<f64>() <= ri + tol);
            if ok {
                return true;
            }
        }
    }
    false
}

/// Random system with up to `max_vars` columns and `max_rows` rows;
/// occasionally rank deficient.
pub fn random_system<R: Rng>(rng: &mut R, max_vars: usize, max_rows: usize) -> (Rows, Vec<f64>) {
    let n = rng.gen_range(1..=max_vars);
    let m = rng.gen_range(1..=max_rows);
    let mut a: Rows = (0..m).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    if n > 1 && rng.gen_bool(0.1) {
        let (src, dst) = (0, n - 1);
        let s = rng.gen_range(-2.0..2.0);
        for row in a.iter_mut() {
            row[dst] = s * row[src];
        }
    }
    if rng.gen_bool(0.05) {
        let i = rng.gen_range(0..m);
        a[i].iter_mut().for_each(|v| *v = 0.0);
    }
    let r = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
    (a, r)
}

/// Euclidean projection of `p` onto `{A u ≤ r}` by Dykstra's alternating
/// projections onto the half-spaces.
pub fn dykstra(p: &[f64], a: &Rows, r: &[f64], sweeps: usize) -> Vec<f64> {
    let n = p.len();
    let m = a.len();
    let mut x = p.to_vec();
    let mut incr = vec![vec![0.0; n]; m];
    for _ in 0..sweeps {
        for i in 0..m {
            let y: Vec<f64> = (0..n).map(|j| x[j] + incr[i][j]).collect();
            let row = &a[i];
            let nn: f64 = row.iter().map(|v| v * v).sum();
            let viol = row.iter().zip(&y).map(|(p, q)| p * q).sum::<f64>() - r[i];
            let z: Vec<f64> = if viol > 0.0 && nn > 0.0 {
                (0..n).map(|j| y[j] - viol / nn * row[j]).collect()
            } else {
                y.clone()
            };
            for j in 0..n {
                incr[i][j] = y[j] - z[j];
            }
            x = z;
        }
    }
    x
}

/// Root of a scalar function on `[lo, hi]` by bisection.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    assert!(flo * f(hi) <= 0.0, "no sign change on [{lo}, {hi}]");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

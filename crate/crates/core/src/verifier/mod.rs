//! Offline verification of barrier correctness and filter feasibility.
//!
//! Correctness asks whether every manifold point with `b ≥ 0` inside the
//! domain box also has `h ≥ 0`. Feasibility asks whether, at every such
//! point, the per-point affine system in `u` has a solution; an infeasible
//! point comes with a Farkas multiplier.

pub mod lp;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::benchmarks::DomainBox;
use crate::filter::{compatibility_blocks, TRIVIAL_RHS};
use crate::model::{constraint_jacobians, DaeSystem};
use crate::numeric::diff::{gradient, ScalarFn};
use crate::numeric::jet::Jet;
use crate::numeric::matrix::{norm2, norm_inf, DenseMatrix};
use crate::numeric::newton::newton_root;
use crate::numeric::svd::pseudoinverse;
use crate::parallel::{map_indexed, Execution};
use crate::projection::{hierarchy_terms, BarrierSpec, ProjectedDynamics};
use crate::simulator::reproject;
use crate::{Error, Result};

pub use lp::{lp_feasible_raw, lp_minimize, FarkasCertificate, LpSolution, LpVerdict, FEAS_TOL};

/// Slack used for the sign tests of the correctness check and for the
/// defining constraints of a counterexample.
pub const CORRECTNESS_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StackKind {
    /// Compatibility, barrier row with class-K term, input rows.
    Full,
    /// Compatibility and input rows only.
    Interior,
    /// Compatibility, tangency row without class-K term, input rows.
    Boundary,
}

/// Row counts of the blocks of a [`FeasibilityStack`], in order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StackLayout {
    /// Rows per sign of the compatibility pairs (`n_m · ν`).
    pub compat: usize,
    pub barrier: bool,
    pub input: usize,
}

impl StackLayout {
    pub fn rows(&self) -> usize {
        2 * self.compat + usize::from(self.barrier) + self.input
    }
}

/// `A u ≤ r` at one state. Rows are `−E u ≤ −e` and `E u ≤ e` for the
/// compatibility equalities `E u = e`, then the barrier row, then the
/// input polytope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityStack {
    pub a_mat: DenseMatrix,
    pub r_vec: Vec<f64>,
    pub kind: StackKind,
    pub layout: StackLayout,
}

impl FeasibilityStack {
    /// Rows that are not identically satisfied: zero rows with
    /// `r ≥ −TRIVIAL_RHS` are dropped. Returns the kept row indices too.
    pub fn reduced(&self, zero_tol: f64) -> (DenseMatrix, Vec<f64>, Vec<usize>) {
        let mut a = DenseMatrix::zeros(0, self.a_mat.cols());
        let mut r = Vec::new();
        let mut kept = Vec::new();
        for (i, &ri) in self.r_vec.iter().enumerate() {
            let row = self.a_mat.row(i);
            if norm_inf(row) <= zero_tol && ri >= -TRIVIAL_RHS {
                continue;
            }
            a.push_row(row);
            r.push(ri);
            kept.push(i);
        }
        (a, r, kept)
    }

    /// Splits a multiplier over this stack into `(λ⁻, λ⁺, λᵇ, λᵘ)`.
    pub fn partition(&self, cert: &FarkasCertificate) -> PartitionedCertificate {
        let l = &cert.lambda;
        let c = self.layout.compat;
        let lambda_b = self.layout.barrier.then(|| l[2 * c]);
        let u0 = 2 * c + usize::from(self.layout.barrier);
        PartitionedCertificate {
            lambda_minus: l[..c].to_vec(),
            lambda_plus: l[c..2 * c].to_vec(),
            lambda_b,
            lambda_u: l[u0..].to_vec(),
            lambda: l.clone(),
            residual_eq: cert.residual_eq,
            value: cert.value,
        }
    }
}

/// Farkas multiplier split along the stack blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionedCertificate {
    pub lambda_minus: Vec<f64>,
    pub lambda_plus: Vec<f64>,
    pub lambda_b: Option<f64>,
    pub lambda_u: Vec<f64>,
    pub lambda: Vec<f64>,
    pub residual_eq: f64,
    pub value: f64,
}

impl PartitionedCertificate {
    pub fn certificate(&self) -> FarkasCertificate {
        FarkasCertificate {
            lambda: self.lambda.clone(),
            residual_eq: self.residual_eq,
            value: self.value,
        }
    }
}

/// Stack of the given kind at a manifold point.
pub fn assemble_stack(pd: &ProjectedDynamics, spec: &BarrierSpec, x: &[f64], kind: StackKind) -> Result<FeasibilityStack> {
    pd.check_on_manifold(x)?;
    if kind == StackKind::Boundary {
        let b = spec.b(x);
        if !(b.abs() <= pd.tol.boundary_band) {
            return Err(Error::InvalidInput(format!(
                "boundary stack needs |b| ≤ {}, got b = {b:.3e}",
                pd.tol.boundary_band
            )));
        }
    }
    let sys = &pd.system;
    let (e_mat, e_vec) = compatibility_blocks(pd, x)?;
    let compat = e_vec.len();
    let mut a = DenseMatrix::zeros(0, sys.n_u);
    let mut r = Vec::new();
    for i in 0..compat {
        let neg: Vec<f64> = e_mat.row(i).iter().map(|v| -v).collect();
        a.push_row(&neg);
        r.push(-e_vec[i]);
    }
    for i in 0..compat {
        a.push_row(e_mat.row(i));
        r.push(e_vec[i]);
    }
    let barrier = kind != StackKind::Interior;
    if barrier {
        let (_, g) = pd.projected_fields(x)?;
        let terms = hierarchy_terms(spec, x, &|y: &[Jet]| pd.f_hat_or_nan(y), &g)?;
        let neg: Vec<f64> = terms.a_row.iter().map(|v| -v).collect();
        a.push_row(&neg);
        r.push(if kind == StackKind::Full { terms.c_const } else { terms.lf_last });
    }
    let poly = &sys.input_polytope;
    for i in 0..poly.rows() {
        a.push_row(poly.a.row(i));
        r.push(poly.r[i]);
    }
    a.ensure_finite("feasibility stack")?;
    Ok(FeasibilityStack {
        a_mat: a,
        r_vec: r,
        kind,
        layout: StackLayout {
            compat,
            barrier,
            input: poly.rows(),
        },
    })
}

/// Feasibility of a stack. Trivial rows are removed before the simplex
/// runs; a certificate is reported over the full row layout with zero
/// multipliers on the removed rows.
pub fn lp_feasible(stack: &FeasibilityStack, zero_tol: f64) -> Result<LpVerdict> {
    let (a, r, kept) = stack.reduced(zero_tol);
    match lp_feasible_raw(&a, &r)? {
        LpVerdict::Feasible(u) => Ok(LpVerdict::Feasible(u)),
        LpVerdict::Infeasible(cert) => {
            let mut lambda = vec![0.0; stack.r_vec.len()];
            for (k, &i) in kept.iter().enumerate() {
                lambda[i] = cert.lambda[k];
            }
            let mut full = FarkasCertificate {
                lambda,
                residual_eq: 0.0,
                value: 0.0,
            };
            let (_, res, val) = full.recheck(&stack.a_mat, &stack.r_vec);
            full.residual_eq = res;
            full.value = val;
            Ok(LpVerdict::Infeasible(full))
        }
    }
}

/// `min_u max_i (A_i u − r_i) / ‖[A_i, r_i]‖∞`, floored at −1. Positive
/// exactly when the stack is infeasible.
pub fn infeasibility_margin(stack: &FeasibilityStack, zero_tol: f64) -> Result<f64> {
    let (a, r, _) = stack.reduced(zero_tol);
    let n = a.cols();
    let mut am = DenseMatrix::zeros(0, n + 1);
    let mut rm = Vec::with_capacity(r.len() + 1);
    for (i, &ri) in r.iter().enumerate() {
        let row = a.row(i);
        let s = norm_inf(row).max(ri.abs());
        let mut scaled: Vec<f64> = row.iter().map(|v| v / s).collect();
        scaled.push(-1.0);
        am.push_row(&scaled);
        rm.push(ri / s);
    }
    let mut floor = vec![0.0; n + 1];
    floor[n] = -1.0;
    am.push_row(&floor);
    rm.push(1.0);
    let mut cost = vec![0.0; n + 1];
    cost[n] = 1.0;
    match lp_minimize(&cost, &am, &rm)? {
        LpSolution::Optimal { value, .. } => Ok(value),
        _ => Err(Error::InvalidInput("margin program is always feasible and bounded".into())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Certified,
    Violated,
}

/// Local search against the grid oracle for the correctness check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleStats {
    pub nlp_min: f64,
    pub grid_min: f64,
    /// Lipschitz estimate times the half cell diagonal.
    pub lipschitz_slack: f64,
    pub grid_points: usize,
    pub grid_resolution: usize,
    pub agree: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub verdict: Verdict,
    /// Minimiser of `h` (correctness) or the worst sampled state
    /// (feasibility); a counterexample when the verdict is `Violated`.
    pub witness_or_counterexample: Option<Vec<f64>>,
    pub certificate: Option<PartitionedCertificate>,
    pub samples: usize,
    pub wall_time_s: Option<f64>,
    /// Minimum of `h` (correctness) or largest infeasibility margin.
    pub value: f64,
    pub oracle: Option<OracleStats>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct VerificationReport {
    pub correctness: Option<CheckReport>,
    pub interior: Option<CheckReport>,
    pub boundary: Option<CheckReport>,
}

impl VerificationReport {
    pub fn any_violated(&self) -> bool {
        [&self.correctness, &self.interior, &self.boundary]
            .iter()
            .any(|c| c.as_ref().is_some_and(|c| c.verdict == Verdict::Violated))
    }

    /// Copy with timing removed, for byte-stable output.
    pub fn without_timing(&self) -> Self {
        let mut r = self.clone();
        for c in [&mut r.correctness, &mut r.interior, &mut r.boundary].into_iter().flatten() {
            c.wall_time_s = None;
        }
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifierConfig {
    pub samples: usize,
    pub seed: u32,
    /// Grid points per differential coordinate.
    pub grid_resolution: usize,
    /// Upper bound on grid size; the resolution is lowered to fit.
    pub grid_max_points: usize,
    /// Number of best samples refined by local search.
    pub local_starts: usize,
    pub local_iters: usize,
    pub refine_iters: usize,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for VerifierConfig {
    fn default() -> Self {
        VerifierConfig {
            samples: 4096,
            seed: 0,
            grid_resolution: 50,
            grid_max_points: 1 << 20,
            local_starts: 32,
            local_iters: 60,
            refine_iters: 30,
            execution: Execution::Auto,
        }
    }
}

impl VerifierConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 || self.grid_resolution < 2 || self.grid_max_points < 2 {
            return Err(Error::InvalidInput(
                "verifier needs samples ≥ 1 and a grid of at least 2 points".into(),
            ));
        }
        Ok(())
    }

    /// Grid resolution after applying the point budget.
    pub fn effective_resolution(&self, dims: usize) -> usize {
        let mut res = self.grid_resolution;
        while res > 2 && (res as f64).powi(dims as i32) > self.grid_max_points as f64 {
            res -= 1;
        }
        res
    }
}

/// Scrambled Sobol point `index` mapped into the box.
pub fn sobol_point(domain: &DomainBox, index: usize, seed: u32) -> Vec<f64> {
    let unit: Vec<f64> = (0..domain.dim())
        .map(|d| sobol_burley::sample(index as u32, d as u32, seed) as f64)
        .collect();
    domain.scale(&unit)
}

/// Moves the algebraic part of `x` onto `φ = 0` and keeps the point only
/// if it stays in the box.
fn onto_manifold(sys: &DaeSystem, domain: &DomainBox, x: &[f64], newton_tol: f64, iters: usize) -> Option<Vec<f64>> {
    let y = reproject(sys, x, newton_tol, iters).ok()?;
    (domain.contains(&y, 0.0) && y.iter().all(|v| v.is_finite())).then_some(y)
}

/// Point on `{φ = 0, b = 0}` near `x`, by minimum-norm Newton in all
/// coordinates.
fn onto_boundary(pd: &ProjectedDynamics, spec: &BarrierSpec, domain: &DomainBox, x: &[f64]) -> Option<Vec<f64>> {
    let phi = pd.system.constraint_chain[0].clone();
    let b = spec.b.clone();
    let r = move |z: &[Jet]| {
        let mut v = phi(z);
        v.push(b(z));
        v
    };
    let y = newton_root(&r, x, pd.tol.newton_tol, pd.tol.newton_max_iter).ok()?;
    let ok = domain.contains(&y, 0.0) && pd.system.phi_residual(&y) <= pd.tol.manifold_tol && spec.b(&y).abs() <= pd.tol.boundary_band;
    ok.then_some(y)
}

/// Gradient of `s(x_d, x_a(x_d))` along the manifold, in the differential
/// coordinates.
fn reduced_gradient(sys: &DaeSystem, s: &ScalarFn, x: &[f64]) -> Result<Vec<f64>> {
    let g = gradient(&**s, x)?;
    let (jd, ja) = constraint_jacobians(sys, x, 0)?;
    let dxa = pseudoinverse(&ja, 1e-12)?.matmul(&jd).scale(-1.0);
    let ga = &g[sys.n_d..];
    Ok((0..sys.n_d)
        .map(|j| g[j] + (0..sys.n_a).map(|i| ga[i] * dxa[(i, j)]).sum::<f64>())
        .collect())
}

struct Candidate {
    x: Vec<f64>,
    h: f64,
}

/// Projected-gradient descent of `h` over `{φ = 0, b ≥ 0}` in the box.
fn local_descent(
    sys: &DaeSystem,
    spec: &BarrierSpec,
    domain: &DomainBox,
    start: Candidate,
    iters: usize,
    newton_tol: f64,
    newton_iters: usize,
) -> Candidate {
    let n_d = sys.n_d;
    let width = norm2(&domain.bounds[..n_d].iter().map(|(lo, hi)| hi - lo).collect::<Vec<_>>());
    let mut cur = start;
    let mut step = 0.05 * width;
    for _ in 0..iters {
        let Ok(mut g) = reduced_gradient(sys, &spec.h, &cur.x) else { break };
        let gn = norm2(&g);
        if !(gn > 1e-14) {
            break;
        }
        let mut improved = false;
        let mut tried_tangent = false;
        let mut s = step;
        for _ in 0..30 {
            let gn = norm2(&g);
            if !(gn > 1e-14) {
                break;
            }
            let mut y = cur.x.clone();
            for j in 0..n_d {
                y[j] -= s * g[j] / gn;
            }
            domain.clamp(&mut y, n_d);
            if let Some(y) = onto_manifold(sys, domain, &y, newton_tol, newton_iters) {
                let bv = spec.b(&y);
                let hv = spec.h(&y);
                if bv >= 0.0 && hv < cur.h {
                    cur = Candidate { x: y, h: hv };
                    improved = true;
                    break;
                }
                if bv < 0.0 && !tried_tangent {
                    // Slide along the level set of b instead.
                    tried_tangent = true;
                    if let Ok(gb) = reduced_gradient(sys, &spec.b, &cur.x) {
                        let nb: f64 = gb.iter().map(|v| v * v).sum();
                        let dotp: f64 = g.iter().zip(&gb).map(|(a, b)| a * b).sum();
                        if nb > 0.0 && dotp > 0.0 {
                            for j in 0..n_d {
                                g[j] -= dotp / nb * gb[j];
                            }
                            continue;
                        }
                    }
                }
            }
            s *= 0.5;
        }
        if !improved {
            if step < 1e-10 * width {
                break;
            }
            step *= 0.5;
        } else {
            step = (step * 1.5).min(0.25 * width);
        }
    }
    cur
}

/// Checks `h ≥ 0` on `{φ = 0, b ≥ 0}` inside the box by local search from
/// Sobol starts, cross-checked against a grid over the differential
/// coordinates.
pub fn verify_correctness(
    sys: &DaeSystem,
    spec: &BarrierSpec,
    domain: &DomainBox,
    tol: &crate::Tolerances,
    cfg: &VerifierConfig,
) -> Result<CheckReport> {
    let clock = Instant::now();
    cfg.validate()?;
    domain.validate(sys.n_x())?;
    let (nt, ni) = (tol.newton_tol, tol.newton_max_iter);
    let starts: Vec<Option<Candidate>> = map_indexed(cfg.execution, cfg.samples, |i| {
        let x = onto_manifold(sys, domain, &sobol_point(domain, i, cfg.seed), nt, ni)?;
        (spec.b(&x) >= 0.0).then(|| Candidate { h: spec.h(&x), x })
    });
    let mut starts: Vec<(usize, Candidate)> = starts.into_iter().enumerate().filter_map(|(i, c)| c.map(|c| (i, c))).collect();
    let lipschitz = starts
        .iter()
        .filter_map(|(_, c)| reduced_gradient(sys, &spec.h, &c.x).ok().map(|g| norm2(&g)))
        .fold(0.0, f64::max);
    let samples = starts.len();
    starts.sort_by(|a, b| a.1.h.total_cmp(&b.1.h).then(a.0.cmp(&b.0)));
    starts.truncate(cfg.local_starts.max(1));
    let refined: Vec<Candidate> = {
        let seeds: Vec<Candidate> = starts.into_iter().map(|(_, c)| c).collect();
        map_indexed(cfg.execution, seeds.len(), |k| {
            let c = Candidate {
                x: seeds[k].x.clone(),
                h: seeds[k].h,
            };
            local_descent(sys, spec, domain, c, cfg.local_iters, nt, ni)
        })
    };
    let best = refined.into_iter().min_by(|a, b| a.h.total_cmp(&b.h));

    let grid = grid_minimum(sys, spec, domain, tol, cfg);
    let nlp_min = best.as_ref().map_or(f64::INFINITY, |c| c.h);
    let res = cfg.effective_resolution(sys.n_d);
    let half_diag = 0.5
        * norm2(
            &domain.bounds[..sys.n_d]
                .iter()
                .map(|(lo, hi)| (hi - lo) / (res - 1) as f64)
                .collect::<Vec<_>>(),
        );
    let slack = 2.0 * lipschitz * half_diag;
    let grid_min = grid.as_ref().map_or(f64::INFINITY, |c| c.h);
    let nlp_ok = nlp_min >= -CORRECTNESS_TOL;
    let grid_ok = grid_min >= -CORRECTNESS_TOL;
    let agree = nlp_min >= grid_min - slack && nlp_ok == grid_ok;
    if nlp_ok != grid_ok && (nlp_min - grid_min).abs() > slack {
        return Err(Error::OracleDisagreement { nlp_min, grid_min });
    }
    let oracle = OracleStats {
        nlp_min,
        grid_min,
        lipschitz_slack: slack,
        grid_points: res.pow(sys.n_d as u32),
        grid_resolution: res,
        agree,
    };
    let winner = match (best, grid) {
        (Some(a), Some(b)) => Some(if b.h < a.h { b } else { a }),
        (a, b) => a.or(b),
    };
    let Some(winner) = winner else {
        return Err(Error::InvalidInput("no manifold point with b ≥ 0 found in the domain box".into()));
    };
    let verdict = if winner.h >= -CORRECTNESS_TOL {
        Verdict::Certified
    } else {
        Verdict::Violated
    };
    Ok(CheckReport {
        verdict,
        witness_or_counterexample: Some(winner.x),
        certificate: None,
        samples,
        wall_time_s: Some(clock.elapsed().as_secs_f64()),
        value: winner.h,
        oracle: Some(oracle),
    })
}

/// Smallest `h` over grid points of the differential box, each completed
/// onto the manifold, that satisfy `b ≥ 0`.
fn grid_minimum(
    sys: &DaeSystem,
    spec: &BarrierSpec,
    domain: &DomainBox,
    tol: &crate::Tolerances,
    cfg: &VerifierConfig,
) -> Option<Candidate> {
    let n_d = sys.n_d;
    let res = cfg.effective_resolution(n_d);
    let total = res.pow(n_d as u32);
    let center = domain.center();
    let evals = map_indexed(cfg.execution, total, |idx| {
        let mut x = center.clone();
        let mut k = idx;
        for (j, xj) in x.iter_mut().enumerate().take(n_d) {
            let (lo, hi) = domain.bounds[j];
            *xj = lo + (hi - lo) * (k % res) as f64 / (res - 1) as f64;
            k /= res;
        }
        let y = onto_manifold(sys, domain, &x, tol.newton_tol, tol.newton_max_iter)?;
        (spec.b(&y) >= 0.0).then(|| (spec.h(&y), idx, y))
    });
    evals
        .into_iter()
        .flatten()
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .map(|(h, _, x)| Candidate { x, h })
}

/// Kind of feasibility check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeasibilityKind {
    Interior,
    Boundary,
}

impl FeasibilityKind {
    pub fn stack(self) -> StackKind {
        match self {
            FeasibilityKind::Interior => StackKind::Interior,
            FeasibilityKind::Boundary => StackKind::Boundary,
        }
    }
}

fn sample_for(pd: &ProjectedDynamics, spec: &BarrierSpec, domain: &DomainBox, kind: FeasibilityKind, x: &[f64]) -> Option<Vec<f64>> {
    let tol = &pd.tol;
    let y = onto_manifold(&pd.system, domain, x, tol.newton_tol, tol.newton_max_iter)?;
    match kind {
        FeasibilityKind::Interior => (spec.b(&y) > 0.0).then_some(y),
        FeasibilityKind::Boundary => onto_boundary(pd, spec, domain, &y),
    }
}

fn margin_at(pd: &ProjectedDynamics, spec: &BarrierSpec, kind: FeasibilityKind, x: &[f64]) -> Option<f64> {
    let stack = assemble_stack(pd, spec, x, kind.stack()).ok()?;
    infeasibility_margin(&stack, pd.tol.rank_tol).ok()
}

/// Ascent on the infeasibility margin from `x`, staying on the sampled set.
fn refine(
    pd: &ProjectedDynamics,
    spec: &BarrierSpec,
    domain: &DomainBox,
    kind: FeasibilityKind,
    x: Vec<f64>,
    m: f64,
    iters: usize,
) -> (Vec<f64>, f64) {
    let n_d = pd.system.n_d;
    let width = norm2(&domain.bounds[..n_d].iter().map(|(lo, hi)| hi - lo).collect::<Vec<_>>());
    let (mut x, mut m) = (x, m);
    let mut step = 0.02 * width;
    for _ in 0..iters {
        if m > FEAS_TOL {
            break;
        }
        let fd = 1e-6 * width;
        let mut g = vec![0.0; n_d];
        for j in 0..n_d {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += fd;
            xm[j] -= fd;
            let (Some(p), Some(q)) = (
                sample_for(pd, spec, domain, kind, &xp).and_then(|y| margin_at(pd, spec, kind, &y)),
                sample_for(pd, spec, domain, kind, &xm).and_then(|y| margin_at(pd, spec, kind, &y)),
            ) else {
                continue;
            };
            g[j] = (p - q) / (2.0 * fd);
        }
        let gn = norm2(&g);
        if !(gn > 1e-12) {
            break;
        }
        let mut moved = false;
        let mut s = step;
        for _ in 0..20 {
            let mut y = x.clone();
            for j in 0..n_d {
                y[j] += s * g[j] / gn;
            }
            domain.clamp(&mut y, n_d);
            if let Some(y) = sample_for(pd, spec, domain, kind, &y) {
                if let Some(my) = margin_at(pd, spec, kind, &y) {
                    if my > m {
                        x = y;
                        m = my;
                        moved = true;
                        break;
                    }
                }
            }
            s *= 0.5;
        }
        if moved {
            step = (step * 1.5).min(0.2 * width);
        } else {
            step *= 0.25;
            if step < 1e-9 * width {
                break;
            }
        }
    }
    (x, m)
}

/// Per-point LP feasibility over Sobol samples of the interior
/// `{φ = 0, b > 0}` or the boundary band `{φ = 0, |b| ≤ band}`, followed
/// by local refinement of the worst sample.
pub fn verify_feasibility(
    pd: &ProjectedDynamics,
    spec: &BarrierSpec,
    domain: &DomainBox,
    kind: FeasibilityKind,
    cfg: &VerifierConfig,
) -> Result<CheckReport> {
    let clock = Instant::now();
    cfg.validate()?;
    domain.validate(pd.system.n_x())?;
    let zero_tol = pd.tol.rank_tol;
    let evaluated = map_indexed(cfg.execution, cfg.samples, |i| -> Option<Result<(Vec<f64>, f64, bool)>> {
        let x = sample_for(pd, spec, domain, kind, &sobol_point(domain, i, cfg.seed))?;
        let stack = match assemble_stack(pd, spec, &x, kind.stack()) {
            Ok(s) => s,
            Err(e) => return Some(Err(e)),
        };
        let verdict = match lp_feasible(&stack, zero_tol) {
            Ok(v) => v,
            Err(e) => return Some(Err(e)),
        };
        let margin = match infeasibility_margin(&stack, zero_tol) {
            Ok(m) => m,
            Err(e) => return Some(Err(e)),
        };
        Some(Ok((x, margin, verdict.is_feasible())))
    });
    let mut points = Vec::new();
    for e in evaluated.into_iter().flatten() {
        points.push(e?);
    }
    if points.is_empty() {
        return match kind {
            FeasibilityKind::Boundary => Err(Error::NoBoundarySamples),
            FeasibilityKind::Interior => Err(Error::InvalidInput("no interior samples in the domain box".into())),
        };
    }
    let samples = points.len();
    let first_bad = points.iter().position(|p| !p.2);
    let worst = points
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let (x_ce, value) = match first_bad {
        Some(i) => (points[i].0.clone(), points[i].1),
        None => {
            let (x, m, _) = points.swap_remove(worst);
            refine(pd, spec, domain, kind, x, m, cfg.refine_iters)
        }
    };
    let stack = assemble_stack(pd, spec, &x_ce, kind.stack())?;
    let (verdict, certificate) = match lp_feasible(&stack, zero_tol)? {
        LpVerdict::Feasible(_) => (Verdict::Certified, None),
        LpVerdict::Infeasible(cert) => (Verdict::Violated, Some(stack.partition(&cert))),
    };
    Ok(CheckReport {
        verdict,
        witness_or_counterexample: Some(x_ce),
        certificate,
        samples,
        wall_time_s: Some(clock.elapsed().as_secs_f64()),
        value,
        oracle: None,
    })
}

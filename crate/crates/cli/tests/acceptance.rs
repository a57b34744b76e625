//! Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
//! criterion fails. Tolerances and time limits are pinned below.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::fs;
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use daecbf_core::benchmarks::{flexible_manipulator, manipulator, wind_turbine, BenchmarkPreset, ManipulatorParams};
use daecbf_core::filter::{assemble_filter_qp, solve_qp, unaware_qp, FilterStatus, QpProblem};
use daecbf_core::model::{constraint_jacobians, DaeSystem, IndexAnalysis, InputPolytope};
use daecbf_core::numeric::diff::{jacobian, VectorFn};
use daecbf_core::numeric::jet::Jet;
use daecbf_core::numeric::matrix::{norm_inf, DenseMatrix};
use daecbf_core::numeric::svd::numeric_rank;
use daecbf_core::projection::ProjectedDynamics;
use daecbf_core::simulator::{consistent_init, integrate, reproject, run, ControllerMode, StepStatus, Trajectory};
use daecbf_core::verifier::{lp_feasible_raw, sobol_point, LpVerdict};
use daecbf_core::Tolerances;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

const TANGENCY_TOL: f64 = 1e-8;
const PROJECTOR_TOL: f64 = 1e-10;
const CERT_TOL: f64 = 1e-8;
const KKT_TOL: f64 = 1e-8;
const CE_TOL: f64 = 1e-6;
const MIN_ORDER: f64 = 3.7;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn cli(args: &[&str], out: &Path) -> (i32, f64) {
    let t0 = Instant::now();
    let o = Command::new(env!("CARGO_BIN_EXE_daecbf"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs");
    (o.status.code().unwrap_or(-1), t0.elapsed().as_secs_f64())
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn manifold_samples(preset: &BenchmarkPreset, n: usize) -> Vec<Vec<f64>> {
    let tol = Tolerances::default();
    (0..4 * n)
        .filter_map(|i| reproject(&preset.system, &sobol_point(&preset.domain, i, 1), tol.newton_tol, 50).ok())
        .filter(|x| preset.domain.contains(x, 0.0))
        .take(n)
        .collect()
}

fn index_and_degree() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, expected) in [("wind_turbine", (1, 2, 2)), ("manipulator", (2, 2, 3))] {
        let (code, secs) = cli(&["analyze", "--benchmark", name], dir.path());
        let a = read_json(&dir.path().join("analysis.json"));
        let got = (a["nu"].as_u64().unwrap(), a["d_prime"].as_u64().unwrap(), a["d"].as_u64().unwrap());
        pass &= code == 0 && got == expected && secs < 1.0;
        parts.push(format!("{name} {got:?} in {secs:.2} s"));
    }
    outcome(pass, format!("{} (expected (1, 2, 2) and (2, 2, 3), limit 1 s)", parts.join(", ")))
}

fn manipulator_run() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let (code, secs) = cli(&["simulate", "--benchmark", "manipulator", "--mode", "aware"], dir.path());
    let s = read_json(&dir.path().join("summary.json"));
    let b0 = s["b0"].as_f64().unwrap();
    let tip = s["max_last_state"].as_f64().unwrap();
    let min_b = s["summary"]["min_b"].as_f64().unwrap();
    let pass = code == 0
        && (b0 - 1.8).abs() < 1e-12
        && min_b >= 0.0
        && (1.45..=1.70).contains(&tip)
        && (0.13..=0.33).contains(&min_b)
        && secs < 30.0;
    outcome(
        pass,
        format!("b0 {b0:.6}, max tip {tip:.4} m in [1.45, 1.70], min b {min_b:.4} in [0.13, 0.33], {secs:.1} s (limit 30 s)"),
    )
}

fn wind_turbine_contrast() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let t0 = Instant::now();
    let (ca, _) = cli(&["simulate", "--benchmark", "wind_turbine", "--mode", "aware"], dir.path());
    let aware = read_json(&dir.path().join("summary.json"))["summary"].clone();
    let (cu, _) = cli(&["simulate", "--benchmark", "wind_turbine", "--mode", "unaware"], dir.path());
    let unaware = read_json(&dir.path().join("summary.json"))["summary"].clone();
    let secs = t0.elapsed().as_secs_f64();
    let f = |v: &Value, k: &str| v[k].as_f64().unwrap_or(f64::NAN);
    let t_inf = unaware["first_infeasible_time"].as_f64();
    let h_after = f(&unaware, "min_h_after_infeasible");
    let pass = ca == 0
        && cu == 0
        && f(&aware, "min_b") >= -1e-6
        && f(&aware, "min_h") >= -1e-6
        && f(&aware, "max_phi") <= 1e-8
        && t_inf.is_some_and(f64::is_finite)
        && h_after < 0.0
        && secs < 30.0;
    outcome(
        pass,
        format!(
            "aware min b {:.4}, min h {:.4}, max |phi| {:.1e}; unaware infeasible from t = {:.3} s, min h after {h_after:.4}; {secs:.1} s (limit 30 s)",
            f(&aware, "min_b"),
            f(&aware, "min_h"),
            f(&aware, "max_phi"),
            t_inf.unwrap_or(f64::NAN)
        ),
    )
}

fn tangency() -> Outcome {
    let t0 = Instant::now();
    let tol = Tolerances::default();
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for preset in [wind_turbine(), flexible_manipulator()] {
        let pd = preset.projected_dynamics(&tol).unwrap();
        let phi = preset.system.constraint_chain[0].clone();
        let pts = manifold_samples(&preset, 1000);
        count += pts.len();
        for x in &pts {
            let dphi = jacobian(&*phi, x).unwrap();
            let (f, g) = pd.projected_fields(x).unwrap();
            worst = worst.max(norm_inf(&dphi.matvec(&f)) / (1.0 + norm_inf(&f)));
            for j in 0..g.cols() {
                let col = g.col(j);
                worst = worst.max(norm_inf(&dphi.matvec(&col)) / (1.0 + norm_inf(&col)));
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    let pass = count == 2000 && worst <= TANGENCY_TOL && secs < 10.0;
    outcome(
        pass,
        format!("{count} points, worst relative |dphi . field| {worst:.1e} (tol {TANGENCY_TOL:.0e}), {secs:.2} s (limit 10 s)"),
    )
}

fn projector_algebra() -> Outcome {
    let tol = Tolerances::default();
    let mut worst: f64 = 0.0;
    let mut probes = 0;
    let mut full_rank = 0;
    for preset in [wind_turbine(), flexible_manipulator()] {
        let pd = preset.projected_dynamics(&tol).unwrap();
        for x in manifold_samples(&preset, 500) {
            for k in 1..=pd.nu() {
                let p = pd.projection_operator(&x, k).unwrap();
                let (_, ja) = constraint_jacobians(&pd.system, &x, k).unwrap();
                worst = worst
                    .max(p.matmul(&p).sub(&p).max_abs())
                    .max(p.sub(&p.transpose()).max_abs())
                    .max(p.matmul(&ja).max_abs());
                if numeric_rank(&ja, tol.rank_tol).unwrap() == ja.rows() {
                    full_rank += 1;
                    worst = worst.max(p.max_abs());
                }
                probes += 1;
            }
        }
    }
    // Both presets have full-rank J_a; a redundant pair of constraints gives
    // a nonzero projector.
    let pd = ProjectedDynamics::new(
        pair_system(),
        IndexAnalysis {
            nu: 1,
            d_prime: 1,
            d: 1,
            j_a_rank: 1,
            regular: true,
        },
        tol,
    );
    let mut rank_deficient = 0;
    for i in 0..500 {
        let t = -1.0 + 2.0 * i as f64 / 499.0;
        let x = [t * t, t, t * t];
        let p = pd.projection_operator(&x, 1).unwrap();
        let (_, ja) = constraint_jacobians(&pd.system, &x, 1).unwrap();
        worst = worst
            .max(p.matmul(&p).sub(&p).max_abs())
            .max(p.sub(&p.transpose()).max_abs())
            .max(p.matmul(&ja).max_abs())
            .max((p[(0, 0)] + p[(1, 1)] - 1.0).abs());
        rank_deficient += 1;
        probes += 1;
    }
    let pass = worst <= PROJECTOR_TOL;
    outcome(
        pass,
        format!("{probes} probes ({full_rank} with full-rank J_a, {rank_deficient} rank deficient), worst residual {worst:.1e} (tol {PROJECTOR_TOL:.0e})"),
    )
}

// ẋ_d = u with 0 = (x1 − x3, x2² − x3): J_a = (−1, −1)ᵀ has rank one.
fn pair_system() -> DaeSystem {
    let phi: VectorFn = Arc::new(|x: &[Jet]| vec![x[0] - x[2], x[1] * x[1] - x[2]]);
    DaeSystem::new(
        "pair",
        2,
        1,
        2,
        2,
        Arc::new(|_x: &[Jet]| vec![Jet::zero(), Jet::zero()]),
        Arc::new(|_x: &[Jet]| vec![Jet::constant(1.0), Jet::zero(), Jet::zero(), Jet::constant(1.0)]),
        vec![phi.clone(), phi],
        1,
        InputPolytope::unbounded(2),
    )
    .unwrap()
}

fn farkas_oracle() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut agree, mut infeasible, mut bad_cert) = (0, 0, 0);
    const CASES: usize = 10_000;
    for _ in 0..CASES {
        let (a, r) = common::random_system(&mut rng, 4, 12);
        let am = DenseMatrix::from_rows(&a);
        let oracle = common::vertex_feasible(&a, &r, 1e-9);
        match lp_feasible_raw(&am, &r).unwrap() {
            LpVerdict::Feasible(_) => agree += usize::from(oracle),
            LpVerdict::Infeasible(cert) => {
                agree += usize::from(!oracle);
                infeasible += 1;
                let (min_l, res, val) = cert.recheck(&am, &r);
                if !(min_l >= 0.0 && res <= CERT_TOL && (val + 1.0).abs() <= 1e-9) {
                    bad_cert += 1;
                }
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    let pass = agree == CASES && bad_cert == 0 && secs < 60.0;
    outcome(
        pass,
        format!(
            "{agree}/{CASES} verdicts match, {infeasible} certificates, {bad_cert} invalid (tol {CERT_TOL:.0e}), {secs:.1} s (limit 60 s)"
        ),
    )
}

fn verification_end_to_end() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let (code, secs) = cli(&["verify", "--benchmark", "manipulator"], dir.path());
    let report = read_json(&dir.path().join("report.json"));
    let verdicts: Vec<String> = ["correctness", "interior", "boundary"]
        .iter()
        .map(|c| report[c]["verdict"].as_str().unwrap_or("missing").to_string())
        .collect();
    let samples = report["interior"]["samples"].as_u64().unwrap_or(0);
    let certified = code == 0 && verdicts.iter().all(|v| v == "certified");

    let (code1, secs1) = cli(
        &[
            "verify",
            "--benchmark",
            "manipulator",
            "--checks",
            "correctness",
            "--override",
            "b_offset=1",
        ],
        dir.path(),
    );
    let report = read_json(&dir.path().join("report.json"));
    let violated = report["correctness"]["verdict"] == "violated";
    let x: Vec<f64> = serde_json::from_value(report["correctness"]["witness_or_counterexample"].clone()).unwrap_or_default();
    let preset = flexible_manipulator();
    let spec = preset.barrier.with_offset(1.0);
    let (phi, b, h) = if x.len() == preset.system.n_x() {
        (preset.system.phi_residual(&x), spec.b(&x), spec.h(&x))
    } else {
        (f64::NAN, f64::NAN, f64::NAN)
    };
    let ce_ok = code1 == 1 && violated && phi <= CE_TOL && b >= -CE_TOL && h < 0.0;
    let pass = certified && ce_ok && secs < 120.0;
    outcome(
        pass,
        format!(
            "b = h: {} at {samples} samples in {secs:.1} s (limit 120 s); b = h + 1: {} with |phi| {phi:.1e}, b {b:.3}, h {h:.3} ({secs1:.1} s)",
            verdicts.join("/"),
            report["correctness"]["verdict"].as_str().unwrap_or("missing")
        ),
    )
}

/// Stationarity residual and smallest inequality multiplier at `u`, with
/// multipliers fitted by least squares on the equality and active rows.
fn kkt(qp: &QpProblem, u: &[f64], active: &[usize]) -> (f64, f64) {
    let n = qp.n();
    let grad: Vec<f64> = qp.hessian.matvec(u).iter().zip(&qp.linear).map(|(a, b)| a + b).collect();
    let mut rows: common::Rows = Vec::new();
    let mut is_ineq = Vec::new();
    for i in 0..qp.eq_b.len() {
        rows.push(qp.eq_a.row(i).to_vec());
        is_ineq.push(false);
    }
    for &i in active {
        rows.push(qp.ineq_a.row(i).to_vec());
        is_ineq.push(true);
    }
    // Keep an independent subset so the normal equations are regular.
    let mut keep: Vec<usize> = Vec::new();
    for i in 0..rows.len() {
        if norm_inf(&rows[i]) <= 1e-12 {
            continue;
        }
        let mut trial: common::Rows = keep.iter().map(|&k| rows[k].clone()).collect();
        trial.push(rows[i].clone());
        if common::rank(&trial, 1e-9) == trial.len() {
            keep.push(i);
        }
    }
    let m = keep.len();
    let gram: common::Rows = keep
        .iter()
        .map(|&i| keep.iter().map(|&j| (0..n).map(|c| rows[i][c] * rows[j][c]).sum()).collect())
        .collect();
    let rhs: Vec<f64> = keep.iter().map(|&i| -(0..n).map(|c| rows[i][c] * grad[c]).sum::<f64>()).collect();
    let y = if m == 0 {
        Vec::new()
    } else {
        common::gauss_solve(&gram, &rhs).unwrap_or_else(|| vec![f64::NAN; m])
    };
    let mut res = grad.clone();
    for (k, &i) in keep.iter().enumerate() {
        for c in 0..n {
            res[c] += y[k] * rows[i][c];
        }
    }
    let min_mult = keep
        .iter()
        .zip(&y)
        .filter(|(&i, _)| is_ineq[i])
        .map(|(_, &v)| v)
        .fold(f64::INFINITY, f64::min);
    (norm_inf(&res) / (1.0 + norm_inf(&grad)), min_mult)
}

fn filter_kkt() -> Outcome {
    let tol = Tolerances::default();
    let (mut steps, mut worst_res, mut worst_stat, mut min_mult) = (0usize, 0.0f64, 0.0f64, f64::INFINITY);
    let mut states: Vec<(usize, Vec<f64>)> = Vec::new();
    let presets = [wind_turbine(), flexible_manipulator()];
    for (pi, preset) in presets.iter().enumerate() {
        let pd = preset.projected_dynamics(&tol).unwrap();
        for mode in [ControllerMode::Aware, ControllerMode::Unaware] {
            let sc = preset.scenario_for(mode);
            let traj: Trajectory = run(&pd, &sc).unwrap();
            for k in 0..traj.u.len() {
                if traj.status[k] != StepStatus::Optimal {
                    continue;
                }
                let x = &traj.x[k];
                let u_nom = (sc.nominal)(x);
                let qp = match mode {
                    ControllerMode::Aware => assemble_filter_qp(&pd, &sc.barrier, x, &u_nom).unwrap(),
                    _ => unaware_qp(&pd.system, &sc.barrier, x, &u_nom).unwrap(),
                };
                let r = solve_qp(&qp).unwrap();
                let u = r.u.clone().unwrap();
                worst_res = worst_res
                    .max(qp.violation(&u))
                    .max(norm_inf(&u.iter().zip(&traj.u[k]).map(|(a, b)| a - b).collect::<Vec<_>>()));
                let (stat, mult) = kkt(&qp, &u, &r.active_set);
                worst_stat = worst_stat.max(stat);
                min_mult = min_mult.min(mult);
                steps += 1;
                if mode == ControllerMode::Aware && k % 10 == 0 {
                    states.push((pi, x.clone()));
                }
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let (mut probes, mut nominal_feasible, mut worst_proj) = (0, 0, 0.0f64);
    let pds: Vec<_> = presets.iter().map(|p| p.projected_dynamics(&tol).unwrap()).collect();
    while probes < 1000 {
        let (pi, x) = &states[rng.gen_range(0..states.len())];
        let preset = &presets[*pi];
        let bound = preset.system.input_polytope.r.iter().cloned().fold(0.0, f64::max).max(1.0);
        let u_nom: Vec<f64> = (0..preset.system.n_u).map(|_| rng.gen_range(-bound..bound)).collect();
        let qp = assemble_filter_qp(&pds[*pi], &preset.barrier, x, &u_nom).unwrap();
        let r = solve_qp(&qp).unwrap();
        probes += 1;
        if r.status != FilterStatus::Optimal {
            continue;
        }
        let u = r.u.unwrap();
        if qp.violation(&u_nom) <= 0.0 {
            nominal_feasible += 1;
            worst_proj = worst_proj.max(norm_inf(&u.iter().zip(&u_nom).map(|(a, b)| a - b).collect::<Vec<_>>()));
        } else {
            let (stat, mult) = kkt(&qp, &u, &r.active_set);
            worst_stat = worst_stat.max(stat);
            min_mult = min_mult.min(mult);
            worst_res = worst_res.max(qp.violation(&u));
        }
    }
    let pass = worst_res <= KKT_TOL && worst_stat <= KKT_TOL && min_mult >= -KKT_TOL && worst_proj <= KKT_TOL && nominal_feasible >= 100;
    outcome(
        pass,
        format!(
            "{steps} optimal steps re-solved, worst residual {worst_res:.1e}, stationarity {worst_stat:.1e}, min multiplier {min_mult:.1e}; {probes} probes, {nominal_feasible} with feasible u_nom, worst |u - u_nom| {worst_proj:.1e} (tol {KKT_TOL:.0e})"
        ),
    )
}

fn integrator_order() -> Outcome {
    let p = ManipulatorParams::default();
    let preset = manipulator::with_params(p);
    let pd = preset.projected_dynamics(&Tolerances::default()).unwrap();
    let end = |dt: f64| {
        let mut x = consistent_init(&pd.system, &[0.3, -0.2, 1.0, 0.5], &[0.0], 1e-13, 50).unwrap();
        for _ in 0..(0.6 / dt).round() as usize {
            x = integrate(&pd, &x, &[0.0, 0.0], dt).unwrap();
        }
        x
    };
    let ends: Vec<Vec<f64>> = [0.02, 0.01, 0.005].iter().map(|&dt| end(dt)).collect();
    let diff = |a: &[f64], b: &[f64]| a[..4].iter().zip(&b[..4]).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    let order = (diff(&ends[0], &ends[1]) / diff(&ends[1], &ends[2])).log2();
    outcome(
        order >= MIN_ORDER,
        format!("Richardson order {order:.3} from dt = 0.02, 0.01, 0.005 (need >= {MIN_ORDER})"),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("index and relative degree", index_and_degree),
        ("manipulator safety run", manipulator_run),
        ("wind turbine contrast", wind_turbine_contrast),
        ("tangency", tangency),
        ("projector algebra", projector_algebra),
        ("Farkas oracle equivalence", farkas_oracle),
        ("verification end to end", verification_end_to_end),
        ("filter QP KKT soundness", filter_kkt),
        ("integrator order", integrator_order),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        failed += usize::from(!o.pass);
        println!(
            "criterion {} {}: {}: {}",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            name,
            o.detail
        );
    }
    println!("acceptance: {}/{} passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

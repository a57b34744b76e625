//! Closed-loop integration on the constraint manifold.

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::filter::{aware_filter, dae_unaware_filter, FilterStatus};
use crate::model::DaeSystem;
use crate::numeric::jet::Jet;
use crate::numeric::newton::newton_root_subset;
use crate::projection::{BarrierSpec, ProjectedDynamics};
use crate::{Error, Result};

/// Map from state to nominal input.
pub type NominalController = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Post-step residual the re-projection must reach.
pub const PROJECTION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerMode {
    Aware,
    Unaware,
    Nominal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfeasibilityPolicy {
    /// Apply the nominal input, clipped to the input box.
    #[default]
    HoldNominal,
    HoldZero,
    Halt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepStatus {
    Optimal,
    Infeasible,
    /// Open loop, no filter solved.
    Nominal,
}

impl StepStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            StepStatus::Optimal => "optimal",
            StepStatus::Infeasible => "infeasible",
            StepStatus::Nominal => "nominal",
        }
    }
}

#[derive(Clone)]
pub struct Scenario {
    pub system_id: String,
    pub barrier: BarrierSpec,
    pub mode: ControllerMode,
    pub x_d0: Vec<f64>,
    pub x_a_guess: Vec<f64>,
    pub dt: f64,
    pub horizon: f64,
    pub nominal: NominalController,
    pub policy: InfeasibilityPolicy,
}

impl std::fmt::Debug for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Scenario")
            .field("system_id", &self.system_id)
            .field("mode", &self.mode)
            .field("x_d0", &self.x_d0)
            .field("dt", &self.dt)
            .field("horizon", &self.horizon)
            .field("policy", &self.policy)
            .finish()
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidInput("dt must be positive".into()));
        }
        if !(self.horizon >= self.dt) || !self.horizon.is_finite() {
            return Err(Error::InvalidInput("horizon must be at least dt".into()));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub min_b: f64,
    pub min_h: f64,
    pub max_phi: f64,
    pub first_infeasible_time: Option<f64>,
    /// Smallest `h` at or after the first infeasible step.
    pub min_h_after_infeasible: Option<f64>,
    pub infeasible_steps: usize,
    pub steps: usize,
    pub halted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    /// Input applied from `t[k]` to `t[k+1]`.
    pub u: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub h: Vec<f64>,
    pub phi_res: Vec<f64>,
    pub status: Vec<StepStatus>,
    pub summary: TrajectorySummary,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    fn summarize(&mut self, halted: bool) {
        let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
        let first = self.status.iter().position(|s| *s == StepStatus::Infeasible);
        self.summary = TrajectorySummary {
            min_b: min(&self.b),
            min_h: min(&self.h),
            max_phi: self.phi_res.iter().copied().fold(0.0, f64::max),
            first_infeasible_time: first.map(|k| self.t[k]),
            min_h_after_infeasible: first.map(|k| min(&self.h[k..])),
            infeasible_steps: self.status.iter().filter(|s| **s == StepStatus::Infeasible).count(),
            steps: self.t.len().saturating_sub(1),
            halted,
        };
    }

    /// CSV with header `t,x1..,u1..,b,h,phi_res,status`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let n_x = self.x.first().map_or(0, Vec::len);
        let n_u = self.u.first().map_or(0, Vec::len);
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((1..=n_x).map(|i| format!("x{i}")));
        header.extend((1..=n_u).map(|i| format!("u{i}")));
        header.extend(["b", "h", "phi_res", "status"].map(String::from));
        w.write_record(&header)?;
        let fmt = |v: f64| format!("{v:.16e}");
        for k in 0..self.t.len() {
            let mut rec = vec![fmt(self.t[k])];
            rec.extend(self.x[k].iter().map(|&v| fmt(v)));
            rec.extend(self.u[k].iter().map(|&v| fmt(v)));
            rec.push(fmt(self.b[k]));
            rec.push(fmt(self.h[k]));
            rec.push(fmt(self.phi_res[k]));
            rec.push(self.status[k].as_str().to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Solves the algebraic part for a given differential state so that every
/// chain level below `ν` vanishes.
pub fn consistent_init(sys: &DaeSystem, x_d0: &[f64], x_a_guess: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    if x_d0.len() != sys.n_d || x_a_guess.len() != sys.n_a {
        return Err(Error::InvalidInput("initial state has wrong dimension".into()));
    }
    let mut x = x_d0.to_vec();
    x.extend_from_slice(x_a_guess);
    let levels = sys.declared_index;
    let chain = sys.constraint_chain.clone();
    let r = move |z: &[Jet]| -> Vec<Jet> { chain[..levels].iter().flat_map(|c| c(z)).collect() };
    let free: Vec<usize> = (sys.n_d..sys.n_x()).collect();
    newton_root_subset(&r, &x, &free, tol, max_iter)
}

/// Re-solves `φ(x) = 0` for the algebraic coordinates with `x_d` fixed.
pub fn reproject(sys: &DaeSystem, x: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let phi = sys.constraint_chain[0].clone();
    let free: Vec<usize> = (sys.n_d..sys.n_x()).collect();
    newton_root_subset(&|z: &[Jet]| phi(z), x, &free, tol, max_iter)
}

fn field(pd: &ProjectedDynamics, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
    let (f, g) = pd.fields_unchecked(x)?;
    let gu = g.matvec(u);
    Ok(f.iter().zip(&gu).map(|(a, b)| a + b).collect())
}

/// One RK4 step of the projected field with `u` held, then re-projection.
pub fn integrate(pd: &ProjectedDynamics, x: &[f64], u: &[f64], dt: f64) -> Result<Vec<f64>> {
    let axpy = |a: &[f64], s: f64, b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(p, q)| p + s * q).collect() };
    let k1 = field(pd, x, u)?;
    let k2 = field(pd, &axpy(x, dt / 2.0, &k1), u)?;
    let k3 = field(pd, &axpy(x, dt / 2.0, &k2), u)?;
    let k4 = field(pd, &axpy(x, dt, &k3), u)?;
    let next: Vec<f64> = (0..x.len())
        .map(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect();
    let out = reproject(&pd.system, &next, pd.tol.newton_tol, pd.tol.newton_max_iter)?;
    let res = pd.system.phi_residual(&out);
    if !(res <= PROJECTION_TOL) {
        return Err(Error::NoConvergence {
            last: out,
            residual: res,
            iterations: pd.tol.newton_max_iter,
        });
    }
    Ok(out)
}

/// Input chosen by the controller at `x`, with the filter status.
pub fn control(pd: &ProjectedDynamics, scenario: &Scenario, x: &[f64]) -> Result<(Vec<f64>, StepStatus)> {
    let u_nom = (scenario.nominal)(x);
    let filtered = match scenario.mode {
        ControllerMode::Nominal => return Ok((u_nom, StepStatus::Nominal)),
        ControllerMode::Aware => aware_filter(pd, &scenario.barrier, x, &u_nom),
        ControllerMode::Unaware => dae_unaware_filter(&pd.system, &scenario.barrier, x, &u_nom),
    };
    let fallback = |u_nom: Vec<f64>| -> Result<(Vec<f64>, StepStatus)> {
        match scenario.policy {
            InfeasibilityPolicy::HoldNominal => Ok((pd.system.input_polytope.clamp_box(&u_nom), StepStatus::Infeasible)),
            InfeasibilityPolicy::HoldZero => Ok((vec![0.0; pd.system.n_u], StepStatus::Infeasible)),
            InfeasibilityPolicy::Halt => Err(Error::FilterInfeasible { t: f64::NAN }),
        }
    };
    match filtered {
        Ok(r) if r.status == FilterStatus::Optimal => Ok((r.u.unwrap_or_default(), StepStatus::Optimal)),
        Ok(_) => fallback(u_nom),
        Err(e @ (Error::StructuralInfeasibility { .. } | Error::DegenerateRow { .. })) => {
            log::debug!("filter failed: {e}");
            fallback(u_nom)
        }
        Err(e) => Err(e),
    }
}

/// One closed-loop step: `(x_next, u, status)`.
pub fn step(pd: &ProjectedDynamics, scenario: &Scenario, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>, StepStatus)> {
    let (u, status) = control(pd, scenario, x)?;
    let next = integrate(pd, x, &u, scenario.dt)?;
    Ok((next, u, status))
}

/// Runs the scenario to its horizon. Under the `Halt` policy an infeasible
/// filter ends the run early with the trajectory recorded so far.
pub fn run(pd: &ProjectedDynamics, scenario: &Scenario) -> Result<Trajectory> {
    scenario.validate()?;
    let sys = &pd.system;
    let mut x = consistent_init(sys, &scenario.x_d0, &scenario.x_a_guess, pd.tol.newton_tol, pd.tol.newton_max_iter)?;
    let n = scenario.steps();
    let mut traj = Trajectory {
        t: Vec::with_capacity(n + 1),
        x: Vec::with_capacity(n + 1),
        u: Vec::with_capacity(n + 1),
        b: Vec::with_capacity(n + 1),
        h: Vec::with_capacity(n + 1),
        phi_res: Vec::with_capacity(n + 1),
        status: Vec::with_capacity(n + 1),
        summary: TrajectorySummary {
            min_b: f64::NAN,
            min_h: f64::NAN,
            max_phi: f64::NAN,
            first_infeasible_time: None,
            min_h_after_infeasible: None,
            infeasible_steps: 0,
            steps: 0,
            halted: false,
        },
    };
    let mut halted = false;
    for k in 0..=n {
        let (u, status) = match control(pd, scenario, &x) {
            Ok(v) => v,
            Err(Error::FilterInfeasible { .. }) => {
                halted = true;
                (vec![f64::NAN; sys.n_u], StepStatus::Infeasible)
            }
            Err(e) => return Err(e),
        };
        traj.t.push(k as f64 * scenario.dt);
        traj.b.push(scenario.barrier.b(&x));
        traj.h.push(scenario.barrier.h(&x));
        traj.phi_res.push(sys.phi_residual(&x));
        traj.x.push(x.clone());
        traj.u.push(u.clone());
        traj.status.push(status);
        if halted || k == n {
            break;
        }
        x = integrate(pd, &x, &u, scenario.dt)?;
    }
    traj.summarize(halted);
    Ok(traj)
}

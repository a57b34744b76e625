//! Preset systems, barriers and scenarios.

pub mod manipulator;
pub mod wind_turbine;

use serde::{Deserialize, Serialize};

use crate::model::{analyze_index, DaeSystem, IndexAnalysis};
use crate::projection::{BarrierSpec, ProjectedDynamics};
use crate::simulator::{consistent_init, Scenario};
use crate::{Error, Result, Tolerances};

pub use manipulator::{flexible_manipulator, ManipulatorParams};
pub use wind_turbine::{wind_turbine, WindTurbineParams};

/// Names accepted by [`by_name`].
pub const PRESET_NAMES: [&str; 2] = ["wind_turbine", "manipulator"];

/// Axis-aligned box over the full state `x = [x_d; x_a]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainBox {
    pub bounds: Vec<(f64, f64)>,
}

impl DomainBox {
    pub fn new(bounds: Vec<(f64, f64)>) -> Self {
        DomainBox { bounds }
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn validate(&self, n_x: usize) -> Result<()> {
        if self.bounds.len() != n_x {
            return Err(Error::InvalidInput(format!(
                "domain box has {} intervals, state has {n_x} coordinates",
                self.bounds.len()
            )));
        }
        for &(lo, hi) in &self.bounds {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::InvalidInput(format!("bad interval [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    pub fn contains(&self, x: &[f64], slack: f64) -> bool {
        self.bounds.iter().zip(x).all(|(&(lo, hi), &v)| v >= lo - slack && v <= hi + slack)
    }

    /// Maps a point of the unit cube onto the first `k` intervals.
    pub fn scale(&self, unit: &[f64]) -> Vec<f64> {
        unit.iter().zip(&self.bounds).map(|(&s, &(lo, hi))| lo + s * (hi - lo)).collect()
    }

    pub fn clamp(&self, x: &mut [f64], k: usize) {
        for (v, &(lo, hi)) in x.iter_mut().zip(&self.bounds).take(k) {
            *v = v.clamp(lo, hi);
        }
    }

    pub fn center(&self) -> Vec<f64> {
        self.bounds.iter().map(|&(lo, hi)| 0.5 * (lo + hi)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case")]
pub enum ParameterRecord {
    WindTurbine(WindTurbineParams),
    Manipulator(ManipulatorParams),
}

#[derive(Debug, Clone)]
pub struct BenchmarkPreset {
    pub name: String,
    pub system: DaeSystem,
    pub barrier: BarrierSpec,
    /// Default scenario in aware mode.
    pub scenario: Scenario,
    /// Baseline scenario: plain CBF `b = h` without the algebraic constraint.
    pub unaware_scenario: Scenario,
    /// Region used for index analysis and verification.
    pub domain: DomainBox,
    /// Starting points for the index probes; the algebraic part is solved.
    pub probe_guesses: Vec<Vec<f64>>,
    pub params: ParameterRecord,
}

impl BenchmarkPreset {
    /// Probe guesses moved onto the manifold.
    pub fn probes(&self, tol: &Tolerances) -> Result<Vec<Vec<f64>>> {
        let n_d = self.system.n_d;
        self.probe_guesses
            .iter()
            .map(|g| consistent_init(&self.system, &g[..n_d], &g[n_d..], tol.newton_tol, tol.newton_max_iter))
            .collect()
    }

    pub fn analyze(&self, tol: &Tolerances) -> Result<IndexAnalysis> {
        analyze_index(&self.system, &self.probes(tol)?, tol)
    }

    pub fn projected_dynamics(&self, tol: &Tolerances) -> Result<ProjectedDynamics> {
        let analysis = self.analyze(tol)?;
        Ok(ProjectedDynamics::new(self.system.clone(), analysis, *tol))
    }

    /// Replaces the aware barrier everywhere it is referenced.
    pub fn set_barrier(&mut self, barrier: BarrierSpec) {
        self.scenario.barrier = barrier.clone();
        self.barrier = barrier;
    }

    /// Default scenario for a controller mode.
    pub fn scenario_for(&self, mode: crate::simulator::ControllerMode) -> Scenario {
        let mut sc = match mode {
            crate::simulator::ControllerMode::Unaware => self.unaware_scenario.clone(),
            _ => self.scenario.clone(),
        };
        sc.mode = mode;
        sc
    }
}

/// Rebuilds a preset from its parameter record.
pub fn from_params(params: ParameterRecord) -> BenchmarkPreset {
    match params {
        ParameterRecord::WindTurbine(p) => wind_turbine::with_params(p),
        ParameterRecord::Manipulator(p) => manipulator::with_params(p),
    }
}

pub fn by_name(name: &str) -> Result<BenchmarkPreset> {
    match name {
        "wind_turbine" => Ok(wind_turbine()),
        "manipulator" | "flexible_manipulator" => Ok(flexible_manipulator()),
        other => Err(Error::InvalidInput(format!(
            "unknown benchmark '{other}' (expected one of {})",
            PRESET_NAMES.join(", ")
        ))),
    }
}

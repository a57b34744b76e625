//! Wind-turbine power system with one algebraic state.
//!
//! ```text
//! ẋ1 = α1 (u − β1 x3 (x2 − x3))
//! ẋ2 = α2 (x1 − x3)
//!  0 = x3⁴ − (β2 + β3 x3 (x2 − x3)) x3² + β4
//! ```
//!
//! The parameter values below were calibrated so that the extended Jacobian
//! is regular on the verification box, the aware filter stays feasible over
//! the default horizon and the plain CBF-QP loses feasibility before the
//! safety margin is crossed.
//!
//! The safe set is `h(x) = x1 − x_max ≥ 0`, so despite its name `x_max`
//! acts as a lower bound on `x1`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{BenchmarkPreset, DomainBox, ParameterRecord};
use crate::model::{DaeSystem, InputPolytope};
use crate::numeric::diff::{ScalarFn, VectorFn};
use crate::numeric::jet::Jet;
use crate::projection::BarrierSpec;
use crate::simulator::{ControllerMode, InfeasibilityPolicy, NominalController, Scenario};

/// Coefficients of the polynomial barrier, in the order
/// `1, x1, x2, x3, x1², x1x2, x1x3, x2², x2x3, x3²`.
pub const BARRIER_COEFFS: [f64; 10] = [-1175.36, 238.42, 1491.68, 238.42, -263.78, 472.45, -477.45, -145.97, -263.78, 1.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindTurbineParams {
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
    pub beta4: f64,
    pub x_max: f64,
    pub input_bound: f64,
    pub kappa: f64,
    /// Nominal law `u = gain (reference − x1)`.
    pub nominal_gain: f64,
    pub nominal_reference: f64,
    pub x_d0: Vec<f64>,
    pub x_a_guess: Vec<f64>,
    pub barrier_coeffs: Vec<f64>,
}

impl Default for WindTurbineParams {
    fn default() -> Self {
        WindTurbineParams {
            alpha1: 0.75,
            alpha2: 0.2,
            beta1: -0.8,
            beta2: 2.1,
            beta3: -0.3,
            beta4: 0.51125,
            x_max: -0.9685,
            input_bound: 1.3,
            kappa: 0.06,
            nominal_gain: 2.4,
            nominal_reference: -2.4,
            x_d0: vec![3.0, 0.8],
            x_a_guess: vec![-0.5],
            barrier_coeffs: BARRIER_COEFFS.to_vec(),
        }
    }
}

pub fn barrier_value<T>(c: &[f64], x1: T, x2: T, x3: T) -> T
where
    T: Copy + std::ops::Add<Output = T> + std::ops::Mul<Output = T> + std::ops::Mul<f64, Output = T> + std::ops::Add<f64, Output = T>,
{
    x1 * c[1]
        + x2 * c[2]
        + x3 * c[3]
        + x1 * x1 * c[4]
        + x1 * x2 * c[5]
        + x1 * x3 * c[6]
        + x2 * x2 * c[7]
        + x2 * x3 * c[8]
        + x3 * x3 * c[9]
        + c[0]
}

/// Preset with the given parameter record.
pub fn with_params(p: WindTurbineParams) -> BenchmarkPreset {
    let (a1, a2, b1, b2, b3, b4) = (p.alpha1, p.alpha2, p.beta1, p.beta2, p.beta3, p.beta4);
    let f_d: VectorFn = Arc::new(move |x: &[Jet]| vec![(x[2] * (x[1] - x[2])) * (-b1 * a1), (x[0] - x[2]) * a2]);
    let g_d: VectorFn = Arc::new(move |_x: &[Jet]| vec![Jet::constant(a1), Jet::zero()]);
    let phi: VectorFn = Arc::new(move |x: &[Jet]| {
        let x3 = x[2];
        let x3sq = x3 * x3;
        vec![x3sq * x3sq - (x3 * (x[1] - x3) * b3 + b2) * x3sq + b4]
    });
    let system = DaeSystem::new(
        "wind_turbine",
        2,
        1,
        1,
        1,
        f_d,
        g_d,
        vec![phi.clone(), phi],
        1,
        InputPolytope::boxed(1, p.input_bound),
    )
    .expect("wind turbine dimensions are consistent");

    let coeffs = p.barrier_coeffs.clone();
    let b: ScalarFn = Arc::new(move |x: &[Jet]| barrier_value(&coeffs, x[0], x[1], x[2]));
    let x_max = p.x_max;
    let h: ScalarFn = Arc::new(move |x: &[Jet]| x[0] - x_max);
    let barrier = BarrierSpec::uniform(b, h.clone(), 1, p.kappa).expect("positive gain");
    let plain = BarrierSpec::uniform(h.clone(), h, 1, p.kappa).expect("positive gain");

    let (gain, reference) = (p.nominal_gain, p.nominal_reference);
    let nominal: NominalController = Arc::new(move |x: &[f64]| vec![gain * (reference - x[0])]);
    let scenario = Scenario {
        system_id: "wind_turbine".into(),
        barrier: barrier.clone(),
        mode: ControllerMode::Aware,
        x_d0: p.x_d0.clone(),
        x_a_guess: p.x_a_guess.clone(),
        dt: 1e-3,
        horizon: 10.0,
        nominal,
        policy: InfeasibilityPolicy::HoldNominal,
    };
    let mut unaware_scenario = scenario.clone();
    unaware_scenario.mode = ControllerMode::Unaware;
    unaware_scenario.barrier = plain;
    let domain = DomainBox::new(vec![(-1.2, 3.4), (0.7, 2.5), (-0.6, -0.4)]);
    let probes = vec![
        vec![3.0, 0.8, -0.5],
        vec![1.0, 1.5, -0.45],
        vec![-0.3, 2.2, -0.48],
        vec![2.0, 1.0, -0.55],
    ];
    BenchmarkPreset {
        name: "wind_turbine".into(),
        system,
        barrier,
        scenario,
        unaware_scenario,
        domain,
        probe_guesses: probes,
        params: ParameterRecord::WindTurbine(p),
    }
}

pub fn wind_turbine() -> BenchmarkPreset {
    with_params(WindTurbineParams::default())
}

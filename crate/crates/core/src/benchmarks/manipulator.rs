//! Two-link planar manipulator with the tip height as algebraic state.
//!
//! State `x = (θ1, θ2, ω1, ω2, y)`; `θ2` is measured relative to the first
//! link and both angles from the horizontal, so the tip height is
//! `ℓ1 sin θ1 + ℓ2 sin(θ1 + θ2)`. Rigid-body terms follow the usual
//! relative-angle form with the link inertias `I_i` taken about the link
//! centres of mass:
//!
//! ```text
//! M11 = I1 + I2 + m1 lc1² + m2 (ℓ1² + lc2² + 2 ℓ1 lc2 cos θ2)
//! M12 = I2 + m2 (lc2² + ℓ1 lc2 cos θ2)
//! M22 = I2 + m2 lc2²
//! C   = m2 ℓ1 lc2 sin θ2 · (−(2 ω1 ω2 + ω2²), ω1²)
//! G   = g · ((m1 lc1 + m2 ℓ1) cos θ1 + m2 lc2 cos(θ1 + θ2), m2 lc2 cos(θ1 + θ2))
//! ```
//!
//! The tip constraint involves no velocity, so every level of the chain is
//! the position constraint itself and `J_a = −1` at all levels.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{BenchmarkPreset, DomainBox, ParameterRecord};
use crate::model::{DaeSystem, InputPolytope};
use crate::numeric::diff::{ScalarFn, VectorFn};
use crate::numeric::jet::Jet;
use crate::projection::BarrierSpec;
use crate::simulator::{ControllerMode, InfeasibilityPolicy, NominalController, Scenario};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManipulatorParams {
    pub l1: f64,
    pub l2: f64,
    pub m1: f64,
    pub m2: f64,
    pub lc1: f64,
    pub lc2: f64,
    pub i1: f64,
    pub i2: f64,
    pub gravity: f64,
    pub damping: [f64; 2],
    pub torque_limit: f64,
    pub y_max: f64,
    pub kappa: f64,
    pub hocbf_order: usize,
    /// Nominal PD law `u = kp (θ* − θ) − kd ω`.
    pub nominal_target: [f64; 2],
    pub nominal_kp: f64,
    pub nominal_kd: f64,
    pub theta0: [f64; 2],
    pub omega0: [f64; 2],
}

impl Default for ManipulatorParams {
    fn default() -> Self {
        ManipulatorParams {
            l1: 1.0,
            l2: 1.0,
            m1: 1.0,
            m2: 1.0,
            lc1: 0.5,
            lc2: 0.5,
            i1: 0.083,
            i2: 0.083,
            gravity: 9.81,
            damping: [0.1, 0.1],
            torque_limit: 10.0,
            y_max: 1.8,
            kappa: 4.0,
            hocbf_order: 3,
            nominal_target: [0.8, 0.0],
            nominal_kp: 40.0,
            nominal_kd: 2.0,
            theta0: [0.0, 0.0],
            omega0: [3.0, 0.0],
        }
    }
}

impl ManipulatorParams {
    /// `M(θ)` entries `(M11, M12, M22)`.
    pub fn inertia<T>(&self, cos_t2: T) -> (T, T, T)
    where
        T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<f64, Output = T>,
    {
        let p = self;
        let m11 = cos_t2 * (2.0 * p.m2 * p.l1 * p.lc2) + (p.i1 + p.i2 + p.m1 * p.lc1 * p.lc1 + p.m2 * (p.l1 * p.l1 + p.lc2 * p.lc2));
        let m12 = cos_t2 * (p.m2 * p.l1 * p.lc2) + (p.i2 + p.m2 * p.lc2 * p.lc2);
        let m22 = cos_t2 * 0.0 + (p.i2 + p.m2 * p.lc2 * p.lc2);
        (m11, m12, m22)
    }

    pub fn tip_height(&self, t1: f64, t2: f64) -> f64 {
        self.l1 * t1.sin() + self.l2 * (t1 + t2).sin()
    }

    /// Kinetic plus potential energy.
    pub fn energy(&self, x: &[f64]) -> f64 {
        let (m11, m12, m22) = self.inertia(x[1].cos());
        let (w1, w2) = (x[2], x[3]);
        let kinetic = 0.5 * (m11 * w1 * w1 + 2.0 * m12 * w1 * w2 + m22 * w2 * w2);
        let potential = self.gravity * ((self.m1 * self.lc1 + self.m2 * self.l1) * x[0].sin() + self.m2 * self.lc2 * (x[0] + x[1]).sin());
        kinetic + potential
    }
}

/// `M⁻¹` as `(a, b, d)` for the symmetric 2×2 inverse.
fn inverse_inertia(p: &ManipulatorParams, t2: Jet) -> (Jet, Jet, Jet) {
    let (m11, m12, m22) = p.inertia(t2.cos());
    let det = m11 * m22 - m12 * m12;
    let inv = det.recip();
    (m22 * inv, -m12 * inv, m11 * inv)
}

pub fn with_params(p: ManipulatorParams) -> BenchmarkPreset {
    let pf = p.clone();
    let f_d: VectorFn = Arc::new(move |x: &[Jet]| {
        let p = &pf;
        let (t1, t2, w1, w2) = (x[0], x[1], x[2], x[3]);
        let s2 = t2.sin();
        let k = p.m2 * p.l1 * p.lc2;
        let c1 = s2 * (w1 * w2 * 2.0 + w2 * w2) * (-k);
        let c2 = s2 * (w1 * w1) * k;
        let c12 = (t1 + t2).cos();
        let g1 = t1.cos() * (p.gravity * (p.m1 * p.lc1 + p.m2 * p.l1)) + c12 * (p.gravity * p.m2 * p.lc2);
        let g2 = c12 * (p.gravity * p.m2 * p.lc2);
        let r1 = -(c1 + g1 + w1 * p.damping[0]);
        let r2 = -(c2 + g2 + w2 * p.damping[1]);
        let (a, b, d) = inverse_inertia(p, t2);
        vec![w1, w2, a * r1 + b * r2, b * r1 + d * r2]
    });
    let pg = p.clone();
    let g_d: VectorFn = Arc::new(move |x: &[Jet]| {
        let (a, b, d) = inverse_inertia(&pg, x[1]);
        let z = Jet::zero();
        vec![z, z, z, z, a, b, b, d]
    });
    let (l1, l2) = (p.l1, p.l2);
    let phi: VectorFn = Arc::new(move |x: &[Jet]| vec![x[0].sin() * l1 + (x[0] + x[1]).sin() * l2 - x[4]]);
    let system = DaeSystem::new(
        "manipulator",
        4,
        1,
        2,
        1,
        f_d,
        g_d,
        vec![phi.clone(), phi.clone(), phi],
        2,
        InputPolytope::boxed(2, p.torque_limit),
    )
    .expect("manipulator dimensions are consistent");

    let y_max = p.y_max;
    let b: ScalarFn = Arc::new(move |x: &[Jet]| y_max - x[4]);
    let barrier = BarrierSpec::uniform(b.clone(), b, p.hocbf_order, p.kappa).expect("positive gain");

    let (target, kp, kd) = (p.nominal_target, p.nominal_kp, p.nominal_kd);
    let nominal: NominalController =
        Arc::new(move |x: &[f64]| vec![kp * (target[0] - x[0]) - kd * x[2], kp * (target[1] - x[1]) - kd * x[3]]);
    let scenario = Scenario {
        system_id: "manipulator".into(),
        barrier: barrier.clone(),
        mode: ControllerMode::Aware,
        x_d0: vec![p.theta0[0], p.theta0[1], p.omega0[0], p.omega0[1]],
        x_a_guess: vec![0.0],
        dt: 1e-3,
        horizon: 10.0,
        nominal,
        policy: InfeasibilityPolicy::HoldNominal,
    };
    let mut unaware_scenario = scenario.clone();
    unaware_scenario.mode = ControllerMode::Unaware;
    unaware_scenario.barrier = barrier.clone();
    let domain = DomainBox::new(vec![(0.0, 1.6), (-0.8, 0.8), (-0.5, 0.5), (-0.5, 0.5), (-2.0, 2.0)]);
    let probes = vec![
        vec![0.0, 0.0, 3.0, 0.0, 0.0],
        vec![0.5, 0.3, -1.0, 0.5, 0.0],
        vec![1.0, -0.4, 0.2, -0.3, 0.0],
        vec![-0.7, 1.2, 0.0, 1.0, 0.0],
    ];
    BenchmarkPreset {
        name: "manipulator".into(),
        system,
        barrier,
        scenario,
        unaware_scenario,
        domain,
        probe_guesses: probes,
        params: ParameterRecord::Manipulator(p),
    }
}

pub fn flexible_manipulator() -> BenchmarkPreset {
    with_params(ManipulatorParams::default())
}

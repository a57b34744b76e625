//! Runs the default scenarios of both presets and prints their summaries.

use std::time::Instant;

use daecbf_core::benchmarks::{flexible_manipulator, wind_turbine};
use daecbf_core::simulator::{run, ControllerMode};
use daecbf_core::Tolerances;

fn main() -> daecbf_core::Result<()> {
    let tol = Tolerances::default();
    for preset in [wind_turbine(), flexible_manipulator()] {
        let pd = preset.projected_dynamics(&tol)?;
        for mode in [ControllerMode::Aware, ControllerMode::Unaware] {
            let sc = preset.scenario_for(mode);
            let start = Instant::now();
            let traj = run(&pd, &sc)?;
            let max_alg = traj.x.iter().map(|x| x[x.len() - 1]).fold(f64::NEG_INFINITY, f64::max);
            println!(
                "{} {:?}: {:?} max_last_state={:.4} in {:.2}s",
                preset.name,
                mode,
                traj.summary,
                max_alg,
                start.elapsed().as_secs_f64()
            );
        }
    }
    Ok(())
}

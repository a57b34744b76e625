//! Runs every verification check on both presets and prints the verdicts.

use std::time::Instant;

use daecbf_core::benchmarks::by_name;
use daecbf_core::verifier::{verify_correctness, verify_feasibility, FeasibilityKind, VerifierConfig};
use daecbf_core::Tolerances;

fn main() -> daecbf_core::Result<()> {
    let tol = Tolerances::default();
    let cfg = VerifierConfig::default();
    for name in ["wind_turbine", "manipulator"] {
        let preset = by_name(name)?;
        let pd = preset.projected_dynamics(&tol)?;
        for offset in [0.0, 1.0] {
            let spec = preset.barrier.with_offset(offset);
            let t = Instant::now();
            let c = verify_correctness(&preset.system, &spec, &preset.domain, &tol, &cfg)?;
            println!(
                "{name} offset {offset}: correctness {:?} h_min {:.6e} oracle {:?} ({:.2} s)",
                c.verdict,
                c.value,
                c.oracle,
                t.elapsed().as_secs_f64()
            );
            if let Some(x) = &c.witness_or_counterexample {
                println!("  at {x:?}");
            }
        }
        for kind in [FeasibilityKind::Interior, FeasibilityKind::Boundary] {
            let t = Instant::now();
            match verify_feasibility(&pd, &preset.barrier, &preset.domain, kind, &cfg) {
                Ok(r) => println!(
                    "{name} {kind:?}: {:?} margin {:.3e} samples {} at {:?} ({:.2} s)",
                    r.verdict,
                    r.value,
                    r.samples,
                    r.witness_or_counterexample,
                    t.elapsed().as_secs_f64()
                ),
                Err(e) => println!("{name} {kind:?}: error {e}"),
            }
        }
    }
    Ok(())
}

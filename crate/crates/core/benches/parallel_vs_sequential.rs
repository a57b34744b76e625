use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use daecbf_core::benchmarks::{flexible_manipulator, wind_turbine};
use daecbf_core::parallel::Execution;
use daecbf_core::verifier::{verify_correctness, verify_feasibility, FeasibilityKind, VerifierConfig};
use daecbf_core::Tolerances;

fn config(execution: Execution) -> VerifierConfig {
    VerifierConfig {
        samples: 1024,
        grid_max_points: 1 << 14,
        execution,
        ..Default::default()
    }
}

fn feasibility(c: &mut Criterion) {
    let tol = Tolerances::default();
    let mut group = c.benchmark_group("boundary_feasibility");
    group.sample_size(10);
    for preset in [wind_turbine(), flexible_manipulator()] {
        let pd = preset.projected_dynamics(&tol).unwrap();
        for (label, exec) in [("parallel", Execution::Auto), ("sequential", Execution::Sequential)] {
            let cfg = config(exec);
            group.bench_with_input(BenchmarkId::new(label, &preset.name), &cfg, |b, cfg| {
                b.iter(|| verify_feasibility(&pd, &preset.barrier, &preset.domain, FeasibilityKind::Boundary, cfg).unwrap())
            });
        }
    }
    group.finish();
}

fn correctness(c: &mut Criterion) {
    let tol = Tolerances::default();
    let preset = flexible_manipulator();
    let mut group = c.benchmark_group("correctness");
    group.sample_size(10);
    for (label, exec) in [("parallel", Execution::Auto), ("sequential", Execution::Sequential)] {
        let cfg = config(exec);
        group.bench_function(label, |b| {
            b.iter(|| verify_correctness(&preset.system, &preset.barrier, &preset.domain, &tol, &cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, feasibility, correctness);
criterion_main!(benches);

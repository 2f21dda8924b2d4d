use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use curvebound::prelude::*;

fn system(config: &QuadratureConfig) -> CurveSystem {
    let specs = [
        CurveSpec::ellipse3(1.0, 0.6, [0.0, 0.0, 0.0], [0.0, 0.0, 1.0]),
        CurveSpec::ellipse3(0.8, 0.5, [3.0, 0.0, 0.0], [1.0, 0.0, 1.0]),
        CurveSpec::circle3(0.7, [0.0, 3.5, 0.5], [0.0, 1.0, 0.0]),
    ];
    CurveSystem::new(
        Manifold::euclidean_space3(),
        &specs,
        Scheme::bound_state_3d(vec![1.0, 1.2, 0.9]),
        config,
    )
    .expect("valid system")
}

fn assembly(c: &mut Criterion) {
    let mut group = c.benchmark_group("matrix_assembly");
    group.sample_size(10);
    for nodes in [128usize, 256] {
        for exec in [Execution::Sequential, Execution::Parallel] {
            let config = QuadratureConfig::default().with_nodes(nodes).with_execution(exec);
            let sys = system(&config);
            let op = PrincipalOperator::new(&sys, &config).expect("operator");
            group.bench_with_input(BenchmarkId::new(format!("{exec:?}"), nodes), &op, |b, op| {
                b.iter(|| black_box(op.matrix(black_box(-1.3)).expect("matrix")))
            });
        }
    }
    group.finish();
}

fn ground_state(c: &mut Criterion) {
    let mut group = c.benchmark_group("ground_state");
    group.sample_size(10);
    for exec in [Execution::Sequential, Execution::Parallel] {
        let config = QuadratureConfig::default().with_execution(exec);
        let sys = system(&config);
        group.bench_function(format!("{exec:?}"), |b| {
            b.iter(|| black_box(solve_ground_state(&sys, &config).expect("bound state")))
        });
    }
    group.finish();
}

criterion_group!(benches, assembly, ground_state);
criterion_main!(benches);

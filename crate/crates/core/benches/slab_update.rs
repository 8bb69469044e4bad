use std::f64::consts::PI;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use spacetime_fvm::fluxfield::FluxField;
use spacetime_fvm::mesh::{SpatialDomain, SpatialPartition};
use spacetime_fvm::par::Execution;
use spacetime_fvm::scheme::{step_slab, BoundaryData, Problem, Stepping};

fn slab_update(c: &mut Criterion) {
    let mut group = c.benchmark_group("slab_update");
    for cells in [1_000, 10_000, 100_000] {
        let partition = SpatialPartition::uniform(SpatialDomain::Circle { length: 1.0 }, cells).unwrap();
        let problem = Problem::new(
            partition,
            FluxField::transported_density(2.0 * PI, (-1.0, 1.0)),
            BoundaryData::new(|_, x| (2.0 * PI * x).sin()),
            0.4 / cells as f64,
        )
        .with_stepping(Stepping::Fixed { duration: 0.4 / cells as f64 });
        let tri = problem.plan().unwrap();
        let ops = problem.operators(&tri, 0).unwrap();
        let ghosts = problem.ghosts(&tri, 0).unwrap();
        let state = problem.initial_state(&tri).unwrap();
        for (name, execution) in [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)] {
            group.bench_with_input(BenchmarkId::new(name, cells), &cells, |b, _| {
                b.iter(|| step_slab(&tri, 0, &ops, &ghosts, black_box(&state), 1e-13, execution).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, slab_update);
criterion_main!(benches);

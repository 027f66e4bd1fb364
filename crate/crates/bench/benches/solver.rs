use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use splatdyn::sim::{Ground, SimConfig};
use splatdyn::{Material, Solver};

fn substep(c: &mut Criterion) {
    let mut group = c.benchmark_group("substep");
    group.sample_size(10);
    for cell in [0.05, 0.03] {
        let cage = splatdyn_bench::bar(cell).cage;
        let mut cfg = SimConfig::default();
        cfg.collisions.ground = Some(Ground {
            height: -0.1,
            friction: 0.5,
        });
        let mut solver = Solver::new(cage.clone(), Material::default(), cfg).unwrap();
        let mut state = solver.initial_state();
        let name = format!("{} vertices / {} tets", cage.vertex_count(), cage.tets.len());
        group.bench_function(name, |b| b.iter(|| solver.substep(black_box(&mut state)).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, substep);
criterion_main!(benches);

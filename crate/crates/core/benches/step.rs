//! One coupled step, sequential vs data-parallel, on the headline shock.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use shockline::shift::{shift_rhs, ShiftMode};
use shockline::solver::{cfl_dt, step, step_coupled, SimConfig, Simulation};
use shockline::Exec;

fn sim(cells: usize) -> Simulation {
    let mut c = SimConfig::new(2.0, 1.0, -1.0, -0.9, 600.0, cells, 1.0);
    c.beta = Some(80.0);
    c.perturbation.amplitude = 0.01;
    Simulation::new(c).unwrap()
}

fn bench_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("step");
    for cells in [3000, 12000] {
        let s = sim(cells);
        let (field, _) = s.init_data().unwrap();
        for exec in [Exec::Sequential, Exec::Parallel] {
            let mut ctx = s.context();
            ctx.exec = exec;
            let dt = cfl_dt(&field, &ctx.grid, &ctx.gas, 0.4);
            let label = format!("{exec:?}").to_lowercase();
            group.bench_with_input(BenchmarkId::new(format!("field/{label}"), cells), &cells, |b, _| {
                b.iter(|| step(&field, dt, &ctx).unwrap())
            });
            group.bench_with_input(BenchmarkId::new(format!("coupled/{label}"), cells), &cells, |b, _| {
                b.iter(|| {
                    step_coupled(&field, 0.0, dt, &ctx, |f, x| shift_rhs(f, x, &ctx, ShiftMode::YgConsistent)).unwrap()
                })
            });
        }
    }
    group.finish();
}

criterion_group!(benches, bench_step);
criterion_main!(benches);

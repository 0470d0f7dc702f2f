use criterion::{criterion_group, criterion_main, Criterion};
use cvt_elites::evolve::random_genotype;
use cvt_elites::tasks::{simulate, MazeTask, SimConfig, DEFAULT_HIDDEN};
use cvt_elites::Task;
use cvt_elites_bench::open_maze;
use std::hint::black_box;

fn maze_simulation(c: &mut Criterion) {
    let task = MazeTask::new(open_maze(), 10, DEFAULT_HIDDEN).unwrap();
    let mut rng = cvt_elites::rng_from_seed(7);
    let controllers: Vec<_> = (0..16)
        .map(|_| {
            task.controller(&random_genotype(task.genotype_spec(), &mut rng))
                .unwrap()
        })
        .collect();
    let sim = SimConfig::default();
    let mut group = c.benchmark_group("maze");
    group.sample_size(20);
    group.bench_function("simulate_16_random_controllers", |b| {
        b.iter(|| {
            for ctrl in &controllers {
                black_box(simulate(task.maze(), ctrl, &sim));
            }
        })
    });
    group.finish();
}

criterion_group!(benches, maze_simulation);
criterion_main!(benches);

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use uflab::experiments::{run_cell, ExecMode, ExperimentConfig, MemorySetup};

fn shots(c: &mut Criterion) {
    let setup = MemorySetup::new(5, 5).unwrap();
    let mut group = c.benchmark_group("shots");
    group.sample_size(10);
    for (name, mode) in [("sequential", ExecMode::Sequential), ("parallel", ExecMode::Parallel)] {
        let cfg = ExperimentConfig { shots: 2000, seed: 1, mode, ..Default::default() };
        group.bench_with_input(BenchmarkId::new(name, "d5_p1e-3"), &cfg, |b, cfg| {
            b.iter(|| run_cell(&setup, 1e-3, cfg).unwrap().row.failures)
        });
    }
    group.finish();
}

criterion_group!(benches, shots);
criterion_main!(benches);

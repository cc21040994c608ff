use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use paracheck::par::Execution;
use paracheck::runner;
use paracheck::scenario::{Overrides, BUILTINS};

fn builtins(c: &mut Criterion) {
    let mut group = c.benchmark_group("scenario");
    group.sample_size(10);
    for (name, _) in BUILTINS {
        let p = runner::load(&format!("builtin:{name}"), &Overrides::default()).unwrap();
        for (label, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
            group.bench_with_input(BenchmarkId::new(label, name), &p, |b, p| b.iter(|| black_box(runner::run(p, exec).unwrap())));
        }
    }
    group.finish();
}

fn dense_sampling(c: &mut Criterion) {
    let mut group = c.benchmark_group("example-4.1 points");
    group.sample_size(10);
    for n in [50, 200] {
        let p = runner::load("builtin:example-4.1", &Overrides { points: Some(n), ..Default::default() }).unwrap();
        for (label, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
            group.bench_with_input(BenchmarkId::new(label, n), &p, |b, p| b.iter(|| black_box(runner::run(p, exec).unwrap())));
        }
    }
    group.finish();
}

criterion_group!(benches, builtins, dense_sampling);
criterion_main!(benches);

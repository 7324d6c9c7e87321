use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use sketchlord::{recovery, run_method, AdmmConfig, DenseOp, Method, Recovery};
use sketchlord_bench::fixture;

fn recoveries(c: &mut Criterion) {
    let mut group = c.benchmark_group("recovery");
    for (n, width) in [(500, 45), (1000, 90)] {
        let f = fixture(n, width);
        group.bench_with_input(BenchmarkId::new("singlepass", n), &f, |b, f| {
            b.iter(|| recovery::singlepass(&f.m, &f.omega.omega, &f.w).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("compact", n), &f, |b, f| {
            b.iter(|| recovery::compact(&f.m, &f.omega.omega, &f.w).unwrap())
        });
    }
    group.finish();
}

fn methods(c: &mut Criterion) {
    let f = fixture(500, 45);
    let op = DenseOp::new(f.a.clone());
    let cfg = AdmmConfig::default();
    let mut group = c.benchmark_group("method_n500_budget90");
    group.sample_size(10);
    for method in Method::ALL {
        group.bench_function(method.as_str(), |b| {
            b.iter(|| run_method(&op, method, Recovery::Compact, 90, 1, &cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, recoveries, methods);
criterion_main!(benches);

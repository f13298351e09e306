use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use hyplab::hyptimes::{first_hyperbolic_time_point, first_passage_point, DEFAULT_B};
use hyplab::partition::{DEFAULT_EPS_FLOOR, DEFAULT_K_MAX};
use hyplab::{build_partition, derive_params, Overrides};
use hyplab_bench::{linear_map, starts, sym_map};
use std::hint::black_box;

const N_MAX: u64 = 10_000;

fn bench_hyptimes(c: &mut Criterion) {
    let pts = starts(256);
    let mut g = c.benchmark_group("hyptime");
    g.throughput(Throughput::Elements(pts.len() as u64));
    g.sample_size(20);
    for (name, map) in [("linear", linear_map()), ("sym0.5", sym_map(0.5))] {
        let table = build_partition(&map, DEFAULT_EPS_FLOOR, DEFAULT_K_MAX).unwrap();
        let params = derive_params(&map, &table, DEFAULT_B, &Overrides::default()).unwrap();
        g.bench_function(BenchmarkId::new("first_h", name), |b| {
            b.iter(|| pts.iter().map(|&p| first_hyperbolic_time_point(&map, &params, p, N_MAX).found()).filter(Option::is_some).count())
        });
        g.bench_function(BenchmarkId::new("escape_H", name), |b| {
            b.iter(|| pts.iter().filter_map(|&p| black_box(first_passage_point(&map, &params, p, N_MAX)).found()).sum::<u64>())
        });
    }
    g.finish();

    c.bench_function("partition/build_sym0.5", |b| {
        let map = sym_map(0.5);
        b.iter(|| build_partition(&map, DEFAULT_EPS_FLOOR, DEFAULT_K_MAX).unwrap().depth())
    });
}

criterion_group!(benches, bench_hyptimes);
criterion_main!(benches);

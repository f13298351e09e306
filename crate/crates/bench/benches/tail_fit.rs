use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hyplab::mc_engine::{sample_uniform, tail_fit, Obs, SampleConfig};
use std::hint::black_box;

/// Pareto-like integer samples with P{X > n} ≈ n^{-p}, censored at 10^4.
fn pareto(n: usize, p: f64) -> Vec<Obs> {
    sample_uniform(&SampleConfig::new(1, n), 0.5)
        .into_iter()
        .map(|u| {
            let v = u.powf(-1.0 / p);
            if v > 1e4 { Obs::censored(10_000) } else { Obs::exact(v as u64) }
        })
        .collect()
}

fn bench_tail_fit(c: &mut Criterion) {
    let mut g = c.benchmark_group("tail_fit");
    g.sample_size(10);
    for n in [10_000usize, 100_000, 1_000_000] {
        let obs = pareto(n, 1.5);
        g.bench_with_input(BenchmarkId::from_parameter(n), &obs, |b, o| {
            b.iter(|| black_box(tail_fit(o, (10, 1000), 7).unwrap().exponent))
        });
    }
    g.finish();
}

criterion_group!(benches, bench_tail_fit);
criterion_main!(benches);

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use hyplab_bench::{linear_map, starts, sym_map};
use std::hint::black_box;

const STEPS: u64 = 1_000;

fn bench_steps(c: &mut Criterion) {
    let mut g = c.benchmark_group("map_step");
    g.throughput(Throughput::Elements(STEPS));
    for (name, map) in [("linear", linear_map()), ("sym0.5", sym_map(0.5)), ("sym0.25", sym_map(0.25))] {
        let p0 = starts(7)[3];
        g.bench_with_input(BenchmarkId::new("advance", name), &map, |b, m| {
            b.iter(|| {
                let mut p = p0;
                for _ in 0..STEPS {
                    p = m.advance(p).unwrap_or(p0);
                }
                black_box(p)
            })
        });
        g.bench_with_input(BenchmarkId::new("step_with_derivative", name), &map, |b, m| {
            b.iter(|| {
                let (mut p, mut acc) = (p0, 0.0);
                for _ in 0..STEPS {
                    match m.step(p) {
                        Ok(s) => {
                            acc += s.log_deriv;
                            p = s.next;
                        }
                        Err(_) => p = p0,
                    }
                }
                black_box(acc)
            })
        });
    }
    g.finish();
}

criterion_group!(benches, bench_steps);
criterion_main!(benches);

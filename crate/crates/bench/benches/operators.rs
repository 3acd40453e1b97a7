use carleson_bench::fixture;
use carleson_core::TileSet;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

fn operators(c: &mut Criterion) {
    let mut group = c.benchmark_group("operators");
    group.sample_size(10);
    for k in [8u32, 10, 12] {
        let (model, f) = fixture(k, 0);
        group.bench_with_input(BenchmarkId::new("apply_full", k), &k, |b, _| {
            b.iter(|| model.apply_full(black_box(&f)).unwrap())
        });
        let half: TileSet = model.lattice().tiles().filter(|t| t.m % 2 == 0).collect();
        group.bench_with_input(BenchmarkId::new("apply_tileset", k), &k, |b, _| {
            b.iter(|| model.apply_tileset(black_box(&f), &half).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("adjoint", k), &k, |b, _| {
            b.iter(|| model.apply_tileset_adjoint(black_box(&f), &half).unwrap())
        });
        if k <= 10 {
            group.bench_with_input(BenchmarkId::new("maximal", k), &k, |b, _| {
                b.iter(|| model.maximal(black_box(&f)).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, operators);
criterion_main!(benches);

use carleson_bench::fixture;
use carleson_core::harness::{run_pipeline, RunConfig};
use carleson_core::{cz_decompose, forest_decompose, mass_decompose, MassConfig};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

fn decomposition(c: &mut Criterion) {
    let mut group = c.benchmark_group("decomposition");
    group.sample_size(10);
    for k in [8u32, 10] {
        let (model, f) = fixture(k, 1);
        let family = model.lattice().family();
        let cfg = MassConfig::default_for(k);
        group.bench_with_input(BenchmarkId::new("mass", k), &k, |b, _| {
            b.iter(|| mass_decompose(black_box(&family), model.linearizing(), &cfg).unwrap())
        });
        let mass = mass_decompose(&family, model.linearizing(), &cfg).unwrap();
        let (n, p_n) = mass.nonempty_levels().next().expect("a populated level");
        group.bench_with_input(BenchmarkId::new("cz", k), &k, |b, _| b.iter(|| cz_decompose(black_box(p_n), &f).unwrap()));
        let dec = cz_decompose(p_n, &f).unwrap();
        if let Some(class) = dec.classes.values().find(|c| !c.is_empty()) {
            group.bench_with_input(BenchmarkId::new("forest", k), &k, |b, _| {
                b.iter(|| forest_decompose(black_box(class), n, 4.0))
            });
        }
        let run_cfg = RunConfig { resolution: Some(k), ..RunConfig::default() };
        group.bench_with_input(BenchmarkId::new("pipeline", k), &k, |b, _| b.iter(|| run_pipeline(black_box(&run_cfg)).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, decomposition);
criterion_main!(benches);

use criterion::{criterion_group, criterion_main, Criterion};
use softcca_bench::uniform_inputs;
use softcca_core::{FaeConfig, FaeModel, SoftCcaConfig, SoftCcaModel};

fn soft_cca_step(c: &mut Criterion) {
    let cfg = SoftCcaConfig::default();
    let mut model = SoftCcaModel::new(&cfg, 392, 392).unwrap();
    let x1 = uniform_inputs(cfg.batch_size, 392, 0);
    let x2 = uniform_inputs(cfg.batch_size, 392, 1);
    c.bench_function("soft_cca_objective_step", |b| {
        b.iter(|| model.objective_step(&x1, &x2).unwrap())
    });
}

fn fae_step(c: &mut Criterion) {
    let cfg = FaeConfig::default();
    let mut model = FaeModel::new(&cfg).unwrap();
    let x = uniform_inputs(cfg.batch_size, cfg.input_dim, 2);
    let labels: Vec<usize> = (0..cfg.batch_size).map(|i| i % cfg.p).collect();
    let mut g = c.benchmark_group("fae");
    g.sample_size(10);
    g.bench_function("fae_objective_step", |b| {
        b.iter(|| model.objective_step(&x, &labels).unwrap())
    });
    g.finish();
}

criterion_group!(benches, soft_cca_step, fae_step);
criterion_main!(benches);

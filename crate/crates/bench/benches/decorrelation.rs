use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use softcca_bench::centred_batch;
use softcca_core::cca::exact_decorrelation_step;
use softcca_core::decorr::{decov_loss_grad, xcov_loss_grad, SdlState};
use softcca_core::DecorrVariant;

const M: usize = 64;

fn sdl_vs_exact(c: &mut Criterion) {
    let mut g = c.benchmark_group("decorrelation");
    g.sample_size(10);
    for k in [128, 256, 512, 1024] {
        let z = centred_batch(M, k, 0);
        let mut state = SdlState::new(k, 0.9).unwrap();
        g.bench_with_input(BenchmarkId::new("sdl", k), &z, |b, z| {
            b.iter(|| state.loss_grad(z).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("exact", k), &z, |b, z| {
            b.iter(|| exact_decorrelation_step(z, 1e-4).unwrap())
        });
    }
    g.finish();
}

fn competitors(c: &mut Criterion) {
    let mut g = c.benchmark_group("competitors");
    let k = 256;
    let z = centred_batch(M, k, 1);
    g.bench_function("decov", |b| {
        b.iter(|| decov_loss_grad(&z, DecorrVariant::DeCov, None).unwrap())
    });
    g.bench_function("decov_l1", |b| {
        b.iter(|| decov_loss_grad(&z, DecorrVariant::DeCovL1, None).unwrap())
    });
    let (y, zz) = (z.col_block(0, k / 2), z.col_block(k / 2, k));
    g.bench_function("xcov", |b| b.iter(|| xcov_loss_grad(&y, &zz).unwrap()));
    g.finish();
}

criterion_group!(benches, sdl_vs_exact, competitors);
criterion_main!(benches);

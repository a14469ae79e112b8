use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use nonlocal_core::classical::{local_membership, DEFAULT_VERTEX_CAP};
use nonlocal_core::classicalize::classicalize;
use nonlocal_core::generator::{perfect_guessing_instance, random_psd, GeneratorConfig};
use nonlocal_core::guessing::{discriminate_iterative, Ensemble};
use nonlocal_core::model::{achieved_correlation, chsh_optimal_strategy};
use nonlocal_core::numerics::hermitian_eig;

fn bench_hermitian_eig(c: &mut Criterion) {
    let mut group = c.benchmark_group("hermitian_eig");
    for &n in &[4usize, 8, 16, 32] {
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        let m = random_psd(&mut rng, n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &m, |bencher, m| {
            bencher.iter(|| hermitian_eig(m).unwrap())
        });
    }
    group.finish();
}

fn bench_local_membership(c: &mut Criterion) {
    let corr = achieved_correlation(&chsh_optimal_strategy()).unwrap();
    c.bench_function("local_membership_chsh", |bencher| {
        bencher.iter(|| local_membership(&corr, 1e-7, DEFAULT_VERTEX_CAP).unwrap())
    });
}

fn bench_discrimination(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let states: Vec<_> = (0..3)
        .map(|_| {
            let s = random_psd(&mut rng, 4);
            let t = s.trace_re();
            s.scale(1.0 / (3.0 * t))
        })
        .collect();
    let ens = Ensemble::new(states).unwrap();
    c.bench_function("discriminate_iterative_3x4", |bencher| {
        bencher.iter(|| discriminate_iterative(&ens, 1e-10, 10_000).unwrap())
    });
}

fn bench_classicalize(c: &mut Criterion) {
    let instance = perfect_guessing_instance(&GeneratorConfig::small(3));
    c.bench_function("classicalize_small", |bencher| {
        bencher.iter(|| classicalize(&instance.strategy, &instance.game, 1e-8).unwrap())
    });
}

criterion_group!(
    benches,
    bench_hermitian_eig,
    bench_local_membership,
    bench_discrimination,
    bench_classicalize
);
criterion_main!(benches);

//! Per-image certification cost: exact dssn against the randomized baseline,
//! and dssn scaling in the number of split positions `L`.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dssn_core::models::LinearSoftmax;
use dssn_core::noise::GENERATOR_MT19937;
use dssn_core::{certify_dssn, certify_randomized, GapRule, NoiseModel, QuantizedPoint, RandomizedParams, SplitSpec};

const D: usize = 64;
const Q: u32 = 255;
const CLASSES: usize = 10;

fn model(seed: u64) -> LinearSoftmax {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = (0..D * CLASSES).map(|_| rng.random_range(-1.0..1.0)).collect();
    let b = (0..CLASSES).map(|_| rng.random_range(-0.1..0.1)).collect();
    LinearSoftmax::from_parts(D, CLASSES, w, b).expect("consistent shapes")
}

fn point(seed: u64) -> QuantizedPoint {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    QuantizedPoint::new((0..D).map(|_| rng.random_range(0..=Q)).collect(), Q).expect("levels within q")
}

fn dssn_scaling(c: &mut Criterion) {
    let clf = model(1);
    let x = point(2);
    let mut group = c.benchmark_group("dssn_vs_L");
    for period in [64u32, 128, 256] {
        let spec = SplitSpec::generate(GENERATOR_MT19937, 0, D, Q, period).expect("valid spec");
        group.throughput(Throughput::Elements(period as u64));
        group.bench_with_input(BenchmarkId::from_parameter(period), &spec, |b, spec| {
            b.iter(|| certify_dssn(&clf, &x, spec, GapRule::MultiClass).expect("certifies"))
        });
    }
    group.finish();
}

fn dssn_vs_monte_carlo(c: &mut Criterion) {
    let clf = model(3);
    let x = point(4);
    let spec = SplitSpec::generate(GENERATOR_MT19937, 0, D, Q, 255).expect("valid spec");
    let uniform = NoiseModel::UniformAdditive { lambda: spec.lambda() };
    // n is scaled down from 100000 so a sample finishes quickly; the
    // evaluation-count ratio is reported by `dssn bench`
    let params = RandomizedParams {
        n0: 64,
        n: 10_000,
        alpha: 0.001,
    };
    let mut group = c.benchmark_group("per_image_L255");
    group.sample_size(10);
    group.bench_function("dssn", |b| {
        b.iter(|| certify_dssn(&clf, &x, &spec, GapRule::MultiClass).expect("certifies"))
    });
    group.bench_function("uniform-mc-n10000", |b| {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        b.iter(|| certify_randomized(&clf, &x, &uniform, params, &mut rng).expect("certifies"))
    });
    group.finish();
}

criterion_group!(benches, dssn_scaling, dssn_vs_monte_carlo);
criterion_main!(benches);

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use y00::attack::derive_noisy_keystream;
use y00::keystream::{lfsr_sequence, seed_from_u64, LfsrSpec};
use y00::physical::{measure, NoiseModel};
use y00_bench::slot_batch;

const SLOTS: usize = 100_000;

fn lfsr(c: &mut Criterion) {
    let mut group = c.benchmark_group("lfsr_sequence");
    group.throughput(Throughput::Elements(SLOTS as u64));
    for text in ["17:17,3", "31:31,3"] {
        let spec: LfsrSpec = text.parse().expect("valid spec");
        let seed = seed_from_u64(&spec, 1).expect("nonzero");
        group.bench_function(text, |b| b.iter(|| lfsr_sequence(&spec, black_box(&seed), SLOTS)));
    }
    group.finish();
}

fn channel(c: &mut Criterion) {
    let mut group = c.benchmark_group("measure");
    group.throughput(Throughput::Elements(SLOTS as u64));
    let (constellation, _, slots) = slot_batch(64, SLOTS, true);
    let models = [
        ("gaussian", NoiseModel::GaussianPhase { sigma: 0.1 }),
        ("wedge", NoiseModel::Wedge { sigma: 0.1 }),
    ];
    for (name, noise) in models {
        group.bench_function(name, |b| {
            b.iter(|| measure(&slots, &noise, &constellation, 7).expect("valid noise"))
        });
    }
    group.finish();
}

fn derive(c: &mut Criterion) {
    let mut group = c.benchmark_group("derive_noisy_keystream");
    group.throughput(Throughput::Elements(SLOTS as u64));
    for (m, randomized) in [(64, false), (16, true), (64, true)] {
        let (constellation, data, slots) = slot_batch(m, SLOTS, randomized);
        let noise = NoiseModel::Wedge {
            sigma: 4.0 * std::f64::consts::PI / m as f64,
        };
        let measured = measure(&slots, &noise, &constellation, 3).expect("valid noise");
        let label = if randomized { "randomized" } else { "fixed" };
        group.bench_with_input(BenchmarkId::new(label, m), &measured, |b, measured| {
            b.iter(|| derive_noisy_keystream(measured, &data, &constellation, randomized, &noise))
        });
    }
    group.finish();
}

criterion_group!(benches, lfsr, channel, derive);
criterion_main!(benches);

use std::hint::black_box;

use clickwit_bench::{crystal_275, encoded, synthetic_records};
use clickwit_core::optics::EfficiencyVector;
use clickwit_core::simulate::{run_classical, run_pulsed, ClassicalConfig, ClassicalKind};
use clickwit_core::timetag::{
    bin_counts_continuous, bin_counts_continuous_par, gated_counts, GateSpec, Regime, StreamReader,
};
use clickwit_core::witness::ensemble_probabilities;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

fn pulsed(c: &mut Criterion) {
    let mut group = c.benchmark_group("pulsed");
    group.sample_size(10);
    for n_pulses in [1u64 << 20, 1 << 24] {
        let config = crystal_275(n_pulses);
        group.throughput(Throughput::Elements(n_pulses));
        group.bench_with_input(BenchmarkId::new("275 ions", n_pulses), &config, |b, config| {
            b.iter(|| run_pulsed(black_box(config)).unwrap())
        });
    }
    group.finish();
}

fn classical(c: &mut Criterion) {
    let mut group = c.benchmark_group("classical");
    group.sample_size(10);
    let n_bins = 1u64 << 22;
    group.throughput(Throughput::Elements(n_bins));
    for kind in [ClassicalKind::Coherent, ClassicalKind::Thermal] {
        let config = ClassicalConfig {
            kind,
            mu: 0.2,
            n_bins,
            split_t: 0.5,
            seed: 3,
        };
        group.bench_function(format!("{kind:?}"), |b| {
            b.iter(|| run_classical(black_box(&config)).unwrap())
        });
    }
    group.finish();
}

fn reduction(c: &mut Criterion) {
    let records = synthetic_records(1 << 20, 5_000);
    let duration = records.last().unwrap().time_ps + 1;
    let bytes = encoded(&records, Regime::Continuous);
    let mut group = c.benchmark_group("reduce");
    group.throughput(Throughput::Elements(records.len() as u64));
    group.bench_function("continuous", |b| {
        b.iter(|| bin_counts_continuous(black_box(&records), 1_000, duration).unwrap())
    });
    group.bench_function("continuous parallel", |b| {
        b.iter(|| bin_counts_continuous_par(black_box(&records), 1_000, duration).unwrap())
    });
    let gate = GateSpec {
        period_ps: 10_000,
        gate_open_ps: 2_000,
        gate_close_ps: 8_000,
        trim_ps: 100,
    };
    group.bench_function("gated", |b| {
        b.iter(|| gated_counts(black_box(&records), &gate, duration / 10_000).unwrap())
    });
    group.bench_function("decode", |b| {
        b.iter(|| {
            StreamReader::new(black_box(bytes.as_slice()))
                .unwrap()
                .map(|r| r.unwrap().time_ps)
                .fold(0u64, u64::wrapping_add)
        })
    });
    group.finish();
}

fn analytic(c: &mut Criterion) {
    let mut group = c.benchmark_group("ensemble");
    for n in [275usize, 10_000, 1_000_000] {
        let etas: EfficiencyVector = (0..n).map(|i| 6.1e-4 * (-(i as f64) / n as f64).exp()).collect();
        group.throughput(Throughput::Elements(n as u64));
        group.bench_with_input(BenchmarkId::from_parameter(n), &etas, |b, etas| {
            b.iter(|| {
                ensemble_probabilities(black_box(etas), 0.5, 1.0, 1.0)
                    .unwrap()
                    .witness()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, pulsed, classical, reduction, analytic);
criterion_main!(benches);

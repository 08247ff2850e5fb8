use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use sme_bench::workload;
use sme_core::mapper::map_tensor;
use sme_core::quant::{quantize_tensor, QuantConfig, Rounding};
use sme_core::sim::{simulate_layer, SimOptions};
use sme_core::squeeze::{squeeze, SqueezePolicy};

fn bench_quantize(c: &mut Criterion) {
    let cfg = QuantConfig::new(8, 3, Rounding::HalfAwayFromZero).unwrap();
    let mut g = c.benchmark_group("quantize");
    for size in [64, 256] {
        let w = workload(size, 1);
        g.bench_with_input(BenchmarkId::from_parameter(size), &w.tensor, |b, t| {
            b.iter(|| quantize_tensor(black_box(t), &cfg).unwrap())
        });
    }
    g.finish();
}

fn bench_map(c: &mut Criterion) {
    let w = workload(256, 2);
    c.bench_function("map/256", |b| {
        b.iter(|| map_tensor(black_box(&w.quantized), 128, 128, 1).unwrap())
    });
}

fn bench_squeeze(c: &mut Criterion) {
    let w = workload(256, 3);
    c.bench_function("squeeze/256/x2", |b| {
        b.iter(|| squeeze(black_box(&w.layout), SqueezePolicy::new(2)).unwrap())
    });
}

fn bench_simulate(c: &mut Criterion) {
    let mut g = c.benchmark_group("simulate");
    for size in [64, 256] {
        let w = workload(size, 4);
        g.bench_with_input(BenchmarkId::from_parameter(size), &w, |b, w| {
            b.iter(|| simulate_layer(black_box(&w.layout), None, &w.acts, &SimOptions::default()).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, bench_quantize, bench_map, bench_squeeze, bench_simulate);
criterion_main!(benches);

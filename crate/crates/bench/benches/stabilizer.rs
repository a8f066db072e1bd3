use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use polystab::gauge::{self, ConvexGauge, Hyperbox};
use polystab::simulator::{self, SimConfig};
use polystab_bench::triangle_loop;

fn feedback(c: &mut Criterion) {
    let (_, _, stab) = triangle_loop();
    c.bench_function("feedback_gauge/triangle", |b| {
        b.iter(|| stab.evaluate(black_box(&[1.0, -0.7])).unwrap())
    });
}

fn box_max(c: &mut Criterion) {
    let mut group = c.benchmark_group("max_over_box");
    for m in [2usize, 8, 16] {
        let h = Hyperbox::symmetric(vec![1.0; m]).unwrap();
        let g = ConvexGauge::weighted_l1((1..=m).map(|i| i as f64).collect()).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(m), &m, |b, _| {
            b.iter(|| gauge::max_over_box(black_box(&g), black_box(&h)).unwrap())
        });
    }
    group.finish();
}

fn closed_loop(c: &mut Criterion) {
    let (plant, lyap, stab) = triangle_loop();
    let cfg = SimConfig::default();
    c.bench_function("simulate/triangle_from_2_2", |b| {
        b.iter(|| simulator::simulate(&plant, &lyap, &stab, &cfg, black_box(&[2.0, 2.0])).unwrap())
    });
}

criterion_group!(benches, feedback, box_max, closed_loop);
criterion_main!(benches);

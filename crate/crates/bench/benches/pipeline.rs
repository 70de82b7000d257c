use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use gesture_core::golay::{channel_estimate, generate_golay_pair};
use gesture_core::pipeline::run_pipeline;
use gesture_core::scene::{make_gesture_scene, simulate_tap_stream};
use gesture_core::slope::series_slopes;
use gesture_core::twofinger::spectrum;
use gesture_core::{GestureKind, GestureParams, PipelineConfig};
use num_complex::Complex64;

fn channel_estimation(c: &mut Criterion) {
    let pair = generate_golay_pair(128).unwrap();
    let field: Vec<Complex64> = pair.ce_field(16).iter().map(|x| x * Complex64::new(0.3, -0.8)).collect();
    c.bench_function("channel_estimate/128x16", |b| b.iter(|| channel_estimate(black_box(&field), &pair).unwrap()));
}

fn stages(c: &mut Criterion) {
    let p = GestureParams { speed: 0.06, gesture: 0.6, ..Default::default() };
    let frames = simulate_tap_stream(&make_gesture_scene(GestureKind::TwoFinger, &p).unwrap()).unwrap();
    let series: Vec<Complex64> = frames.iter().map(|f| f.taps[2]).collect();

    c.bench_function("slopes/8x8", |b| b.iter(|| series_slopes(black_box(&series[..64]), 8).unwrap()));
    c.bench_function("spectrum/128", |b| b.iter(|| spectrum(black_box(&series[..128]), 500.0).unwrap()));

    let cfg = PipelineConfig::default();
    let mut group = c.benchmark_group("pipeline");
    group.throughput(criterion::Throughput::Elements(frames.len() as u64));
    group.bench_function("two-finger scene", |b| b.iter(|| run_pipeline(&cfg, black_box(&frames), 500.0).unwrap()));
    group.finish();
}

criterion_group!(benches, channel_estimation, stages);
criterion_main!(benches);

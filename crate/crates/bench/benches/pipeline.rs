use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use iaclahe::autodiff::{clahe_backward, clahe_forward_tape, l1_loss};
use iaclahe::estimator::{estimator_backward, estimator_forward, preprocess, EstimatorParams};
use iaclahe::{clahe, ClipLimitMap, TileGrid};
use iaclahe_bench::{frame, TrainingSample, FULL_HD};

fn inference(c: &mut Criterion) {
    let (w, h) = FULL_HD;
    let y = frame(w, h);
    let params = EstimatorParams::default_init(0);
    let mut group = c.benchmark_group("full_hd");
    group.sample_size(30);
    for n in [1, 8] {
        let grid = TileGrid::square(n).unwrap();
        let fixed = ClipLimitMap::uniform(grid, 2.0).unwrap();
        group.bench_with_input(BenchmarkId::new("clahe", grid), &grid, |b, &g| {
            b.iter(|| clahe(black_box(&y), g, &fixed).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("ia_clahe", grid), &grid, |b, &g| {
            b.iter(|| {
                let (clip, _) = estimator_forward(&preprocess(black_box(&y)), g, &params).unwrap();
                clahe(&y, g, &clip).unwrap()
            })
        });
    }
    group.bench_function("estimator", |b| {
        let grid = TileGrid::square(8).unwrap();
        b.iter(|| estimator_forward(&preprocess(black_box(&y)), grid, &params).unwrap())
    });
    group.finish();
}

fn training_step(c: &mut Criterion) {
    let s = TrainingSample::new(TileGrid::square(8).unwrap());
    let mut group = c.benchmark_group("train_640");
    group.sample_size(20);
    group.bench_function("clahe_tape_forward_backward", |b| {
        b.iter(|| {
            let (out, tape) = clahe_forward_tape(black_box(&s.degraded), s.grid, &s.clip).unwrap();
            let (_, d_out) = l1_loss(&out, &s.clean).unwrap();
            clahe_backward(&tape, &d_out).unwrap()
        })
    });
    group.bench_function("estimator_backward", |b| {
        let (out, tape) = clahe_forward_tape(&s.degraded, s.grid, &s.clip).unwrap();
        let d_clip = clahe_backward(&tape, &l1_loss(&out, &s.clean).unwrap().1).unwrap();
        b.iter(|| estimator_backward(black_box(&s.cache), &s.params, &d_clip).unwrap())
    });
    group.finish();
}

criterion_group!(benches, inference, training_step);
criterion_main!(benches);

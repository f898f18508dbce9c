//! Full pipeline on one worker versus the whole rayon pool. Build with
//! `--no-default-features` to measure the sequential fallback instead.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use tokentrim::io::{generate_synthetic, SyntheticSpec};
use tokentrim::{prune, with_threads, PruneConfig};

fn pipeline(c: &mut Criterion) {
    let cfg = PruneConfig::default();
    let mut group = c.benchmark_group("prune");
    group.sample_size(10);
    for n_images in [4, 16] {
        let bundle = generate_synthetic(&SyntheticSpec {
            n_images,
            tokens_per_image: 576,
            dim: 128,
            seed: 3,
            clusters: 16,
            noise: 0.3,
            drift: 0.2,
            text_tokens: 32,
        })
        .unwrap();
        group.bench_with_input(
            BenchmarkId::new("one_thread", n_images),
            &bundle,
            |b, bd| b.iter(|| with_threads(Some(1), || prune(black_box(bd), &cfg).unwrap())),
        );
        group.bench_with_input(BenchmarkId::new("pool", n_images), &bundle, |b, bd| {
            b.iter(|| prune(black_box(bd), &cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, pipeline);
criterion_main!(benches);

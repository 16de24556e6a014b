use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use openqa_bench::{synthetic_index, synthetic_store};
use openqa_core::retriever::{build_index, hash_feature, IndexOptions};

fn bench_hashing(c: &mut Criterion) {
    let grams: Vec<String> = (0..1000)
        .map(|i| format!("term{} term{}", i, (i * 7) % 900))
        .collect();
    c.bench_function("hash_feature_1k_bigrams", |b| {
        b.iter(|| {
            let mut acc = 0u64;
            for g in &grams {
                acc += u64::from(hash_feature(black_box(g), 0, 24));
            }
            acc
        })
    });
}

fn bench_build_index(c: &mut Criterion) {
    let dir = tempfile::tempdir().unwrap();
    let store = synthetic_store(&dir, 500, 1);
    c.bench_function("build_index_500_docs", |b| {
        b.iter(|| build_index(black_box(&store), IndexOptions::default()).unwrap())
    });
}

fn bench_top_k(c: &mut Criterion) {
    let dir = tempfile::tempdir().unwrap();
    let store = synthetic_store(&dir, 2000, 2);
    let index = synthetic_index(&store);
    c.bench_function("top_k_2000_docs", |b| {
        b.iter_batched(
            || "term1 term17 term230 term555 term42".to_string(),
            |q| index.top_k(black_box(&q), 5),
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, bench_hashing, bench_build_index, bench_top_k);
criterion_main!(benches);

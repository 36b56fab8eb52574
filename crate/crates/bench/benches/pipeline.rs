use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use sentidrift_bench::{corpus_csv, scored};
use sentidrift_core::detection::ThresholdConfig;
use sentidrift_core::ingest::{ingest, InputFormat};
use sentidrift_core::scorer::{score_all, Lexicon};
use sentidrift_core::windowing::segment;
use sentidrift_core::{analyze, score_series, OnlineDetector, ScorerMode, WindowSpec};

fn bench_ingest(c: &mut Criterion) {
    let mut group = c.benchmark_group("ingest");
    for n in [10_000usize, 100_000] {
        let csv = corpus_csv(n);
        group.throughput(Throughput::Elements(n as u64));
        group.bench_with_input(BenchmarkId::from_parameter(n), &csv, |b, csv| {
            b.iter(|| ingest(black_box(csv.as_slice()), InputFormat::Csv).unwrap())
        });
    }
    group.finish();
}

fn bench_scoring(c: &mut Criterion) {
    let comments: Vec<_> = scored(50_000).into_iter().map(|s| s.comment).collect();
    let lexicon = ScorerMode::Lexicon(std::sync::Arc::new(Lexicon::builtin()));
    let mut group = c.benchmark_group("score");
    group.throughput(Throughput::Elements(comments.len() as u64));
    for (name, mode) in [("passthrough", ScorerMode::Passthrough), ("lexicon", lexicon)] {
        group.bench_function(name, |b| b.iter(|| score_all(black_box(comments.clone()), &mode)));
    }
    group.finish();
}

fn bench_aggregation(c: &mut Criterion) {
    let comments = scored(1_000_000);
    let mut group = c.benchmark_group("aggregate");
    group.throughput(Throughput::Elements(comments.len() as u64));
    for size in [100usize, 1_000] {
        group.bench_with_input(BenchmarkId::new("count_windows", size), &size, |b, &size| {
            b.iter(|| {
                let windows = segment(black_box(&comments), &WindowSpec::count(size)).unwrap();
                score_series(&windows)
            })
        });
    }
    group.finish();
}

fn bench_detection(c: &mut Criterion) {
    let comments = scored(1_000_000);
    let windows = segment(&comments, &WindowSpec::count(100)).unwrap();
    let scores = score_series(&windows);
    let cfg = ThresholdConfig::default();
    let mut group = c.benchmark_group("detect");
    group.throughput(Throughput::Elements(scores.len() as u64));
    group.bench_function("batch", |b| b.iter(|| analyze(black_box(&scores), &cfg)));
    group.bench_function("batch_history_50", |b| {
        let cfg = cfg.with_history(50);
        b.iter(|| analyze(black_box(&scores), &cfg))
    });
    group.bench_function("online", |b| {
        b.iter(|| {
            let mut detector = OnlineDetector::new(cfg);
            scores
                .iter()
                .filter_map(|s| detector.update(s))
                .filter(|d| d.anomalous)
                .count()
        })
    });
    group.finish();
}

criterion_group!(benches, bench_ingest, bench_scoring, bench_aggregation, bench_detection);
criterion_main!(benches);

//! Library chain checked against straightforward re-implementations.

use std::collections::BTreeMap;

use sentidrift_core::detection::ThresholdConfig;
use sentidrift_core::ingest::{ingest, InputFormat};
use sentidrift_core::reporting::{heatmap_matrix, reason_distribution, LabelFilter};
use sentidrift_core::scorer::score_all;
use sentidrift_core::synth::{self, SynthConfig};
use sentidrift_core::windowing::{segment, sort_by_time};
use sentidrift_core::{aggregate_topic, analyze, score_series, ScorerMode, SentimentLabel, WindowSpec};

fn corpus(count: usize, seed: u64) -> Vec<u8> {
    let mut buf = Vec::new();
    synth::write_csv(
        &mut buf,
        SynthConfig {
            count,
            seed,
            episode_rate: 0.01,
            ..SynthConfig::default()
        },
    )
    .unwrap();
    buf
}

/// Window means, deltas and flags computed directly from raw labels.
fn naive(labels: &[i64], size: usize, alpha: f64) -> (Vec<f64>, Vec<usize>) {
    let scores: Vec<f64> = labels
        .chunks_exact(size)
        .map(|w| w.iter().sum::<i64>() as f64 / size as f64)
        .collect();
    let deltas: Vec<f64> = scores.windows(2).map(|p| p[1] - p[0]).collect();
    if deltas.is_empty() {
        return (scores, Vec::new());
    }
    let mean = deltas.iter().sum::<f64>() / deltas.len() as f64;
    let var = deltas.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / deltas.len() as f64;
    let tau = mean - alpha * var.sqrt();
    let flagged = deltas
        .iter()
        .enumerate()
        .filter(|(_, d)| **d < tau - 1e-12)
        .map(|(i, _)| i + 1)
        .collect();
    (scores, flagged)
}

#[test]
fn chain_matches_naive_oracle() {
    for (seed, size) in [(1, 100), (2, 37), (3, 250)] {
        let bytes = corpus(8_000, seed);
        let ingested = ingest(bytes.as_slice(), InputFormat::Csv).unwrap();
        assert_eq!(ingested.summary.accepted, 8_000);
        let labels: Vec<i64> = ingested
            .comments
            .iter()
            .map(|c| c.label.unwrap().score() as i64)
            .collect();

        let (scored, missing) = score_all(ingested.comments, &ScorerMode::Passthrough);
        assert!(missing.is_empty());
        let scored = sort_by_time(scored);
        let windows = segment(&scored, &WindowSpec::count(size)).unwrap();
        let scores = score_series(&windows);
        let report = analyze(&scores, &ThresholdConfig::default());

        let (expected_scores, expected_flags) = naive(&labels, size, 1.5);
        assert_eq!(scores.len(), expected_scores.len());
        for (got, want) in scores.iter().zip(&expected_scores) {
            assert!((got.value() - want).abs() < 1e-12);
        }
        // Flags far from the threshold must agree with the oracle; the naive
        // version uses a small margin so rounding cannot flip a verdict.
        for w in expected_flags {
            assert!(report.is_flagged(w), "seed {seed}: window {w}");
        }
        let tau = report.tau.unwrap();
        for a in &report.anomalies {
            assert!(a.delta < tau);
        }
    }
}

#[test]
fn heatmap_cells_equal_topic_recomputation() {
    let bytes = corpus(5_000, 9);
    let ingested = ingest(bytes.as_slice(), InputFormat::Csv).unwrap();
    let (scored, _) = score_all(ingested.comments, &ScorerMode::Passthrough);
    let windows = segment(&scored, &WindowSpec::count(100)).unwrap();
    let scores = score_series(&windows);
    let matrix = heatmap_matrix(&scores, true);
    assert_eq!(matrix.columns.len(), windows.len());
    for (topic, row) in matrix.rows.iter().zip(&matrix.cells) {
        for (window, cell) in windows.iter().zip(row) {
            assert_eq!(*cell, aggregate_topic(window, topic), "{topic} / {}", window.index);
        }
    }

    // Rows ordered by total volume.
    let mut volume: BTreeMap<&str, usize> = BTreeMap::new();
    for s in &scored {
        *volume.entry(s.comment.topic.as_str()).or_default() += 1;
    }
    let ordered: Vec<usize> = matrix.rows.iter().map(|t| volume[t.as_str()]).collect();
    assert!(ordered.windows(2).all(|p| p[0] >= p[1]));
}

#[test]
fn reason_distribution_partitions_negative_comments() {
    let bytes = corpus(6_000, 4);
    let ingested = ingest(bytes.as_slice(), InputFormat::Csv).unwrap();
    let (scored, _) = score_all(ingested.comments, &ScorerMode::Passthrough);
    let windows = segment(&scored, &WindowSpec::count(100)).unwrap();
    let scores = score_series(&windows);
    let report = analyze(&scores, &ThresholdConfig::new(1.0));
    assert!(!report.anomalies.is_empty());

    let dist = reason_distribution(&windows, &report, LabelFilter::NegativeOnly);
    let negatives = scored.iter().filter(|s| s.label == SentimentLabel::Negative).count() as u64;
    assert_eq!(dist.anomalous_comment_count + dist.normal_comment_count, negatives);
    for group in [
        dist.rows.iter().filter_map(|r| r.anomalous_proportion).sum::<f64>(),
        dist.rows.iter().filter_map(|r| r.normal_proportion).sum::<f64>(),
    ] {
        assert!((group - 1.0).abs() < 1e-9);
    }

    let anomalous_negatives: u64 = windows
        .iter()
        .filter(|w| report.is_flagged(w.index))
        .flat_map(|w| w.members)
        .filter(|s| s.label == SentimentLabel::Negative)
        .count() as u64;
    assert_eq!(dist.anomalous_comment_count, anomalous_negatives);
}

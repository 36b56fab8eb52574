//! Temporal sentiment aggregation and drop detection for timestamped user feedback.
//!
//! The crate turns per-comment sentiment labels into window-level sentiment
//! series, flags windows whose score falls abruptly relative to the previous
//! window, and produces topic-aware diagnostics.
//!
//! The stages are usable on their own:
//!
//! - [`ingest`]: CSV/JSONL parsing, timestamp normalization, validation, deduplication
//! - [`scorer`]: three-class labels and their numeric image, passthrough and lexicon scorers
//! - [`windowing`]: count-based and time-based tumbling windows
//! - [`aggregation`]: window means and per-topic means
//! - [`detection`]: first-order differences, the mean/std threshold, batch and online detectors
//! - [`reporting`]: reason distributions, topic trajectories, heatmaps, SVG charts
//! - [`pipeline`]: end-to-end batch and streaming runs that write artifacts
//! - [`export`]: artifact file formats; [`synth`]: seeded synthetic corpora

pub mod aggregation;
pub mod detection;
pub mod export;
pub mod ingest;
pub mod pipeline;
pub mod reporting;
pub mod scorer;
pub mod synth;
pub mod windowing;

pub use aggregation::{aggregate_topic, aggregate_window, score_series, Score, TopicScore, WindowScore};
pub use detection::{
    analyze, compute_threshold, delta_series, detect, AnomalyReport, AnomalyRow, Decision, Delta, DeltaSeries,
    OnlineDetector, Threshold, ThresholdConfig,
};
pub use ingest::{Comment, CommentId, InputFormat, RawRecord, Topic};
pub use scorer::{ScoredComment, ScorerMode, SentimentLabel};
pub use windowing::{PartialPolicy, Window, WindowBounds, WindowMode, WindowSpec};

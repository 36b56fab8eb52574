//! Seeded synthetic feedback corpora for tests and benchmarks.
//!
//! The generator emits pre-labeled, time-ordered comments with airline-style
//! complaint topics. Occasional "episodes" raise the share of negative
//! comments for a stretch of the stream so the detector has something to find.

use std::io::Write;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ingest::{render_timestamp, Comment, CommentId, Topic};
use crate::scorer::SentimentLabel;

pub const TOPICS: [&str; 6] = [
    "Customer Service Issue",
    "Late Flight",
    "Cancelled Flight",
    "Lost Luggage",
    "Flight Attendant Complaints",
    "Bad Flight",
];

const POSITIVE_TEXT: [&str; 4] = [
    "thanks for the great flight",
    "crew was friendly and helpful",
    "smooth boarding, love it",
    "excellent service today",
];
const NEUTRAL_TEXT: [&str; 4] = [
    "is the lounge open",
    "what gate for the evening departure",
    "checking in now",
    "any update on the schedule",
];
const NEGATIVE_TEXT: [&str; 4] = [
    "delayed again, terrible service",
    "bag lost and nobody helps",
    "flight cancelled, stuck waiting",
    "rude agent at the desk",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub count: usize,
    pub seed: u64,
    /// Epoch ms of the first comment.
    pub start_ms: i64,
    /// Upper bound on the spacing between consecutive comments.
    pub max_gap_ms: i64,
    /// Probability per comment of starting a negative episode.
    pub episode_rate: f64,
    pub episode_len: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            count: 10_000,
            seed: 0,
            // 2015-02-16T00:00:00Z
            start_ms: 1_424_044_800_000,
            max_gap_ms: 120_000,
            episode_rate: 0.002,
            episode_len: 120,
        }
    }
}

/// Generator state; iterate to produce comments in time order.
pub struct SynthStream {
    config: SynthConfig,
    rng: ChaCha8Rng,
    produced: usize,
    clock_ms: i64,
    episode_left: usize,
    episode_topic: usize,
    baseline: WeightedIndex<f64>,
    episode: WeightedIndex<f64>,
}

impl SynthStream {
    pub fn new(config: SynthConfig) -> Self {
        SynthStream {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            produced: 0,
            clock_ms: config.start_ms,
            episode_left: 0,
            episode_topic: 0,
            // negative / neutral / positive
            baseline: WeightedIndex::new([0.45, 0.32, 0.23]).expect("valid weights"),
            episode: WeightedIndex::new([0.8, 0.12, 0.08]).expect("valid weights"),
            config,
        }
    }
}

impl Iterator for SynthStream {
    type Item = Comment;

    fn next(&mut self) -> Option<Comment> {
        if self.produced >= self.config.count {
            return None;
        }
        self.produced += 1;
        let rng = &mut self.rng;

        if self.episode_left == 0 && rng.gen_bool(self.config.episode_rate.clamp(0.0, 1.0)) {
            self.episode_left = self.config.episode_len;
            self.episode_topic = rng.gen_range(0..TOPICS.len());
        }
        let in_episode = self.episode_left > 0;
        self.episode_left = self.episode_left.saturating_sub(1);

        let label = match if in_episode {
            self.episode.sample(rng)
        } else {
            self.baseline.sample(rng)
        } {
            0 => SentimentLabel::Negative,
            1 => SentimentLabel::Neutral,
            _ => SentimentLabel::Positive,
        };

        let topic = if rng.gen_bool(0.1) {
            Topic::unlabeled()
        } else if in_episode && rng.gen_bool(0.6) {
            Topic::new(TOPICS[self.episode_topic])
        } else {
            Topic::new(TOPICS[rng.gen_range(0..TOPICS.len())])
        };

        let pool = match label {
            SentimentLabel::Negative => &NEGATIVE_TEXT,
            SentimentLabel::Neutral => &NEUTRAL_TEXT,
            SentimentLabel::Positive => &POSITIVE_TEXT,
        };
        let text = pool[rng.gen_range(0..pool.len())].to_string();

        self.clock_ms += rng.gen_range(1_000..=self.config.max_gap_ms.max(1_000));
        Some(Comment {
            id: CommentId::Explicit(format!("s{}", self.produced)),
            timestamp_ms: self.clock_ms,
            text,
            label: Some(label),
            topic,
        })
    }
}

pub fn generate(config: SynthConfig) -> Vec<Comment> {
    SynthStream::new(config).collect()
}

/// Writes a corpus in the ingest CSV schema `id,timestamp,text,label,topic`.
pub fn write_csv<W: Write>(out: W, config: SynthConfig) -> Result<usize, csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["id", "timestamp", "text", "label", "topic"])?;
    let mut n = 0;
    for c in SynthStream::new(config) {
        let topic = if c.topic.is_unlabeled() { "" } else { c.topic.as_str() };
        let label = c.label.map(|l| l.as_str()).unwrap_or("");
        w.write_record([
            c.id.to_string().as_str(),
            render_timestamp(c.timestamp_ms).as_str(),
            c.text.as_str(),
            label,
            topic,
        ])?;
        n += 1;
    }
    w.flush()?;
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{ingest, InputFormat};

    #[test]
    fn seeded_and_ordered() {
        let cfg = SynthConfig {
            count: 500,
            seed: 7,
            ..SynthConfig::default()
        };
        let a = generate(cfg);
        assert_eq!(a, generate(cfg));
        assert_ne!(a, generate(SynthConfig { seed: 8, ..cfg }));
        assert!(a.windows(2).all(|w| w[0].timestamp_ms < w[1].timestamp_ms));
        assert!(a.iter().all(|c| c.label.is_some()));
    }

    #[test]
    fn csv_reingests_cleanly() {
        let cfg = SynthConfig {
            count: 300,
            seed: 1,
            ..SynthConfig::default()
        };
        let mut buf = Vec::new();
        assert_eq!(write_csv(&mut buf, cfg).unwrap(), 300);
        let out = ingest(buf.as_slice(), InputFormat::Csv).unwrap();
        assert!(out.errors.is_empty());
        assert_eq!(out.comments, generate(cfg));
    }
}

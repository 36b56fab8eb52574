//! Window-level and per-topic mean sentiment.
//!
//! Scores are kept as exact rationals. Member scores are integers in
//! {−1, 0, +1}, so a window mean is `(n_pos − n_neg) / n` and every later
//! difference between window means is exact until it is converted to `f64`.
//! That makes the Δ-series independent of any constant shift applied to the
//! scores.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Sub};

use num_rational::Ratio;
use num_traits::{Signed, ToPrimitive};
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::ingest::Topic;
use crate::scorer::SentimentLabel;
use crate::windowing::Window;

/// Longest decimal accepted by [`Score::parse_decimal`], in digits.
const MAX_DECIMAL_DIGITS: usize = 30;

/// An exact sentiment score.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Score(Ratio<i128>);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid score `{0}`: expected a decimal number such as -0.25")]
pub struct ScoreParseError(pub String);

impl Score {
    pub const ZERO: Score = Score(Ratio::new_raw(0, 1));

    /// `net / count`. Panics if `count` is zero.
    pub fn from_counts(net: i64, count: u64) -> Self {
        assert!(count > 0, "score of an empty window is undefined");
        Score(Ratio::new(i128::from(net), i128::from(count)))
    }

    pub fn from_ratio(numer: i128, denom: i128) -> Self {
        Score(Ratio::new(numer, denom))
    }

    pub fn numer(&self) -> i128 {
        *self.0.numer()
    }

    pub fn denom(&self) -> i128 {
        *self.0.denom()
    }

    pub fn value(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    pub fn abs(&self) -> Score {
        Score(self.0.abs())
    }

    /// Parses a plain or scientific decimal literal exactly (`-0.13` is −13/100).
    pub fn parse_decimal(raw: &str) -> Result<Score, ScoreParseError> {
        let err = || ScoreParseError(raw.to_string());
        let s = raw.trim();
        let (negative, s) = match s.as_bytes().first() {
            Some(b'-') => (true, &s[1..]),
            Some(b'+') => (false, &s[1..]),
            _ => (false, s),
        };
        let (mantissa, exponent) = match s.find(['e', 'E']) {
            Some(pos) => (&s[..pos], s[pos + 1..].parse::<i32>().map_err(|_| err())?),
            None => (s, 0),
        };
        let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(err());
        }
        if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
            return Err(err());
        }
        let digits = format!("{int_part}{frac_part}");
        let digits = digits.trim_start_matches('0');
        if digits.len() > MAX_DECIMAL_DIGITS {
            return Err(err());
        }
        let numer: i128 = if digits.is_empty() {
            0
        } else {
            digits.parse().map_err(|_| err())?
        };
        let scale = exponent - frac_part.len() as i32;
        if scale.unsigned_abs() > 36 {
            return Err(err());
        }
        let pow = 10i128.checked_pow(scale.unsigned_abs()).ok_or_else(err)?;
        let ratio = if scale >= 0 {
            Ratio::from_integer(numer.checked_mul(pow).ok_or_else(err)?)
        } else {
            Ratio::new(numer, pow)
        };
        Ok(Score(if negative { -ratio } else { ratio }))
    }

    /// Replaces the score by the nearest `m / count` when that fraction is
    /// within `1e-9`, recovering exact window means from rounded exports.
    pub fn snap_to_count(self, count: u64) -> Score {
        if count == 0 {
            return self;
        }
        let candidate = Score::from_counts((self.value() * count as f64).round() as i64, count);
        if (candidate - self).abs().value() <= 1e-9 {
            candidate
        } else {
            self
        }
    }
}

impl fmt::Debug for Score {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Score({}/{} ≈ {})", self.numer(), self.denom(), self.value())
    }
}

impl fmt::Display for Score {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

impl Add for Score {
    type Output = Score;
    fn add(self, rhs: Score) -> Score {
        Score(self.0 + rhs.0)
    }
}

impl Sub for Score {
    type Output = Score;
    fn sub(self, rhs: Score) -> Score {
        Score(self.0 - rhs.0)
    }
}

impl Default for Score {
    fn default() -> Self {
        Score::ZERO
    }
}

impl Serialize for Score {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.value())
    }
}

/// Label counts for a group of comments.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Tally {
    pub positive: u64,
    pub neutral: u64,
    pub negative: u64,
}

impl Tally {
    pub fn add(&mut self, label: SentimentLabel) {
        match label {
            SentimentLabel::Positive => self.positive += 1,
            SentimentLabel::Neutral => self.neutral += 1,
            SentimentLabel::Negative => self.negative += 1,
        }
    }

    pub fn count(&self) -> u64 {
        self.positive + self.neutral + self.negative
    }

    pub fn net(&self) -> i64 {
        self.positive as i64 - self.negative as i64
    }

    /// Mean score, `None` for an empty tally.
    pub fn score(&self) -> Option<Score> {
        let n = self.count();
        (n > 0).then(|| Score::from_counts(self.net(), n))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TopicScore {
    pub count: u64,
    pub score: Score,
}

/// Aggregated sentiment for one window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowScore {
    pub window: usize,
    pub count: u64,
    pub score: Score,
    /// Only topics present in the window have an entry.
    pub topics: BTreeMap<Topic, TopicScore>,
    pub gap_before: bool,
}

impl WindowScore {
    /// A score with no topic breakdown, as read back from an export.
    pub fn bare(window: usize, count: u64, score: Score) -> Self {
        WindowScore {
            window,
            count,
            score,
            topics: BTreeMap::new(),
            gap_before: false,
        }
    }

    pub fn value(&self) -> f64 {
        self.score.value()
    }

    pub fn topic_value(&self, topic: &Topic) -> Option<f64> {
        self.topics.get(topic).map(|t| t.score.value())
    }
}

pub fn aggregate_window(window: &Window<'_>) -> WindowScore {
    assert!(!window.is_empty(), "window {} has no members", window.index);
    let mut total = Tally::default();
    let mut by_topic: BTreeMap<Topic, Tally> = BTreeMap::new();
    for member in window.members {
        total.add(member.label);
        match by_topic.get_mut(&member.comment.topic) {
            Some(t) => t.add(member.label),
            None => {
                let mut t = Tally::default();
                t.add(member.label);
                by_topic.insert(member.comment.topic.clone(), t);
            }
        }
    }
    let topics = by_topic
        .into_iter()
        .map(|(topic, tally)| {
            let score = tally.score().expect("topic entries are non-empty");
            (
                topic,
                TopicScore {
                    count: tally.count(),
                    score,
                },
            )
        })
        .collect();
    WindowScore {
        window: window.index,
        count: total.count(),
        score: total.score().expect("window is non-empty"),
        topics,
        gap_before: window.gap_before,
    }
}

/// Mean score over the window's members carrying `topic`; `None` if there are none.
pub fn aggregate_topic(window: &Window<'_>, topic: &Topic) -> Option<f64> {
    let mut tally = Tally::default();
    for m in window.members.iter().filter(|m| &m.comment.topic == topic) {
        tally.add(m.label);
    }
    tally.score().map(|s| s.value())
}

pub fn score_series(windows: &[Window<'_>]) -> Vec<WindowScore> {
    windows.par_iter().map(aggregate_window).collect()
}

/// Orders topics by descending total comment count across `scores`, then by name.
pub fn topics_by_volume(scores: &[WindowScore]) -> Vec<(Topic, u64)> {
    let mut totals: BTreeMap<&Topic, u64> = BTreeMap::new();
    for ws in scores {
        for (topic, ts) in &ws.topics {
            *totals.entry(topic).or_default() += ts.count;
        }
    }
    let mut out: Vec<(Topic, u64)> = totals.into_iter().map(|(t, n)| (t.clone(), n)).collect();
    out.sort_by(|a, b| match b.1.cmp(&a.1) {
        Ordering::Equal => a.0.cmp(&b.0),
        other => other,
    });
    out
}

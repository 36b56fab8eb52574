//! Three-class sentiment labels, their numeric scores, and the scorers that
//! produce them.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ingest::{Comment, CommentId};

/// Lexicon shipped with the crate, in the same format [`Lexicon::parse`] reads.
pub const DEFAULT_LEXICON: &str = include_str!("../data/default_lexicon.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SentimentLabel {
    Negative,
    Neutral,
    Positive,
}

impl SentimentLabel {
    pub const ALL: [SentimentLabel; 3] = [
        SentimentLabel::Negative,
        SentimentLabel::Neutral,
        SentimentLabel::Positive,
    ];

    /// Negative → −1, Neutral → 0, Positive → +1.
    pub fn score(self) -> i8 {
        match self {
            SentimentLabel::Negative => -1,
            SentimentLabel::Neutral => 0,
            SentimentLabel::Positive => 1,
        }
    }

    pub fn from_score(score: i8) -> Option<Self> {
        match score {
            -1 => Some(SentimentLabel::Negative),
            0 => Some(SentimentLabel::Neutral),
            1 => Some(SentimentLabel::Positive),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SentimentLabel::Negative => "negative",
            SentimentLabel::Neutral => "neutral",
            SentimentLabel::Positive => "positive",
        }
    }
}

impl fmt::Display for SentimentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown sentiment label `{0}`; expected one of: negative, neutral, positive")]
pub struct LabelError(pub String);

/// Case-insensitive parse of `negative`, `neutral` or `positive`.
pub fn parse_label(raw: &str) -> Result<SentimentLabel, LabelError> {
    let trimmed = raw.trim();
    SentimentLabel::ALL
        .into_iter()
        .find(|l| l.as_str().eq_ignore_ascii_case(trimmed))
        .ok_or_else(|| LabelError(trimmed.to_string()))
}

impl FromStr for SentimentLabel {
    type Err = LabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_label(s)
    }
}

/// Map a label to its numeric score.
pub fn map_label_to_score(label: SentimentLabel) -> i8 {
    label.score()
}

/// A comment with the label that was used for it.
///
/// The numeric score is derived from `label`, so the two cannot disagree.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredComment {
    pub comment: Comment,
    pub label: SentimentLabel,
}

impl ScoredComment {
    pub fn score(&self) -> i8 {
        self.label.score()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LexiconError {
    #[error("line {line}: term outside of a [positive] or [negative] section")]
    NoSection { line: usize },
    #[error("line {line}: unknown section `{name}`")]
    UnknownSection { line: usize, name: String },
    #[error("line {line}: term `{term}` must be a single lowercase alphanumeric token")]
    BadTerm { line: usize, term: String },
    #[error("term `{0}` appears in both [positive] and [negative]")]
    Overlap(String),
    #[error("failed to read lexicon: {0}")]
    Io(#[from] std::io::Error),
}

/// Positive and negative term sets. The two sets are disjoint.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicon {
    positive: HashSet<String>,
    negative: HashSet<String>,
}

#[derive(Clone, Copy)]
enum Section {
    Positive,
    Negative,
}

impl Lexicon {
    pub fn new<P, N>(positive: P, negative: N) -> Result<Self, LexiconError>
    where
        P: IntoIterator,
        P::Item: Into<String>,
        N: IntoIterator,
        N::Item: Into<String>,
    {
        let positive: HashSet<String> = positive.into_iter().map(Into::into).collect();
        let negative: HashSet<String> = negative.into_iter().map(Into::into).collect();
        if let Some(term) = positive.intersection(&negative).min() {
            return Err(LexiconError::Overlap(term.clone()));
        }
        Ok(Lexicon { positive, negative })
    }

    /// Reads the `[positive]` / `[negative]` section format, one term per
    /// line, `#` starting a comment.
    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        let mut section = None;
        let mut positive = Vec::new();
        let mut negative = Vec::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw_line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(name) = content.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                section = match name.trim().to_ascii_lowercase().as_str() {
                    "positive" => Some(Section::Positive),
                    "negative" => Some(Section::Negative),
                    other => {
                        return Err(LexiconError::UnknownSection {
                            line,
                            name: other.to_string(),
                        })
                    }
                };
                continue;
            }
            let valid = content.chars().all(|c| c.is_alphanumeric() && !c.is_uppercase());
            if !valid {
                return Err(LexiconError::BadTerm {
                    line,
                    term: content.to_string(),
                });
            }
            match section {
                Some(Section::Positive) => positive.push(content.to_string()),
                Some(Section::Negative) => negative.push(content.to_string()),
                None => return Err(LexiconError::NoSection { line }),
            }
        }
        Lexicon::new(positive, negative)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, LexiconError> {
        Lexicon::parse(&std::fs::read_to_string(path)?)
    }

    pub fn builtin() -> Self {
        Lexicon::parse(DEFAULT_LEXICON).expect("bundled lexicon is well-formed")
    }

    pub fn positive_terms(&self) -> &HashSet<String> {
        &self.positive
    }

    pub fn negative_terms(&self) -> &HashSet<String> {
        &self.negative
    }

    /// Counts `(positive, negative)` term hits in `text`.
    pub fn hits(&self, text: &str) -> (usize, usize) {
        let mut pos = 0;
        let mut neg = 0;
        let mut token = String::new();
        let mut flush = |token: &mut String| {
            if !token.is_empty() {
                if self.positive.contains(token.as_str()) {
                    pos += 1;
                } else if self.negative.contains(token.as_str()) {
                    neg += 1;
                }
                token.clear();
            }
        };
        for c in text.chars() {
            if c.is_alphanumeric() {
                token.extend(c.to_lowercase());
            } else {
                flush(&mut token);
            }
        }
        flush(&mut token);
        (pos, neg)
    }

    /// Sign of `positive hits − negative hits`; ties and zero hits are Neutral.
    pub fn label(&self, text: &str) -> SentimentLabel {
        let (pos, neg) = self.hits(text);
        match pos.cmp(&neg) {
            std::cmp::Ordering::Greater => SentimentLabel::Positive,
            std::cmp::Ordering::Less => SentimentLabel::Negative,
            std::cmp::Ordering::Equal => SentimentLabel::Neutral,
        }
    }
}

#[derive(Debug, Clone)]
pub enum ScorerMode {
    /// Use the label that came with the input record.
    Passthrough,
    Lexicon(Arc<Lexicon>),
}

impl ScorerMode {
    pub fn name(&self) -> &'static str {
        match self {
            ScorerMode::Passthrough => "passthrough",
            ScorerMode::Lexicon(_) => "lexicon",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("comment {0} has no precomputed label (passthrough scorer)")]
pub struct MissingLabel(pub String);

impl MissingLabel {
    fn for_id(id: &CommentId) -> Self {
        MissingLabel(id.to_string())
    }
}

pub fn score_comment(comment: Comment, mode: &ScorerMode) -> Result<ScoredComment, (Comment, MissingLabel)> {
    let label = match mode {
        ScorerMode::Passthrough => match comment.label {
            Some(label) => label,
            None => {
                let err = MissingLabel::for_id(&comment.id);
                return Err((comment, err));
            }
        },
        ScorerMode::Lexicon(lexicon) => lexicon.label(&comment.text),
    };
    Ok(ScoredComment { comment, label })
}

/// Scores a batch in parallel. Order of the scored output follows the input;
/// comments that cannot be scored come back as errors, also in input order.
pub fn score_all(comments: Vec<Comment>, mode: &ScorerMode) -> (Vec<ScoredComment>, Vec<MissingLabel>) {
    let results: Vec<_> = comments.into_par_iter().map(|c| score_comment(c, mode)).collect();
    let mut scored = Vec::with_capacity(results.len());
    let mut errors = Vec::new();
    for r in results {
        match r {
            Ok(s) => scored.push(s),
            Err((_, e)) => errors.push(e),
        }
    }
    (scored, errors)
}

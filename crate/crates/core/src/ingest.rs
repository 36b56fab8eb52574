//! Raw comment ingestion: CSV/JSONL parsing, timestamp normalization,
//! text validation and duplicate removal.
//!
//! Malformed rows never abort a run. They surface as [`RowError`]s carrying
//! the 1-based line number, and the caller decides whether to report them.
//! Only an unreadable stream or a CSV header lacking the required columns is
//! fatal.

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;
use std::sync::Arc;

use chrono::{DateTime, NaiveDate, NaiveDateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::scorer::{parse_label, SentimentLabel};

/// Topic assigned to comments that arrive without one.
pub const UNLABELED: &str = "UNLABELED";

/// Integer epoch values at or above this magnitude are read as milliseconds.
pub const EPOCH_MILLIS_CUTOFF: i64 = 100_000_000_000;

/// 9999-12-31T23:59:59.999Z, the last instant with a four-digit RFC 3339 year.
pub const MAX_TIMESTAMP_MS: i64 = 253_402_300_799_999;

const ACCEPTED_TIMESTAMPS: &str = "RFC 3339 / ISO 8601 date-time (offset optional, UTC assumed), \
     ISO 8601 date, or integer epoch seconds / milliseconds";

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("failed to read input: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV header is missing required column `{0}`")]
    MissingColumn(&'static str),
    #[error("cannot infer input format from `{0}`; pass --format csv|jsonl")]
    UnknownFormat(String),
}

/// A recoverable, per-row problem.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RowError {
    pub line: u64,
    pub reason: String,
}

impl RowError {
    pub fn new(line: u64, reason: impl Into<String>) -> Self {
        RowError {
            line,
            reason: reason.into(),
        }
    }
}

impl fmt::Display for RowError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.reason)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    Csv,
    Jsonl,
}

impl InputFormat {
    pub fn from_path(path: &Path) -> Result<Self, IngestError> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase());
        match ext.as_deref() {
            Some("csv") => Ok(InputFormat::Csv),
            Some("jsonl") | Some("ndjson") => Ok(InputFormat::Jsonl),
            _ => Err(IngestError::UnknownFormat(path.display().to_string())),
        }
    }
}

/// One structurally parsed input row, before validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawRecord {
    /// 1-based line in the source where the record starts.
    pub line: u64,
    pub id: Option<String>,
    pub timestamp_raw: String,
    pub text: String,
    pub label_raw: Option<String>,
    pub topic_raw: Option<String>,
}

/// Topic identifier. Cheap to clone; never empty.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Topic(Arc<str>);

impl Topic {
    /// Builds a topic from raw text; blank input maps to [`UNLABELED`].
    pub fn new(raw: &str) -> Self {
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            Self::unlabeled()
        } else {
            Topic(Arc::from(trimmed))
        }
    }

    pub fn unlabeled() -> Self {
        Topic(Arc::from(UNLABELED))
    }

    pub fn is_unlabeled(&self) -> bool {
        &*self.0 == UNLABELED
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Topic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum CommentId {
    Explicit(String),
    /// Synthesized from the source line when the record has no id.
    Synthetic(u64),
}

impl fmt::Display for CommentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CommentId::Explicit(id) => f.write_str(id),
            CommentId::Synthetic(line) => write!(f, "row-{line}"),
        }
    }
}

/// A validated comment.
#[derive(Debug, Clone, PartialEq)]
pub struct Comment {
    pub id: CommentId,
    /// UTC epoch milliseconds, always `>= 0`.
    pub timestamp_ms: i64,
    pub text: String,
    pub label: Option<SentimentLabel>,
    pub topic: Topic,
}

/// Tallies surfaced after an ingest pass.
///
/// `parsed == accepted + skipped + duplicates` always holds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub parsed: u64,
    pub accepted: u64,
    pub skipped: u64,
    pub duplicates: u64,
}

/// Result of a full ingest pass.
#[derive(Debug, Clone, Default)]
pub struct Ingested {
    pub comments: Vec<Comment>,
    pub summary: IngestSummary,
    pub errors: Vec<RowError>,
}

/// Parses an ISO 8601 / RFC 3339 date-time or an integer epoch value into
/// UTC epoch milliseconds.
///
/// Integers below [`EPOCH_MILLIS_CUTOFF`] are seconds, the rest milliseconds.
/// Date-times without an offset are taken as UTC.
pub fn normalize_timestamp(raw: &str) -> Result<i64, String> {
    let s = raw.trim();
    if s.is_empty() {
        return Err("empty timestamp".to_string());
    }

    let ms = if let Some(ms) = parse_epoch(s)? {
        ms
    } else if let Some(ms) = parse_datetime(s) {
        ms
    } else {
        return Err(format!(
            "unrecognized timestamp `{s}`; accepted formats: {ACCEPTED_TIMESTAMPS}"
        ));
    };

    if ms < 0 {
        return Err(format!("timestamp `{s}` is before 1970-01-01T00:00:00Z"));
    }
    if ms > MAX_TIMESTAMP_MS {
        return Err(format!("timestamp `{s}` is after year 9999"));
    }
    Ok(ms)
}

fn parse_epoch(s: &str) -> Result<Option<i64>, String> {
    let digits = s.strip_prefix('-').unwrap_or(s);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Ok(None);
    }
    let value: i64 = s.parse().map_err(|_| format!("epoch value `{s}` out of range"))?;
    if value.abs() >= EPOCH_MILLIS_CUTOFF {
        Ok(Some(value))
    } else {
        Ok(Some(value * 1000))
    }
}

fn parse_datetime(s: &str) -> Option<i64> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp_millis());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f%z", "%Y-%m-%d %H:%M:%S%.f%z"] {
        if let Ok(dt) = DateTime::parse_from_str(s, fmt) {
            return Some(dt.timestamp_millis());
        }
    }
    for fmt in [
        "%Y-%m-%dT%H:%M:%S%.f",
        "%Y-%m-%d %H:%M:%S%.f",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M",
    ] {
        if let Ok(naive) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(naive.and_utc().timestamp_millis());
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|naive| naive.and_utc().timestamp_millis())
}

/// Renders epoch milliseconds as RFC 3339 UTC with millisecond precision.
pub fn render_timestamp(ms: i64) -> String {
    DateTime::<Utc>::from_timestamp_millis(ms)
        .map(|dt| dt.to_rfc3339_opts(SecondsFormat::Millis, true))
        .unwrap_or_else(|| ms.to_string())
}

/// Trims, normalizes line endings and checks the record, producing a [`Comment`].
pub fn validate_and_build(raw: RawRecord) -> Result<Comment, RowError> {
    let line = raw.line;
    let text = raw.text.trim();
    if text.is_empty() {
        return Err(RowError::new(line, "empty text"));
    }
    let text = if text.contains('\r') {
        text.replace("\r\n", "\n").replace('\r', "\n")
    } else {
        text.to_string()
    };

    let timestamp_ms = normalize_timestamp(&raw.timestamp_raw).map_err(|e| RowError::new(line, e))?;

    let label = match raw.label_raw.as_deref().map(str::trim) {
        None | Some("") => None,
        Some(l) => Some(parse_label(l).map_err(|e| RowError::new(line, e.to_string()))?),
    };

    let topic = raw
        .topic_raw
        .as_deref()
        .map(Topic::new)
        .unwrap_or_else(Topic::unlabeled);

    let id = match raw.id.map(|id| id.trim().to_string()) {
        Some(id) if !id.is_empty() => CommentId::Explicit(id),
        _ => CommentId::Synthetic(line),
    };

    Ok(Comment {
        id,
        timestamp_ms,
        text,
        label,
        topic,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum DedupKey {
    Id(String),
    Content(String, i64),
}

/// Tracks duplicate keys across a stream of comments.
///
/// The key is the explicit id when present, otherwise the
/// `(normalized text, timestamp)` pair.
#[derive(Debug, Default)]
pub struct Deduplicator {
    seen: HashSet<DedupKey>,
}

impl Deduplicator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns `true` the first time a key is seen.
    pub fn insert(&mut self, comment: &Comment) -> bool {
        let key = match &comment.id {
            CommentId::Explicit(id) => DedupKey::Id(id.clone()),
            CommentId::Synthetic(_) => DedupKey::Content(comment.text.clone(), comment.timestamp_ms),
        };
        self.seen.insert(key)
    }
}

/// Keeps the first occurrence of every duplicate key, preserving input order.
pub fn deduplicate(comments: Vec<Comment>) -> Vec<Comment> {
    let mut dedup = Deduplicator::new();
    comments.into_iter().filter(|c| dedup.insert(c)).collect()
}

/// Streaming record reader over CSV or JSONL input.
///
/// Yields `Ok(Ok(record))` for parsed rows, `Ok(Err(row_error))` for rows that
/// failed structurally, and `Err(_)` once on a fatal read error.
pub struct RecordReader<R: Read> {
    inner: Inner<R>,
    done: bool,
}

enum Inner<R: Read> {
    Csv {
        reader: csv::Reader<R>,
        columns: CsvColumns,
        record: csv::StringRecord,
    },
    Jsonl {
        reader: BufReader<R>,
        line: u64,
        buf: String,
    },
    Empty,
}

#[derive(Debug, Clone, Copy)]
struct CsvColumns {
    width: usize,
    id: Option<usize>,
    timestamp: usize,
    text: usize,
    label: Option<usize>,
    topic: Option<usize>,
}

/// Opens a record stream. A CSV header row is required unless the input is empty.
pub fn parse_records<R: Read>(input: R, format: InputFormat) -> Result<RecordReader<R>, IngestError> {
    let inner = match format {
        InputFormat::Csv => {
            let mut reader = csv::ReaderBuilder::new()
                .has_headers(true)
                .flexible(true)
                .from_reader(input);
            let headers = reader.headers().map_err(csv_fatal)?.clone();
            if headers.is_empty() {
                Inner::Empty
            } else {
                let find = |name: &str| {
                    headers
                        .iter()
                        .position(|h| h.trim().trim_start_matches('\u{feff}').eq_ignore_ascii_case(name))
                };
                let columns = CsvColumns {
                    width: headers.len(),
                    id: find("id"),
                    timestamp: find("timestamp").ok_or(IngestError::MissingColumn("timestamp"))?,
                    text: find("text").ok_or(IngestError::MissingColumn("text"))?,
                    label: find("label"),
                    topic: find("topic"),
                };
                Inner::Csv {
                    reader,
                    columns,
                    record: csv::StringRecord::new(),
                }
            }
        }
        InputFormat::Jsonl => Inner::Jsonl {
            reader: BufReader::new(input),
            line: 0,
            buf: String::new(),
        },
    };
    Ok(RecordReader { inner, done: false })
}

fn csv_fatal(err: csv::Error) -> IngestError {
    match err.into_kind() {
        csv::ErrorKind::Io(e) => IngestError::Io(e),
        other => IngestError::Io(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            format!("{other:?}"),
        )),
    }
}

impl<R: Read> Iterator for RecordReader<R> {
    type Item = Result<Result<RawRecord, RowError>, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let item = match &mut self.inner {
            Inner::Empty => None,
            Inner::Csv {
                reader,
                columns,
                record,
            } => next_csv(reader, columns, record),
            Inner::Jsonl { reader, line, buf } => next_jsonl(reader, line, buf),
        };
        if matches!(item, None | Some(Err(_))) {
            self.done = true;
        }
        item
    }
}

fn next_csv<R: Read>(
    reader: &mut csv::Reader<R>,
    cols: &CsvColumns,
    record: &mut csv::StringRecord,
) -> Option<Result<Result<RawRecord, RowError>, IngestError>> {
    match reader.read_record(record) {
        Ok(false) => None,
        Ok(true) => {
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            if record.len() != cols.width {
                return Some(Ok(Err(RowError::new(
                    line,
                    format!("expected {} fields, found {}", cols.width, record.len()),
                ))));
            }
            let opt = |idx: Option<usize>| {
                idx.map(|i| &record[i])
                    .filter(|v| !v.trim().is_empty())
                    .map(str::to_string)
            };
            Some(Ok(Ok(RawRecord {
                line,
                id: opt(cols.id),
                timestamp_raw: record[cols.timestamp].to_string(),
                text: record[cols.text].to_string(),
                label_raw: opt(cols.label),
                topic_raw: opt(cols.topic),
            })))
        }
        Err(err) => {
            let line = err.position().map(|p| p.line()).unwrap_or(0);
            match err.into_kind() {
                csv::ErrorKind::Io(e) => Some(Err(IngestError::Io(e))),
                csv::ErrorKind::Utf8 { .. } => Some(Ok(Err(RowError::new(line, "invalid UTF-8")))),
                other => Some(Ok(Err(RowError::new(line, format!("{other:?}"))))),
            }
        }
    }
}

fn next_jsonl<R: Read>(
    reader: &mut BufReader<R>,
    line: &mut u64,
    buf: &mut String,
) -> Option<Result<Result<RawRecord, RowError>, IngestError>> {
    loop {
        buf.clear();
        match reader.read_line(buf) {
            Ok(0) => return None,
            Ok(_) => {
                *line += 1;
                if buf.trim().is_empty() {
                    continue;
                }
                return Some(Ok(parse_json_line(buf, *line)));
            }
            Err(e) if e.kind() == std::io::ErrorKind::InvalidData => {
                *line += 1;
                return Some(Ok(Err(RowError::new(*line, "invalid UTF-8"))));
            }
            Err(e) => return Some(Err(IngestError::Io(e))),
        }
    }
}

fn parse_json_line(text: &str, line: u64) -> Result<RawRecord, RowError> {
    let value: Value = serde_json::from_str(text).map_err(|e| RowError::new(line, format!("invalid JSON: {e}")))?;
    let Value::Object(map) = value else {
        return Err(RowError::new(line, "expected a JSON object"));
    };

    let scalar = |key: &str| -> Result<Option<String>, RowError> {
        match map.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(Value::Number(n)) => Ok(Some(n.to_string())),
            Some(_) => Err(RowError::new(line, format!("field `{key}` must be a string"))),
        }
    };

    let text = match map.get("text") {
        Some(Value::String(s)) => s.clone(),
        None | Some(Value::Null) => return Err(RowError::new(line, "missing text")),
        Some(_) => return Err(RowError::new(line, "field `text` must be a string")),
    };
    let timestamp_raw = scalar("timestamp")?.ok_or_else(|| RowError::new(line, "missing timestamp"))?;

    Ok(RawRecord {
        line,
        id: scalar("id")?,
        timestamp_raw,
        text,
        label_raw: scalar("label")?,
        topic_raw: scalar("topic")?,
    })
}

/// Parses, validates and deduplicates a whole input.
pub fn ingest<R: Read>(input: R, format: InputFormat) -> Result<Ingested, IngestError> {
    let mut out = Ingested::default();
    let mut dedup = Deduplicator::new();
    for item in parse_records(input, format)? {
        out.summary.parsed += 1;
        match item?.and_then(validate_and_build) {
            Ok(comment) => {
                if dedup.insert(&comment) {
                    out.summary.accepted += 1;
                    out.comments.push(comment);
                } else {
                    out.summary.duplicates += 1;
                }
            }
            Err(err) => {
                out.summary.skipped += 1;
                out.errors.push(err);
            }
        }
    }
    Ok(out)
}

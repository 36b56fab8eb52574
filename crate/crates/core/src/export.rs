//! CSV/JSON artifact formats and atomic file output.

use std::io::{Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::aggregation::{Score, WindowScore};
use crate::detection::AnomalyReport;
use crate::ingest::{render_timestamp, RowError};
use crate::reporting::{HeatmapMatrix, ReasonDistribution, Trajectories};
use crate::scorer::ScoredComment;

#[derive(Debug, thiserror::Error)]
pub enum ExportError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("window score file, line {line}: {reason}")]
    BadRow { line: u64, reason: String },
}

/// Writes `contents` to a temporary file next to `path`, then renames it into place.
pub fn atomic_write(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Two-decimal rendering used by human-readable tables.
pub fn round2(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>, ExportError> {
    w.into_inner().map_err(|e| ExportError::Io(e.into_error()))
}

pub fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>, ExportError> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}

/// `window,count,score,gap_before`
pub fn window_scores_csv(scores: &[WindowScore]) -> Result<Vec<u8>, ExportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["window", "count", "score", "gap_before"])?;
    for s in scores {
        w.write_record([
            s.window.to_string(),
            s.count.to_string(),
            s.value().to_string(),
            s.gap_before.to_string(),
        ])?;
    }
    finish(w)
}

/// Long format `window,topic,count,score`.
pub fn topic_scores_csv(scores: &[WindowScore]) -> Result<Vec<u8>, ExportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["window", "topic", "count", "score"])?;
    for s in scores {
        for (topic, ts) in &s.topics {
            w.write_record([
                s.window.to_string(),
                topic.to_string(),
                ts.count.to_string(),
                ts.score.value().to_string(),
            ])?;
        }
    }
    finish(w)
}

/// Reads a `window,count,score[,gap_before]` file back into bare window scores.
///
/// Scores are parsed as exact decimals and then snapped to the nearest
/// `m / count` fraction when one is within 1e-9.
pub fn read_window_scores<R: Read>(input: R) -> Result<Vec<WindowScore>, ExportError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let missing = |name: &str| ExportError::BadRow {
        line: 1,
        reason: format!("missing column `{name}`"),
    };
    let window_col = col("window").ok_or_else(|| missing("window"))?;
    let score_col = col("score").ok_or_else(|| missing("score"))?;
    let count_col = col("count");
    let gap_col = col("gap_before");

    let mut out: Vec<WindowScore> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let bad = |reason: String| ExportError::BadRow { line, reason };
        let field = |i: usize| record.get(i).unwrap_or("");

        let window: usize = field(window_col)
            .parse()
            .map_err(|_| bad(format!("invalid window index `{}`", field(window_col))))?;
        let count: u64 = match count_col.map(field) {
            None | Some("") => 0,
            Some(c) => c.parse().map_err(|_| bad(format!("invalid count `{c}`")))?,
        };
        let score = Score::parse_decimal(field(score_col)).map_err(|e| bad(e.to_string()))?;
        if !(-1.0..=1.0).contains(&score.value()) {
            return Err(bad(format!("score {} outside [-1, 1]", score.value())));
        }
        let gap_before = match gap_col.map(field) {
            None | Some("") | Some("false") => false,
            Some("true") => true,
            Some(other) => return Err(bad(format!("invalid gap_before `{other}`"))),
        };
        if out.last().is_some_and(|prev| prev.window >= window) {
            return Err(bad("window indices must be strictly increasing".into()));
        }
        let mut ws = WindowScore::bare(window, count, score.snap_to_count(count));
        ws.gap_before = gap_before;
        out.push(ws);
    }
    Ok(out)
}

/// Before–after table `window,previous_score,current_score,delta`, two decimals.
pub fn before_after_csv(report: &AnomalyReport) -> Result<Vec<u8>, ExportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["window", "previous_score", "current_score", "delta"])?;
    for a in &report.anomalies {
        w.write_record([
            a.window.to_string(),
            round2(a.previous_score),
            round2(a.current_score),
            round2(a.delta),
        ])?;
    }
    finish(w)
}

/// `topic,anomalous_proportion,normal_proportion,anomalous_count,normal_count`
pub fn reason_distribution_csv(dist: &ReasonDistribution) -> Result<Vec<u8>, ExportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "topic",
        "anomalous_proportion",
        "normal_proportion",
        "anomalous_count",
        "normal_count",
    ])?;
    for r in &dist.rows {
        w.write_record([
            r.topic.to_string(),
            opt(r.anomalous_proportion),
            opt(r.normal_proportion),
            r.anomalous_count.to_string(),
            r.normal_count.to_string(),
        ])?;
    }
    finish(w)
}

/// Wide format: `topic` then one column per window index; empty cell = absent.
pub fn heatmap_csv(matrix: &HeatmapMatrix) -> Result<Vec<u8>, ExportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["topic".to_string()];
    header.extend(matrix.columns.iter().map(|c| c.to_string()));
    w.write_record(&header)?;
    for (topic, row) in matrix.rows.iter().zip(&matrix.cells) {
        let mut rec = vec![topic.to_string()];
        rec.extend(row.iter().map(|c| opt(*c)));
        w.write_record(&rec)?;
    }
    finish(w)
}

/// `topic,window,score`, one row per present point.
pub fn trajectories_csv(traj: &Trajectories) -> Result<Vec<u8>, ExportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["topic", "window", "score"])?;
    for series in &traj.series {
        for p in &series.points {
            w.write_record([series.topic.to_string(), p.window.to_string(), p.score.to_string()])?;
        }
    }
    finish(w)
}

/// `id,timestamp,text,label,score,topic`
pub fn scored_comments_csv(scored: &[ScoredComment]) -> Result<Vec<u8>, ExportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["id", "timestamp", "text", "label", "score", "topic"])?;
    for s in scored {
        w.write_record([
            s.comment.id.to_string(),
            render_timestamp(s.comment.timestamp_ms),
            s.comment.text.clone(),
            s.label.to_string(),
            s.score().to_string(),
            s.comment.topic.to_string(),
        ])?;
    }
    finish(w)
}

/// One JSON object per line: `{"line": .., "reason": ..}`.
pub fn row_errors_jsonl(errors: &[RowError]) -> Result<Vec<u8>, ExportError> {
    let mut out = Vec::new();
    for e in errors {
        serde_json::to_writer(&mut out, e)?;
        out.push(b'\n');
    }
    Ok(out)
}

//! End-to-end runs: ingest → score → window → aggregate → detect → report.
//!
//! [`run_batch`] processes a whole input and writes every selected artifact
//! atomically into the output directory. [`StreamProcessor`] consumes
//! comments in arrival order and emits a decision per completed window
//! through the [`OnlineDetector`].

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::aggregation::{aggregate_window, score_series, WindowScore};
use crate::detection::{
    delta_series, detect, AnomalyReport, Decision, OnlineDetector, ThresholdConfig, ThresholdConfigError,
};
use crate::export::{self, atomic_write, ExportError};
use crate::ingest::{self, Comment, Deduplicator, IngestError, IngestSummary, InputFormat, RawRecord, RowError, Topic};
use crate::reporting::{self, heatmap_matrix, reason_distribution, topic_trajectories, LabelFilter, TopicRequest};
use crate::scorer::{score_all, score_comment, MissingLabel, ScoredComment, ScorerMode};
use crate::windowing::{
    bucket_of, default_origin, segment, sort_by_time, PartialPolicy, Window, WindowBounds, WindowError, WindowMode,
    WindowSpec,
};

pub const SUMMARY_FILE: &str = "summary.json";
pub const INGEST_SUMMARY_FILE: &str = "ingest_summary.json";
pub const ROW_ERRORS_FILE: &str = "row_errors.jsonl";
pub const WINDOW_SCORES_FILE: &str = "window_scores.csv";
pub const TOPIC_SCORES_FILE: &str = "topic_scores.csv";
pub const ANOMALIES_FILE: &str = "anomalies.json";
pub const BEFORE_AFTER_FILE: &str = "before_after.csv";
pub const REASONS_FILE: &str = "reason_distribution.csv";
pub const HEATMAP_FILE: &str = "heatmap.csv";
pub const TRAJECTORIES_FILE: &str = "topic_trajectories.csv";
pub const TRAJECTORY_SVG_FILE: &str = "trajectory.svg";
pub const DELTA_SVG_FILE: &str = "delta.svg";
pub const EVENTS_FILE: &str = "events.jsonl";

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("output: cannot use `{path}`: {source}")]
    OutputDir { path: PathBuf, source: std::io::Error },
    #[error("ingest: {0}")]
    Ingest(#[from] IngestError),
    #[error("window: {0}")]
    Window(#[from] WindowError),
    #[error("report: {0}")]
    Report(String),
    #[error("write: {0}")]
    Export(#[from] ExportError),
}

impl From<ThresholdConfigError> for PipelineError {
    fn from(e: ThresholdConfigError) -> Self {
        PipelineError::Config(e.to_string())
    }
}

impl PipelineError {
    pub fn stage(&self) -> &'static str {
        match self {
            PipelineError::Config(_) => "config",
            PipelineError::OutputDir { .. } => "output",
            PipelineError::Ingest(_) => "ingest",
            PipelineError::Window(_) => "window",
            PipelineError::Report(_) => "report",
            PipelineError::Export(_) => "write",
        }
    }
}

/// Which optional artifacts to produce. Window scores, anomalies and
/// summaries are always written.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ReportSelection {
    pub reasons: bool,
    pub heatmap: bool,
    pub trajectories: bool,
    pub svg: bool,
}

impl Default for ReportSelection {
    fn default() -> Self {
        ReportSelection {
            reasons: true,
            heatmap: true,
            trajectories: true,
            svg: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub input: PathBuf,
    /// Inferred from the file extension when `None`.
    pub format: Option<InputFormat>,
    pub scorer: ScorerMode,
    pub window: WindowSpec,
    pub threshold: ThresholdConfig,
    pub reports: ReportSelection,
    pub label_filter: LabelFilter,
    pub topics: TopicRequest,
    pub include_unlabeled: bool,
    pub out_dir: PathBuf,
    /// Stream mode only: arrival-order slack before a warning is raised.
    pub out_of_order_tolerance_ms: i64,
}

impl PipelineConfig {
    pub fn new(input: impl Into<PathBuf>, out_dir: impl Into<PathBuf>) -> Self {
        PipelineConfig {
            input: input.into(),
            format: None,
            scorer: ScorerMode::Passthrough,
            window: WindowSpec::default(),
            threshold: ThresholdConfig::default(),
            reports: ReportSelection::default(),
            label_filter: LabelFilter::NegativeOnly,
            topics: TopicRequest::default(),
            include_unlabeled: false,
            out_dir: out_dir.into(),
            out_of_order_tolerance_ms: 0,
        }
    }

    pub fn resolved_format(&self) -> Result<InputFormat, PipelineError> {
        match self.format {
            Some(f) => Ok(f),
            None => Ok(InputFormat::from_path(&self.input)?),
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        self.window
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        self.threshold.validate()?;
        if self.out_of_order_tolerance_ms < 0 {
            return Err(PipelineError::Config(
                "out-of-order tolerance must be non-negative".into(),
            ));
        }
        self.resolved_format()?;
        Ok(())
    }

    fn echo(&self) -> ConfigEcho {
        ConfigEcho {
            input: self.input.display().to_string(),
            format: self.format,
            scorer: self.scorer.name(),
            window: self.window,
            threshold: self.threshold,
            reports: self.reports,
            label_filter: self.label_filter,
            topics: self.topics.clone(),
            include_unlabeled: self.include_unlabeled,
        }
    }
}

/// Configuration recorded in the run summary. The output directory is left
/// out so that runs into different directories produce identical summaries.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigEcho {
    pub input: String,
    pub format: Option<InputFormat>,
    pub scorer: &'static str,
    pub window: WindowSpec,
    pub threshold: ThresholdConfig,
    pub reports: ReportSelection,
    pub label_filter: LabelFilter,
    pub topics: TopicRequest,
    pub include_unlabeled: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub parsed: u64,
    pub accepted: u64,
    pub skipped: u64,
    pub duplicates: u64,
    /// Accepted comments the scorer could not label.
    pub unscored: u64,
    pub windows: usize,
    pub anomalies: usize,
    pub insufficient_data: bool,
    pub tau: Option<f64>,
    pub mu_delta: Option<f64>,
    pub sigma_delta: Option<f64>,
    pub warnings: Vec<String>,
    pub config_echo: ConfigEcho,
}

impl RunSummary {
    fn new(ingest: &IngestSummary, unscored: u64, windows: usize, report: &AnomalyReport, echo: ConfigEcho) -> Self {
        RunSummary {
            parsed: ingest.parsed,
            accepted: ingest.accepted,
            skipped: ingest.skipped,
            duplicates: ingest.duplicates,
            unscored,
            windows,
            anomalies: report.anomalies.len(),
            insufficient_data: report.insufficient_data,
            tau: report.tau,
            mu_delta: report.mu_delta,
            sigma_delta: report.sigma_delta,
            warnings: Vec::new(),
            config_echo: echo,
        }
    }
}

/// Creates the output directory and checks it accepts new files.
pub fn prepare_out_dir(dir: &Path) -> Result<(), PipelineError> {
    let wrap = |source| PipelineError::OutputDir {
        path: dir.to_path_buf(),
        source,
    };
    std::fs::create_dir_all(dir).map_err(wrap)?;
    tempfile::NamedTempFile::new_in(dir).map_err(wrap)?;
    Ok(())
}

pub fn write_artifact(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), PipelineError> {
    atomic_write(&dir.join(name), bytes).map_err(|e| PipelineError::Export(e.into()))
}

fn open_input(config: &PipelineConfig) -> Result<BufReader<File>, PipelineError> {
    let file = File::open(&config.input).map_err(IngestError::Io)?;
    Ok(BufReader::with_capacity(1 << 20, file))
}

/// Ingested, scored and time-sorted input, shared by the batch entry points.
pub struct Prepared {
    pub summary: IngestSummary,
    pub row_errors: Vec<RowError>,
    pub scored: Vec<ScoredComment>,
    pub unscored: Vec<MissingLabel>,
    /// Distinct topics among accepted comments, sorted by name.
    pub known_topics: Vec<Topic>,
}

/// Validates the config, then ingests and scores `config.input`.
pub fn prepare(config: &PipelineConfig) -> Result<Prepared, PipelineError> {
    config.validate()?;
    let format = config.resolved_format()?;
    let ingested = ingest::ingest(open_input(config)?, format)?;
    let mut known: Vec<Topic> = ingested.comments.iter().map(|c| c.topic.clone()).collect();
    known.sort();
    known.dedup();
    let (scored, unscored) = score_all(ingested.comments, &config.scorer);
    Ok(Prepared {
        summary: ingested.summary,
        row_errors: ingested.errors,
        scored: sort_by_time(scored),
        unscored,
        known_topics: known,
    })
}

/// Runs the full chain over `config.input` and writes all selected artifacts.
pub fn run_batch(config: &PipelineConfig) -> Result<RunSummary, PipelineError> {
    config.validate()?;
    prepare_out_dir(&config.out_dir)?;
    let prepared = prepare(config)?;

    let windows = segment(&prepared.scored, &config.window)?;
    let scores = score_series(&windows);
    let report = detect(&delta_series(&scores), &config.threshold);

    let dir = &config.out_dir;
    let mut summary = RunSummary::new(
        &prepared.summary,
        prepared.unscored.len() as u64,
        scores.len(),
        &report,
        config.echo(),
    );
    summary.warnings.extend(prepared.unscored.iter().map(|e| e.to_string()));

    write_artifact(dir, INGEST_SUMMARY_FILE, &export::to_json(&prepared.summary)?)?;
    write_artifact(dir, ROW_ERRORS_FILE, &export::row_errors_jsonl(&prepared.row_errors)?)?;
    write_artifact(dir, WINDOW_SCORES_FILE, &export::window_scores_csv(&scores)?)?;
    write_artifact(dir, TOPIC_SCORES_FILE, &export::topic_scores_csv(&scores)?)?;
    write_artifact(dir, ANOMALIES_FILE, &export::to_json(&report)?)?;
    write_artifact(dir, BEFORE_AFTER_FILE, &export::before_after_csv(&report)?)?;
    let warnings = write_diagnostics(config, &windows, &scores, &report, &prepared.known_topics)?;
    summary.warnings.extend(warnings);

    write_artifact(dir, SUMMARY_FILE, &export::to_json(&summary)?)?;
    Ok(summary)
}

/// Writes the selected topic reports and charts; returns report warnings.
pub fn write_diagnostics(
    config: &PipelineConfig,
    windows: &[Window<'_>],
    scores: &[WindowScore],
    report: &AnomalyReport,
    known_topics: &[Topic],
) -> Result<Vec<String>, PipelineError> {
    let dir = &config.out_dir;
    let mut warnings = Vec::new();
    if config.reports.reasons {
        let dist = reason_distribution(windows, report, config.label_filter);
        write_artifact(dir, REASONS_FILE, &export::reason_distribution_csv(&dist)?)?;
    }
    if config.reports.heatmap {
        let matrix = heatmap_matrix(scores, config.include_unlabeled);
        write_artifact(dir, HEATMAP_FILE, &export::heatmap_csv(&matrix)?)?;
    }
    if config.reports.trajectories {
        let request = match &config.topics {
            TopicRequest::All { .. } => TopicRequest::All {
                include_unlabeled: config.include_unlabeled,
            },
            other => other.clone(),
        };
        let traj =
            topic_trajectories(scores, &request, known_topics).map_err(|e| PipelineError::Report(e.to_string()))?;
        warnings.extend(traj.warnings.iter().cloned());
        write_artifact(dir, TRAJECTORIES_FILE, &export::trajectories_csv(&traj)?)?;
    }
    if config.reports.svg {
        write_svgs(dir, scores, report)?;
    }
    Ok(warnings)
}

/// Writes the trajectory and delta charts; skipped when there is nothing to plot.
pub fn write_svgs(dir: &Path, scores: &[WindowScore], report: &AnomalyReport) -> Result<(), PipelineError> {
    if scores.is_empty() {
        return Ok(());
    }
    let render_err = |e: reporting::RenderError| PipelineError::Report(e.to_string());
    let doc = reporting::render_trajectory_svg(scores, report).map_err(render_err)?;
    write_artifact(dir, TRAJECTORY_SVG_FILE, doc.as_bytes())?;
    if let Some(tau) = report.tau {
        let deltas = delta_series(scores);
        if !deltas.is_empty() {
            let doc = reporting::render_delta_svg(&deltas, tau).map_err(render_err)?;
            write_artifact(dir, DELTA_SVG_FILE, doc.as_bytes())?;
        }
    }
    Ok(())
}

/// Output of the streaming processor.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum StreamEvent {
    Window {
        window: usize,
        count: u64,
        score: f64,
        gap_before: bool,
        partial: bool,
        decision: Option<Decision>,
    },
    Warning {
        message: String,
    },
    RowError {
        line: u64,
        reason: String,
    },
}

impl StreamEvent {
    pub fn decision(&self) -> Option<&Decision> {
        match self {
            StreamEvent::Window { decision, .. } => decision.as_ref(),
            _ => None,
        }
    }
}

/// Incremental pipeline. Comments are processed strictly in arrival order;
/// a window closes when it is full (count mode) or when a comment from a
/// later bucket arrives (time mode).
pub struct StreamProcessor {
    spec: WindowSpec,
    scorer: ScorerMode,
    tolerance_ms: i64,
    detector: OnlineDetector,
    dedup: Deduplicator,
    buffer: Vec<ScoredComment>,
    scores: Vec<WindowScore>,
    summary: IngestSummary,
    unscored: u64,
    ordinal: usize,
    max_seen_ms: Option<i64>,
    origin_ms: Option<i64>,
    open_bucket: Option<i64>,
    last_closed_bucket: Option<i64>,
}

impl StreamProcessor {
    pub fn new(spec: WindowSpec, scorer: ScorerMode, threshold: ThresholdConfig, tolerance_ms: i64) -> Self {
        let origin_ms = match spec.mode {
            WindowMode::Time { origin_ms, .. } => origin_ms,
            WindowMode::Count { .. } => None,
        };
        StreamProcessor {
            spec,
            scorer,
            tolerance_ms,
            detector: OnlineDetector::new(threshold),
            dedup: Deduplicator::new(),
            buffer: Vec::new(),
            scores: Vec::new(),
            summary: IngestSummary::default(),
            unscored: 0,
            ordinal: 0,
            max_seen_ms: None,
            origin_ms,
            open_bucket: None,
            last_closed_bucket: None,
        }
    }

    /// Feeds one parsed (or structurally failed) input record.
    pub fn push_record(&mut self, record: Result<RawRecord, RowError>) -> Vec<StreamEvent> {
        self.summary.parsed += 1;
        match record.and_then(ingest::validate_and_build) {
            Ok(comment) => self.push_comment(comment),
            Err(e) => {
                self.summary.skipped += 1;
                vec![StreamEvent::RowError {
                    line: e.line,
                    reason: e.reason,
                }]
            }
        }
    }

    fn push_comment(&mut self, comment: Comment) -> Vec<StreamEvent> {
        let mut events = Vec::new();
        if !self.dedup.insert(&comment) {
            self.summary.duplicates += 1;
            return events;
        }
        self.summary.accepted += 1;
        let scored = match score_comment(comment, &self.scorer) {
            Ok(s) => s,
            Err((_, e)) => {
                self.unscored += 1;
                events.push(StreamEvent::Warning { message: e.to_string() });
                return events;
            }
        };

        let ts = scored.comment.timestamp_ms;
        if let Some(max) = self.max_seen_ms {
            if ts < max - self.tolerance_ms {
                events.push(StreamEvent::Warning {
                    message: format!(
                        "comment {} arrived out of order ({} ms behind the latest timestamp)",
                        scored.comment.id,
                        max - ts
                    ),
                });
            }
        }
        self.max_seen_ms = Some(self.max_seen_ms.map_or(ts, |m| m.max(ts)));

        match self.spec.mode {
            WindowMode::Count { size } => {
                self.buffer.push(scored);
                if self.buffer.len() == size {
                    events.extend(self.close_window(false));
                }
            }
            WindowMode::Time { duration_ms, .. } => {
                let origin = *self.origin_ms.get_or_insert_with(|| default_origin(ts));
                let bucket = bucket_of(ts, origin, duration_ms);
                match self.open_bucket {
                    Some(open) if bucket > open => {
                        events.extend(self.close_window(false));
                        self.open_bucket = Some(bucket);
                    }
                    Some(open) if bucket < open => events.push(StreamEvent::Warning {
                        message: format!(
                            "comment {} belongs to an already closed time bucket; kept in the open window",
                            scored.comment.id
                        ),
                    }),
                    Some(_) => {}
                    None => self.open_bucket = Some(bucket),
                }
                self.buffer.push(scored);
            }
        }
        events
    }

    fn close_window(&mut self, partial: bool) -> Option<StreamEvent> {
        if self.buffer.is_empty() {
            return None;
        }
        let index = self.scores.len();
        let (bounds, gap_before) = match self.spec.mode {
            WindowMode::Count { .. } => (
                WindowBounds::Count {
                    first_ordinal: self.ordinal,
                    last_ordinal: self.ordinal + self.buffer.len() - 1,
                },
                false,
            ),
            WindowMode::Time { duration_ms, .. } => {
                let bucket = self.open_bucket.expect("open bucket for buffered comments");
                let start_ms = self.origin_ms.expect("origin set") + bucket * duration_ms;
                let gap = self.last_closed_bucket.is_some_and(|b| bucket > b + 1);
                self.last_closed_bucket = Some(bucket);
                (
                    WindowBounds::Time {
                        start_ms,
                        end_ms: start_ms + duration_ms,
                    },
                    gap,
                )
            }
        };
        self.ordinal += self.buffer.len();
        let window = Window {
            index,
            members: &self.buffer,
            bounds,
            partial,
            gap_before,
        };
        let score = aggregate_window(&window);
        self.buffer.clear();
        let decision = self.detector.update(&score);
        let event = StreamEvent::Window {
            window: index,
            count: score.count,
            score: score.value(),
            gap_before,
            partial,
            decision,
        };
        self.scores.push(score);
        Some(event)
    }

    /// Flushes the open window (subject to the partial policy for count mode).
    pub fn finish(mut self) -> StreamOutcome {
        let mut events = Vec::new();
        let flush = match self.spec.mode {
            WindowMode::Count { .. } => self.spec.partial == PartialPolicy::Keep,
            WindowMode::Time { .. } => true,
        };
        if flush {
            let partial = matches!(self.spec.mode, WindowMode::Count { .. });
            events.extend(self.close_window(partial));
        }
        StreamOutcome {
            final_events: events,
            report: self.detector.report(),
            scores: self.scores,
            summary: self.summary,
            unscored: self.unscored,
        }
    }

    pub fn scores(&self) -> &[WindowScore] {
        &self.scores
    }
}

#[derive(Debug, Clone)]
pub struct StreamOutcome {
    /// Events produced while flushing the last open window.
    pub final_events: Vec<StreamEvent>,
    pub report: AnomalyReport,
    pub scores: Vec<WindowScore>,
    pub summary: IngestSummary,
    pub unscored: u64,
}

#[derive(Debug, Clone)]
pub struct StreamRun {
    pub events: Vec<StreamEvent>,
    pub outcome: StreamOutcome,
    pub summary: RunSummary,
}

/// Streams `config.input` through a [`StreamProcessor`] and writes the event
/// log plus the same score, anomaly and summary artifacts as a batch run.
pub fn run_stream(config: &PipelineConfig) -> Result<StreamRun, PipelineError> {
    config.validate()?;
    prepare_out_dir(&config.out_dir)?;
    let format = config.resolved_format()?;
    let records = ingest::parse_records(open_input(config)?, format)?;
    let mut events = Vec::new();
    let mut processor = StreamProcessor::new(
        config.window,
        config.scorer.clone(),
        config.threshold,
        config.out_of_order_tolerance_ms,
    );
    for item in records {
        events.extend(processor.push_record(item?));
    }
    let outcome = processor.finish();
    events.extend(outcome.final_events.iter().cloned());

    let mut summary = RunSummary::new(
        &outcome.summary,
        outcome.unscored,
        outcome.scores.len(),
        &outcome.report,
        config.echo(),
    );
    summary.warnings = events
        .iter()
        .filter_map(|e| match e {
            StreamEvent::Warning { message } => Some(message.clone()),
            _ => None,
        })
        .collect();

    let dir = &config.out_dir;
    let mut log = Vec::new();
    for e in &events {
        serde_json::to_writer(&mut log, e).map_err(ExportError::from)?;
        log.push(b'\n');
    }
    write_artifact(dir, EVENTS_FILE, &log)?;
    write_artifact(dir, INGEST_SUMMARY_FILE, &export::to_json(&outcome.summary)?)?;
    write_artifact(dir, WINDOW_SCORES_FILE, &export::window_scores_csv(&outcome.scores)?)?;
    write_artifact(dir, TOPIC_SCORES_FILE, &export::topic_scores_csv(&outcome.scores)?)?;
    write_artifact(dir, ANOMALIES_FILE, &export::to_json(&outcome.report)?)?;
    write_artifact(dir, BEFORE_AFTER_FILE, &export::before_after_csv(&outcome.report)?)?;
    if config.reports.svg {
        write_svgs(dir, &outcome.scores, &outcome.report)?;
    }
    write_artifact(dir, SUMMARY_FILE, &export::to_json(&summary)?)?;

    Ok(StreamRun {
        events,
        outcome,
        summary,
    })
}

mod args;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::Context;
use clap::Parser;

use sentidrift_core::detection::ThresholdConfig;
use sentidrift_core::export;
use sentidrift_core::ingest::{normalize_timestamp, InputFormat};
use sentidrift_core::pipeline::{self, PipelineConfig, ReportSelection, RunSummary};
use sentidrift_core::reporting::{LabelFilter, TopicRequest};
use sentidrift_core::scorer::{Lexicon, ScorerMode};
use sentidrift_core::synth::{self, SynthConfig};
use sentidrift_core::windowing::{segment, PartialPolicy, WindowMode, WindowSpec};
use sentidrift_core::{analyze, delta_series, score_series};

use args::*;

const EXIT_RUNTIME: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_ANOMALY: u8 = 3;

enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<pipeline::PipelineError> for Failure {
    fn from(e: pipeline::PipelineError) -> Self {
        match e {
            pipeline::PipelineError::Config(msg) => Failure::Usage(msg),
            other => Failure::Runtime(other.into()),
        }
    }
}

impl From<export::ExportError> for Failure {
    fn from(e: export::ExportError) -> Self {
        Failure::Runtime(e.into())
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n\nFor more information, try '--help'.");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}

struct Ui {
    quiet: bool,
}

impl Ui {
    fn note(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn warnings(&self, warnings: &[String]) {
        const SHOWN: usize = 10;
        for w in warnings.iter().take(SHOWN) {
            self.note(format!("warning: {w}"));
        }
        if warnings.len() > SHOWN {
            self.note(format!("warning: ... and {} more", warnings.len() - SHOWN));
        }
    }
}

fn dispatch(cli: &Cli) -> Result<u8, Failure> {
    let g = &cli.global;
    let ui = Ui { quiet: g.quiet };
    match &cli.command {
        Command::Run(a) => cmd_run(g, a, &ui),
        Command::Score(a) => cmd_score(g, a, &ui),
        Command::Windows(a) => cmd_windows(g, a, &ui),
        Command::Detect(a) => cmd_detect(g, a, &ui),
        Command::Report(a) => cmd_report(g, a, &ui),
        Command::Render(a) => cmd_render(g, a, &ui),
        Command::Synth(a) => cmd_synth(a, &ui),
    }
}

fn input(g: &GlobalArgs) -> Result<&Path, Failure> {
    g.input
        .as_deref()
        .ok_or_else(|| usage("the following required argument was not provided: --input <INPUT>"))
}

fn scorer_mode(a: &ScorerArgs) -> Result<ScorerMode, Failure> {
    Ok(match a.scorer {
        ScorerArg::Passthrough => ScorerMode::Passthrough,
        ScorerArg::Lexicon => {
            let lexicon = match &a.lexicon {
                Some(path) => Lexicon::load(path).with_context(|| format!("lexicon {}", path.display()))?,
                None => Lexicon::builtin(),
            };
            ScorerMode::Lexicon(Arc::new(lexicon))
        }
    })
}

fn window_spec(a: &WindowArgs) -> Result<WindowSpec, Failure> {
    let partial = match a.partial {
        PartialArg::Drop => PartialPolicy::Drop,
        PartialArg::Keep => PartialPolicy::Keep,
    };
    let spec = match a.window_mode {
        WindowModeArg::Count => WindowSpec::count(a.window_size as usize),
        WindowModeArg::Time => {
            let duration_ms =
                i64::try_from(a.window_duration.as_millis()).map_err(|_| usage("--window-duration is too large"))?;
            if duration_ms < 1 {
                return Err(usage("--window-duration must be at least 1ms"));
            }
            let origin_ms = match &a.origin {
                Some(raw) => Some(normalize_timestamp(raw).map_err(|e| usage(format!("--origin: {e}")))?),
                None => None,
            };
            WindowSpec {
                mode: WindowMode::Time { duration_ms, origin_ms },
                partial,
            }
        }
    };
    Ok(spec.with_partial(partial))
}

fn threshold_config(a: &ThresholdArgs) -> ThresholdConfig {
    let mut cfg = ThresholdConfig::new(a.alpha);
    if let Some(tau) = a.threshold_override {
        cfg = cfg.with_override(tau);
    }
    if let Some(n) = a.history {
        cfg = cfg.with_history(n as usize);
    }
    cfg
}

fn topic_options(cfg: &mut PipelineConfig, a: &TopicArgs) {
    cfg.label_filter = if a.all_labels {
        LabelFilter::All
    } else {
        LabelFilter::NegativeOnly
    };
    cfg.include_unlabeled = a.include_unlabeled;
    cfg.topics = if a.topics.is_empty() {
        TopicRequest::All {
            include_unlabeled: a.include_unlabeled,
        }
    } else {
        TopicRequest::Only(a.topics.clone())
    };
}

fn base_config(g: &GlobalArgs) -> Result<PipelineConfig, Failure> {
    let mut cfg = PipelineConfig::new(input(g)?, &g.out);
    cfg.format = g.format.map(|f| match f {
        FormatArg::Csv => InputFormat::Csv,
        FormatArg::Jsonl => InputFormat::Jsonl,
    });
    Ok(cfg)
}

fn report_summary(ui: &Ui, s: &RunSummary, out: &Path) {
    ui.warnings(&s.warnings);
    let tau = s.tau.map(|t| format!("{t:.4}")).unwrap_or_else(|| "n/a".into());
    ui.note(format!(
        "accepted {} of {} rows ({} skipped, {} duplicates); {} windows, {} anomalies, tau = {}",
        s.accepted, s.parsed, s.skipped, s.duplicates, s.windows, s.anomalies, tau
    ));
    if s.insufficient_data {
        ui.note("insufficient data: at least two windows are needed for detection");
    }
    ui.note(format!("artifacts written to {}", out.display()));
}

fn cmd_run(g: &GlobalArgs, a: &RunArgs, ui: &Ui) -> Result<u8, Failure> {
    let mut cfg = base_config(g)?;
    cfg.scorer = scorer_mode(&a.scorer)?;
    cfg.window = window_spec(&a.window)?;
    cfg.threshold = threshold_config(&a.threshold);
    topic_options(&mut cfg, &a.topics);
    cfg.reports = ReportSelection {
        reasons: !a.skip.contains(&ReportKind::Reasons),
        heatmap: !a.skip.contains(&ReportKind::Heatmap),
        trajectories: !a.skip.contains(&ReportKind::Trajectories),
        svg: !a.skip.contains(&ReportKind::Svg),
    };
    cfg.out_of_order_tolerance_ms = i64::try_from(a.out_of_order_tolerance.as_millis())
        .map_err(|_| usage("--out-of-order-tolerance is too large"))?;

    let summary = if a.stream {
        pipeline::run_stream(&cfg)?.summary
    } else {
        pipeline::run_batch(&cfg)?
    };
    report_summary(ui, &summary, &g.out);
    Ok(0)
}

fn cmd_score(g: &GlobalArgs, a: &ScoreArgs, ui: &Ui) -> Result<u8, Failure> {
    let mut cfg = base_config(g)?;
    cfg.scorer = scorer_mode(&a.scorer)?;
    cfg.validate()?;
    pipeline::prepare_out_dir(&g.out)?;
    let prepared = pipeline::prepare(&cfg)?;
    let dir = &g.out;
    pipeline::write_artifact(
        dir,
        "scored_comments.csv",
        &export::scored_comments_csv(&prepared.scored)?,
    )?;
    pipeline::write_artifact(dir, pipeline::INGEST_SUMMARY_FILE, &export::to_json(&prepared.summary)?)?;
    pipeline::write_artifact(
        dir,
        pipeline::ROW_ERRORS_FILE,
        &export::row_errors_jsonl(&prepared.row_errors)?,
    )?;
    let warnings: Vec<String> = prepared.unscored.iter().map(|m| m.to_string()).collect();
    ui.warnings(&warnings);
    ui.note(format!(
        "scored {} comments ({} skipped rows, {} duplicates, {} unscored)",
        prepared.scored.len(),
        prepared.summary.skipped,
        prepared.summary.duplicates,
        prepared.unscored.len()
    ));
    Ok(0)
}

fn cmd_windows(g: &GlobalArgs, a: &WindowsArgs, ui: &Ui) -> Result<u8, Failure> {
    let mut cfg = base_config(g)?;
    cfg.scorer = scorer_mode(&a.scorer)?;
    cfg.window = window_spec(&a.window)?;
    cfg.validate()?;
    pipeline::prepare_out_dir(&g.out)?;
    let prepared = pipeline::prepare(&cfg)?;
    let windows = segment(&prepared.scored, &cfg.window).map_err(pipeline::PipelineError::from)?;
    let scores = score_series(&windows);
    pipeline::write_artifact(
        &g.out,
        pipeline::WINDOW_SCORES_FILE,
        &export::window_scores_csv(&scores)?,
    )?;
    pipeline::write_artifact(&g.out, pipeline::TOPIC_SCORES_FILE, &export::topic_scores_csv(&scores)?)?;
    ui.note(format!(
        "{} windows from {} scored comments",
        scores.len(),
        prepared.scored.len()
    ));
    Ok(0)
}

fn read_scores(g: &GlobalArgs) -> Result<Vec<sentidrift_core::WindowScore>, Failure> {
    if matches!(g.format, Some(FormatArg::Jsonl)) {
        return Err(usage("window score input must be CSV"));
    }
    let path = input(g)?;
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let scores = export::read_window_scores(std::io::BufReader::new(file))
        .with_context(|| format!("reading {}", path.display()))?;
    Ok(scores)
}

fn cmd_detect(g: &GlobalArgs, a: &DetectArgs, ui: &Ui) -> Result<u8, Failure> {
    let cfg = threshold_config(&a.threshold);
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    pipeline::prepare_out_dir(&g.out)?;
    let scores = read_scores(g)?;
    let report = analyze(&scores, &cfg);
    let table = export::before_after_csv(&report)?;
    pipeline::write_artifact(&g.out, pipeline::ANOMALIES_FILE, &export::to_json(&report)?)?;
    pipeline::write_artifact(&g.out, pipeline::BEFORE_AFTER_FILE, &table)?;

    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    lock.write_all(&table).context("writing to stdout")?;
    lock.flush().context("writing to stdout")?;

    if report.insufficient_data {
        ui.note("insufficient data: at least two windows are needed for detection");
    } else {
        ui.note(format!(
            "{} windows, {} anomalies, tau = {:.4}",
            scores.len(),
            report.anomalies.len(),
            report.tau.unwrap_or(f64::NAN)
        ));
    }
    if a.fail_on_anomaly && !report.anomalies.is_empty() {
        return Ok(EXIT_ANOMALY);
    }
    Ok(0)
}

fn cmd_report(g: &GlobalArgs, a: &ReportArgs, ui: &Ui) -> Result<u8, Failure> {
    let mut cfg = base_config(g)?;
    cfg.scorer = scorer_mode(&a.scorer)?;
    cfg.window = window_spec(&a.window)?;
    cfg.threshold = threshold_config(&a.threshold);
    topic_options(&mut cfg, &a.topics);
    cfg.reports.svg = false;
    cfg.validate()?;
    pipeline::prepare_out_dir(&g.out)?;
    let prepared = pipeline::prepare(&cfg)?;
    let windows = segment(&prepared.scored, &cfg.window).map_err(pipeline::PipelineError::from)?;
    let scores = score_series(&windows);
    let report = analyze(&scores, &cfg.threshold);
    let warnings = pipeline::write_diagnostics(&cfg, &windows, &scores, &report, &prepared.known_topics)?;
    ui.warnings(&warnings);
    ui.note(format!(
        "{} windows, {} anomalies; reports written to {}",
        scores.len(),
        report.anomalies.len(),
        g.out.display()
    ));
    Ok(0)
}

fn cmd_render(g: &GlobalArgs, a: &RenderArgs, ui: &Ui) -> Result<u8, Failure> {
    let cfg = threshold_config(&a.threshold);
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    pipeline::prepare_out_dir(&g.out)?;
    let scores = read_scores(g)?;
    if scores.is_empty() {
        return Err(Failure::Runtime(anyhow::anyhow!("no window scores to render")));
    }
    let report = analyze(&scores, &cfg);
    pipeline::write_svgs(&g.out, &scores, &report)?;
    let rendered = if report.tau.is_some() && !delta_series(&scores).is_empty() {
        "trajectory.svg and delta.svg"
    } else {
        "trajectory.svg"
    };
    ui.note(format!("wrote {rendered} to {}", g.out.display()));
    Ok(0)
}

fn cmd_synth(a: &SynthArgs, ui: &Ui) -> Result<u8, Failure> {
    let cfg = SynthConfig {
        count: a.count,
        seed: a.seed,
        ..SynthConfig::default()
    };
    let written = match &a.output {
        Some(path) => write_synth(path, cfg)?,
        None => {
            let stdout = std::io::stdout();
            synth::write_csv(BufWriter::new(stdout.lock()), cfg).context("writing to stdout")?
        }
    };
    ui.note(format!("generated {written} comments (seed {})", a.seed));
    Ok(0)
}

fn write_synth(path: &Path, cfg: SynthConfig) -> anyhow::Result<usize> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(synth::write_csv(BufWriter::with_capacity(1 << 20, file), cfg)?)
}

use std::path::PathBuf;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "sentidrift",
    version,
    about = "Window-level sentiment series and downward-shift detection"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Input file (comments for run/score/windows/report, window scores for detect/render)
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    /// Input format; inferred from the extension when omitted
    #[arg(long, global = true, value_enum)]
    pub format: Option<FormatArg>,
    /// Output directory
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Suppress progress and summary messages on stderr
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Full pipeline: ingest, score, window, aggregate, detect, report
    Run(RunArgs),
    /// Ingest and score comments; writes scored_comments.csv
    Score(ScoreArgs),
    /// Ingest, score and aggregate into windows; writes window and topic scores
    Windows(WindowsArgs),
    /// Detect downward shifts in a window score CSV (`window,count,score`)
    Detect(DetectArgs),
    /// Topic reports (reason distribution, heatmap, trajectories) from comments
    Report(ReportArgs),
    /// Render trajectory and delta SVG charts from a window score CSV
    Render(RenderArgs),
    /// Generate a seeded synthetic comment corpus
    #[command(hide = true)]
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Csv,
    Jsonl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScorerArg {
    Passthrough,
    Lexicon,
}

#[derive(Debug, Args)]
pub struct ScorerArgs {
    /// Scoring mode
    #[arg(long, value_enum, default_value_t = ScorerArg::Passthrough)]
    pub scorer: ScorerArg,
    /// Lexicon file for the lexicon scorer (built-in lexicon when unset)
    #[arg(long, env = "SENTIDRIFT_LEXICON")]
    pub lexicon: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WindowModeArg {
    Count,
    Time,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PartialArg {
    Drop,
    Keep,
}

#[derive(Debug, Args)]
pub struct WindowArgs {
    /// Windowing mode
    #[arg(long, value_enum, default_value_t = WindowModeArg::Count)]
    pub window_mode: WindowModeArg,
    /// Comments per window (count mode)
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    pub window_size: u64,
    /// Window length for time mode, e.g. 1d, 6h, 30m
    #[arg(long, default_value = "1d", value_parser = parse_duration)]
    pub window_duration: Duration,
    /// Bucket origin for time mode (RFC 3339 or epoch); UTC midnight of the first comment when unset
    #[arg(long)]
    pub origin: Option<String>,
    /// What to do with a trailing window smaller than --window-size
    #[arg(long, value_enum, default_value_t = PartialArg::Drop)]
    pub partial: PartialArg,
}

#[derive(Debug, Args)]
pub struct ThresholdArgs {
    /// Threshold multiplier: tau = mean(delta) - alpha * std(delta)
    #[arg(long, default_value_t = 1.5, value_parser = parse_alpha)]
    pub alpha: f64,
    /// Use this tau instead of computing it from the delta series
    #[arg(long, allow_negative_numbers = true, value_parser = parse_finite)]
    pub threshold_override: Option<f64>,
    /// Compute tau from only the N most recent deltas before each window
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub history: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportKind {
    Reasons,
    Heatmap,
    Trajectories,
    Svg,
}

#[derive(Debug, Args)]
pub struct TopicArgs {
    /// Count every label in the reason distribution, not only negative comments
    #[arg(long)]
    pub all_labels: bool,
    /// Comma-separated topics for trajectories (all topics when unset)
    #[arg(long, value_delimiter = ',')]
    pub topics: Vec<String>,
    /// Include comments without a topic in heatmap and trajectories
    #[arg(long)]
    pub include_unlabeled: bool,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub scorer: ScorerArgs,
    #[command(flatten)]
    pub window: WindowArgs,
    #[command(flatten)]
    pub threshold: ThresholdArgs,
    #[command(flatten)]
    pub topics: TopicArgs,
    /// Reports to skip (comma-separated)
    #[arg(long, value_enum, value_delimiter = ',')]
    pub skip: Vec<ReportKind>,
    /// Process comments in arrival order with the online detector; writes events.jsonl
    #[arg(long)]
    pub stream: bool,
    /// Stream mode: how far behind the latest timestamp a comment may arrive without a warning
    #[arg(long, default_value = "0s", value_parser = parse_duration)]
    pub out_of_order_tolerance: Duration,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub scorer: ScorerArgs,
}

#[derive(Debug, Args)]
pub struct WindowsArgs {
    #[command(flatten)]
    pub scorer: ScorerArgs,
    #[command(flatten)]
    pub window: WindowArgs,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[command(flatten)]
    pub threshold: ThresholdArgs,
    /// Exit with status 3 when at least one window is flagged
    #[arg(long)]
    pub fail_on_anomaly: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[command(flatten)]
    pub scorer: ScorerArgs,
    #[command(flatten)]
    pub window: WindowArgs,
    #[command(flatten)]
    pub threshold: ThresholdArgs,
    #[command(flatten)]
    pub topics: TopicArgs,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[command(flatten)]
    pub threshold: ThresholdArgs,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Number of comments
    #[arg(long, default_value_t = 10_000)]
    pub count: usize,
    /// RNG seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV path (stdout when unset)
    #[arg(long)]
    pub output: Option<PathBuf>,
}

fn parse_duration(raw: &str) -> Result<Duration, String> {
    humantime::parse_duration(raw).map_err(|e| e.to_string())
}

fn parse_finite(raw: &str) -> Result<f64, String> {
    let v: f64 = raw.parse().map_err(|_| format!("`{raw}` is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err("value must be finite".into())
    }
}

fn parse_alpha(raw: &str) -> Result<f64, String> {
    let v = parse_finite(raw)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err("alpha must be positive".into())
    }
}

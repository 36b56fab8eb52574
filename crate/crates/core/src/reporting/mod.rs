//! Diagnostic views over scored windows: complaint-topic distributions in
//! anomalous versus normal windows, per-topic trajectories, the topic×window
//! heatmap, and SVG charts.

pub mod svg;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::aggregation::{topics_by_volume, WindowScore};
use crate::detection::AnomalyReport;
use crate::ingest::Topic;
use crate::scorer::SentimentLabel;
use crate::windowing::Window;

pub use svg::{render_delta_svg, render_trajectory_svg, RenderError};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelFilter {
    #[default]
    NegativeOnly,
    All,
}

impl LabelFilter {
    fn accepts(self, label: SentimentLabel) -> bool {
        match self {
            LabelFilter::NegativeOnly => label == SentimentLabel::Negative,
            LabelFilter::All => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReasonRow {
    pub topic: Topic,
    pub anomalous_count: u64,
    pub normal_count: u64,
    /// `None` when no anomalous window holds a matching comment.
    pub anomalous_proportion: Option<f64>,
    pub normal_proportion: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ReasonDistribution {
    pub rows: Vec<ReasonRow>,
    pub anomalous_comment_count: u64,
    pub normal_comment_count: u64,
}

impl ReasonDistribution {
    pub fn row(&self, topic: &str) -> Option<&ReasonRow> {
        self.rows.iter().find(|r| r.topic.as_str() == topic)
    }
}

/// Per-topic share of (by default negative) comments inside flagged windows
/// versus all other windows.
pub fn reason_distribution(windows: &[Window<'_>], report: &AnomalyReport, filter: LabelFilter) -> ReasonDistribution {
    let mut counts: BTreeMap<&Topic, (u64, u64)> = BTreeMap::new();
    let mut anomalous_total = 0;
    let mut normal_total = 0;
    for window in windows {
        let flagged = report.is_flagged(window.index);
        for m in window.members.iter().filter(|m| filter.accepts(m.label)) {
            let entry = counts.entry(&m.comment.topic).or_default();
            if flagged {
                entry.0 += 1;
                anomalous_total += 1;
            } else {
                entry.1 += 1;
                normal_total += 1;
            }
        }
    }

    let share = |n: u64, total: u64| (total > 0).then(|| n as f64 / total as f64);
    let mut rows: Vec<ReasonRow> = counts
        .into_iter()
        .map(|(topic, (a, n))| ReasonRow {
            topic: topic.clone(),
            anomalous_count: a,
            normal_count: n,
            anomalous_proportion: share(a, anomalous_total),
            normal_proportion: share(n, normal_total),
        })
        .collect();
    rows.sort_by(|x, y| {
        (y.anomalous_count + y.normal_count)
            .cmp(&(x.anomalous_count + x.normal_count))
            .then_with(|| x.topic.cmp(&y.topic))
    });

    ReasonDistribution {
        rows,
        anomalous_comment_count: anomalous_total,
        normal_comment_count: normal_total,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum TopicRequest {
    /// Every topic seen in the windows, by volume.
    All {
        include_unlabeled: bool,
    },
    Only(Vec<String>),
}

impl Default for TopicRequest {
    fn default() -> Self {
        TopicRequest::All {
            include_unlabeled: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown topic `{requested}`; known topics: {}", known.join(", "))]
pub struct UnknownTopic {
    pub requested: String,
    pub known: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub window: usize,
    pub score: f64,
}

/// Points only exist for windows containing the topic; missing windows are gaps.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopicTrajectory {
    pub topic: Topic,
    pub points: Vec<TrajectoryPoint>,
}

impl TopicTrajectory {
    /// Values aligned to `windows`, `None` where the topic is absent.
    pub fn dense(&self, windows: &[usize]) -> Vec<Option<f64>> {
        let by_window: BTreeMap<usize, f64> = self.points.iter().map(|p| (p.window, p.score)).collect();
        windows.iter().map(|w| by_window.get(w).copied()).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Trajectories {
    pub series: Vec<TopicTrajectory>,
    pub warnings: Vec<String>,
}

/// Per-topic score series. `known` lists topics that exist in the data even
/// if no emitted window contains them.
pub fn topic_trajectories(
    scores: &[WindowScore],
    request: &TopicRequest,
    known: &[Topic],
) -> Result<Trajectories, UnknownTopic> {
    let by_volume = topics_by_volume(scores);
    let topics: Vec<Topic> = match request {
        TopicRequest::All { include_unlabeled } => by_volume
            .into_iter()
            .map(|(t, _)| t)
            .filter(|t| *include_unlabeled || !t.is_unlabeled())
            .collect(),
        TopicRequest::Only(names) => {
            let all: BTreeSet<&Topic> = known.iter().chain(by_volume.iter().map(|(t, _)| t)).collect();
            names
                .iter()
                .map(|name| {
                    let topic = Topic::new(name);
                    if all.contains(&topic) {
                        Ok(topic)
                    } else {
                        Err(UnknownTopic {
                            requested: name.clone(),
                            known: all.iter().map(|t| t.to_string()).collect(),
                        })
                    }
                })
                .collect::<Result<_, _>>()?
        }
    };

    let mut out = Trajectories::default();
    for topic in topics {
        let points: Vec<TrajectoryPoint> = scores
            .iter()
            .filter_map(|ws| {
                ws.topic_value(&topic).map(|score| TrajectoryPoint {
                    window: ws.window,
                    score,
                })
            })
            .collect();
        if points.is_empty() {
            out.warnings
                .push(format!("topic `{topic}` does not occur in any emitted window"));
        }
        out.series.push(TopicTrajectory { topic, points });
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct HeatmapMatrix {
    pub rows: Vec<Topic>,
    pub columns: Vec<usize>,
    /// `cells[row][col]`, `None` where the topic is absent from the window.
    pub cells: Vec<Vec<Option<f64>>>,
}

impl HeatmapMatrix {
    pub fn cell(&self, topic: &Topic, window: usize) -> Option<f64> {
        let r = self.rows.iter().position(|t| t == topic)?;
        let c = self.columns.iter().position(|w| *w == window)?;
        self.cells[r][c]
    }
}

/// Topics (rows, by descending volume) × windows (columns, by index).
pub fn heatmap_matrix(scores: &[WindowScore], include_unlabeled: bool) -> HeatmapMatrix {
    let rows: Vec<Topic> = topics_by_volume(scores)
        .into_iter()
        .map(|(t, _)| t)
        .filter(|t| include_unlabeled || !t.is_unlabeled())
        .collect();
    let columns: Vec<usize> = scores.iter().map(|ws| ws.window).collect();
    let cells = rows
        .iter()
        .map(|topic| scores.iter().map(|ws| ws.topic_value(topic)).collect())
        .collect();
    HeatmapMatrix { rows, columns, cells }
}

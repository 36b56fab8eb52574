//! Standalone SVG line charts on a fixed 960×480 canvas.
//!
//! Output depends only on the input values; coordinates are printed with two
//! decimals so identical inputs give byte-identical documents.

use std::fmt::Write;

use crate::aggregation::WindowScore;
use crate::detection::{AnomalyReport, DeltaSeries};

pub const WIDTH: f64 = 960.0;
pub const HEIGHT: f64 = 480.0;

const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 48.0;
const Y_TICKS: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RenderError {
    #[error("nothing to plot: the window score series is empty")]
    NoScores,
    #[error("nothing to plot: the delta series is empty")]
    NoDeltas,
}

/// Affine map from a value domain onto a pixel range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearScale {
    pub domain: (f64, f64),
    pub range: (f64, f64),
}

impl LinearScale {
    pub fn apply(&self, v: f64) -> f64 {
        let (d0, d1) = self.domain;
        let (r0, r1) = self.range;
        r0 + (v - d0) / (d1 - d0) * (r1 - r0)
    }

    pub fn invert(&self, px: f64) -> f64 {
        let (d0, d1) = self.domain;
        let (r0, r1) = self.range;
        d0 + (px - r0) / (r1 - r0) * (d1 - d0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartLayout {
    pub x: LinearScale,
    pub y: LinearScale,
}

impl ChartLayout {
    fn new(x_domain: (f64, f64), values: impl Iterator<Item = f64>) -> Self {
        let (mut lo, mut hi) = values.fold((0.0f64, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
        let pad = ((hi - lo) * 0.05).max(0.05);
        lo -= pad;
        hi += pad;
        let (x0, x1) = if x_domain.0 == x_domain.1 {
            (x_domain.0 - 1.0, x_domain.1 + 1.0)
        } else {
            x_domain
        };
        ChartLayout {
            x: LinearScale {
                domain: (x0, x1),
                range: (MARGIN_LEFT, WIDTH - MARGIN_RIGHT),
            },
            y: LinearScale {
                domain: (lo, hi),
                range: (HEIGHT - MARGIN_BOTTOM, MARGIN_TOP),
            },
        }
    }

    fn left(&self) -> f64 {
        self.x.range.0
    }

    fn right(&self) -> f64 {
        self.x.range.1
    }

    fn top(&self) -> f64 {
        self.y.range.1
    }

    fn bottom(&self) -> f64 {
        self.y.range.0
    }
}

pub fn trajectory_layout(scores: &[WindowScore]) -> Option<ChartLayout> {
    let first = scores.first()?.window as f64;
    let last = scores.last()?.window as f64;
    Some(ChartLayout::new((first, last), scores.iter().map(|s| s.value())))
}

pub fn delta_layout(deltas: &DeltaSeries, tau: f64) -> Option<ChartLayout> {
    let first = deltas.deltas.first()?.window as f64;
    let last = deltas.deltas.last()?.window as f64;
    Some(ChartLayout::new((first, last), deltas.values().chain([tau])))
}

fn num(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".to_string()
    } else {
        s
    }
}

fn header(out: &mut String, title: &str) {
    let _ = write!(
        out,
        concat!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 960 480\" width=\"960\" height=\"480\" ",
            "font-family=\"sans-serif\" font-size=\"12\">\n",
            "<rect width=\"960\" height=\"480\" fill=\"white\"/>\n",
            "<text x=\"480\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">{}</text>\n"
        ),
        title
    );
}

fn axes(out: &mut String, layout: &ChartLayout, x_label: &str, y_label: &str) {
    let (l, r, t, b) = (layout.left(), layout.right(), layout.top(), layout.bottom());
    let _ = writeln!(
        out,
        "<line class=\"axis\" x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
        num(l),
        num(b),
        num(r),
        num(b)
    );
    let _ = writeln!(
        out,
        "<line class=\"axis\" x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
        num(l),
        num(t),
        num(l),
        num(b)
    );
    let (lo, hi) = layout.y.domain;
    for i in 0..Y_TICKS {
        let v = lo + (hi - lo) * i as f64 / (Y_TICKS - 1) as f64;
        let y = layout.y.apply(v);
        let _ = writeln!(
            out,
            "<text class=\"tick\" x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>",
            num(l - 6.0),
            num(y + 4.0),
            num(v)
        );
    }
    let (x0, x1) = layout.x.domain;
    for v in [x0, x1] {
        let _ = writeln!(
            out,
            "<text class=\"tick\" x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
            num(layout.x.apply(v)),
            num(b + 16.0),
            v.round() as i64
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
        num((l + r) / 2.0),
        num(HEIGHT - 10.0),
        x_label
    );
    let _ = writeln!(
        out,
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>",
        num((t + b) / 2.0),
        num((t + b) / 2.0),
        y_label
    );
}

fn hline(out: &mut String, layout: &ChartLayout, class: &str, value: f64, stroke: &str) {
    let y = num(layout.y.apply(value));
    let _ = writeln!(
        out,
        "<line class=\"{class}\" x1=\"{}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"{stroke}\" stroke-dasharray=\"4 4\"/>",
        num(layout.left()),
        num(layout.right()),
    );
}

/// Window score line with flagged windows marked in red and a reference line at 0.
pub fn render_trajectory_svg(scores: &[WindowScore], report: &AnomalyReport) -> Result<String, RenderError> {
    let layout = trajectory_layout(scores).ok_or(RenderError::NoScores)?;
    let mut out = String::with_capacity(256 + scores.len() * 16);
    header(&mut out, "Aggregated sentiment by window");
    axes(&mut out, &layout, "window", "sentiment score");
    hline(&mut out, &layout, "zero-line", 0.0, "#888888");

    out.push_str("<polyline class=\"series\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"");
    for (i, s) in scores.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(
            out,
            "{},{}",
            num(layout.x.apply(s.window as f64)),
            num(layout.y.apply(s.value()))
        );
    }
    out.push_str("\"/>\n");

    for s in scores.iter().filter(|s| report.is_flagged(s.window)) {
        let _ = writeln!(
            out,
            "<circle class=\"anomaly\" cx=\"{}\" cy=\"{}\" r=\"4\" fill=\"#d62728\"><title>window {}</title></circle>",
            num(layout.x.apply(s.window as f64)),
            num(layout.y.apply(s.value())),
            s.window
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Per-window change spikes with the detection threshold drawn at `tau`.
pub fn render_delta_svg(deltas: &DeltaSeries, tau: f64) -> Result<String, RenderError> {
    let layout = delta_layout(deltas, tau).ok_or(RenderError::NoDeltas)?;
    let mut out = String::with_capacity(256 + deltas.len() * 96);
    header(&mut out, "Window-to-window sentiment change");
    axes(&mut out, &layout, "window", "change in score");
    hline(&mut out, &layout, "zero-line", 0.0, "#888888");

    let y0 = num(layout.y.apply(0.0));
    for d in &deltas.deltas {
        let x = num(layout.x.apply(d.window as f64));
        let _ = writeln!(
            out,
            "<line class=\"delta\" x1=\"{x}\" y1=\"{y0}\" x2=\"{x}\" y2=\"{}\" stroke=\"#1f77b4\"/>",
            num(layout.y.apply(d.delta))
        );
    }

    hline(&mut out, &layout, "threshold", tau, "#d62728");
    let _ = writeln!(
        out,
        "<text class=\"threshold-label\" x=\"{}\" y=\"{}\" text-anchor=\"end\" fill=\"#d62728\">τ = {tau:.4}</text>",
        num(layout.right()),
        num(layout.y.apply(tau) - 4.0)
    );

    for d in deltas.deltas.iter().filter(|d| d.delta < tau) {
        let _ = writeln!(
            out,
            "<circle class=\"crossing\" cx=\"{}\" cy=\"{}\" r=\"4\" fill=\"#d62728\"><title>window {}</title></circle>",
            num(layout.x.apply(d.window as f64)),
            num(layout.y.apply(d.delta)),
            d.window
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

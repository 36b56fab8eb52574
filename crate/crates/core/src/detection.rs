//! Change-based anomaly detection on window score series.
//!
//! A window is anomalous when its first-order difference falls strictly
//! below `τ = μ − α·σ`, where `μ` and `σ` are the mean and population
//! standard deviation of the historical differences. The batch detector and
//! the [`OnlineDetector`] fold the differences through the same
//! [`RunningStats`] accumulator in the same order, so the online decision for
//! every window is bit-identical to a batch run on the corresponding prefix.

use serde::{Deserialize, Serialize};

use crate::aggregation::{Score, WindowScore};

pub const DEFAULT_ALPHA: f64 = 1.5;

/// Welford accumulator over a sequence of values.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunningStats {
    count: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, value: f64) {
        self.count += 1;
        let prev_mean = self.mean;
        self.mean += (value - prev_mean) / self.count as f64;
        self.m2 += (value - prev_mean) * (value - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Population (divide-by-n) variance; zero for fewer than one value.
    pub fn population_variance(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.m2 / self.count as f64).max(0.0)
        }
    }

    pub fn population_std(&self) -> f64 {
        self.population_variance().sqrt()
    }
}

impl FromIterator<f64> for RunningStats {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut stats = RunningStats::new();
        for v in iter {
            stats.push(v);
        }
        stats
    }
}

/// Change between two consecutive emitted windows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Delta {
    pub window: usize,
    pub previous: Score,
    pub current: Score,
    /// `current − previous`, computed exactly and rounded once.
    pub delta: f64,
    /// One or more empty time buckets separate the two windows.
    pub gap_before: bool,
}

impl Delta {
    pub fn between(previous: &WindowScore, current: &WindowScore) -> Self {
        Delta {
            window: current.window,
            previous: previous.score,
            current: current.score,
            delta: (current.score - previous.score).value(),
            gap_before: current.gap_before,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DeltaSeries {
    pub deltas: Vec<Delta>,
    pub source_len: usize,
}

impl DeltaSeries {
    pub fn len(&self) -> usize {
        self.deltas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty()
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.deltas.iter().map(|d| d.delta)
    }
}

/// First-order differences between consecutive window scores.
pub fn delta_series(scores: &[WindowScore]) -> DeltaSeries {
    DeltaSeries {
        deltas: scores.windows(2).map(|p| Delta::between(&p[0], &p[1])).collect(),
        source_len: scores.len(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConfig {
    pub alpha: f64,
    /// Fixed τ; μ and σ are still reported.
    pub override_tau: Option<f64>,
    /// Compute τ for each window over only its trailing `history` deltas.
    pub history: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ThresholdConfigError {
    #[error("alpha must be a positive finite number")]
    Alpha,
    #[error("threshold override must be finite")]
    Override,
    #[error("history length must be at least 1")]
    History,
}

impl ThresholdConfig {
    pub fn new(alpha: f64) -> Self {
        ThresholdConfig {
            alpha,
            override_tau: None,
            history: None,
        }
    }

    pub fn with_override(mut self, tau: f64) -> Self {
        self.override_tau = Some(tau);
        self
    }

    pub fn with_history(mut self, history: usize) -> Self {
        self.history = Some(history);
        self
    }

    pub fn validate(&self) -> Result<(), ThresholdConfigError> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(ThresholdConfigError::Alpha);
        }
        if self.override_tau.is_some_and(|t| !t.is_finite()) {
            return Err(ThresholdConfigError::Override);
        }
        if self.history == Some(0) {
            return Err(ThresholdConfigError::History);
        }
        Ok(())
    }
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        ThresholdConfig::new(DEFAULT_ALPHA)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Threshold {
    pub tau: f64,
    /// `None` only when an override is applied to an empty history.
    pub mu: Option<f64>,
    pub sigma: Option<f64>,
}

fn threshold_from_stats(stats: &RunningStats, config: &ThresholdConfig) -> Option<Threshold> {
    if stats.count() == 0 {
        return config.override_tau.map(|tau| Threshold {
            tau,
            mu: None,
            sigma: None,
        });
    }
    let mu = stats.mean();
    let sigma = stats.population_std();
    Some(Threshold {
        tau: config.override_tau.unwrap_or(mu - config.alpha * sigma),
        mu: Some(mu),
        sigma: Some(sigma),
    })
}

/// `τ = μ − α·σ` over `deltas`. `None` means there is not enough data.
///
/// `config.history` is ignored here; see [`detect`].
pub fn compute_threshold<I>(deltas: I, config: &ThresholdConfig) -> Option<Threshold>
where
    I: IntoIterator<Item = f64>,
{
    threshold_from_stats(&deltas.into_iter().collect(), config)
}

fn trailing(deltas: &[Delta], end: usize, history: Option<usize>) -> &[Delta] {
    let start = history.map_or(0, |h| (end + 1).saturating_sub(h));
    &deltas[start..=end]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnomalyRow {
    pub window: usize,
    pub previous_score: f64,
    pub current_score: f64,
    pub delta: f64,
    pub gap_before: bool,
    /// Per-window threshold, present only in trailing-history mode.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
}

impl AnomalyRow {
    fn from_delta(d: &Delta, tau: Option<f64>) -> Self {
        AnomalyRow {
            window: d.window,
            previous_score: d.previous.value(),
            current_score: d.current.value(),
            delta: d.delta,
            gap_before: d.gap_before,
            tau,
        }
    }
}

/// Flagged windows plus the statistics behind the threshold.
///
/// In trailing-history mode `tau`, `mu_delta` and `sigma_delta` describe the
/// threshold in force for the last window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnomalyReport {
    pub tau: Option<f64>,
    pub mu_delta: Option<f64>,
    pub sigma_delta: Option<f64>,
    pub alpha: f64,
    pub insufficient_data: bool,
    pub anomalies: Vec<AnomalyRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub history: Option<usize>,
}

impl AnomalyReport {
    pub fn flagged_windows(&self) -> Vec<usize> {
        self.anomalies.iter().map(|a| a.window).collect()
    }

    pub fn is_flagged(&self, window: usize) -> bool {
        self.anomalies.binary_search_by_key(&window, |a| a.window).is_ok()
    }
}

/// Flags every delta strictly below the threshold.
pub fn detect(deltas: &DeltaSeries, config: &ThresholdConfig) -> AnomalyReport {
    let items = &deltas.deltas;
    let mut report = AnomalyReport {
        tau: None,
        mu_delta: None,
        sigma_delta: None,
        alpha: config.alpha,
        insufficient_data: items.is_empty(),
        anomalies: Vec::new(),
        history: config.history,
    };

    if items.is_empty() {
        report.tau = config.override_tau;
        return report;
    }

    let last = match config.history {
        None => {
            let th = compute_threshold(deltas.values(), config).expect("non-empty deltas");
            report.anomalies = items
                .iter()
                .filter(|d| d.delta < th.tau)
                .map(|d| AnomalyRow::from_delta(d, None))
                .collect();
            th
        }
        Some(_) => {
            let mut last = None;
            for (j, d) in items.iter().enumerate() {
                let window = trailing(items, j, config.history);
                let th = compute_threshold(window.iter().map(|d| d.delta), config).expect("non-empty window");
                if d.delta < th.tau {
                    report.anomalies.push(AnomalyRow::from_delta(d, Some(th.tau)));
                }
                last = Some(th);
            }
            last.expect("non-empty deltas")
        }
    };
    report.tau = Some(last.tau);
    report.mu_delta = last.mu;
    report.sigma_delta = last.sigma;
    report
}

/// Convenience wrapper: differences, threshold and flags in one call.
pub fn analyze(scores: &[WindowScore], config: &ThresholdConfig) -> AnomalyReport {
    detect(&delta_series(scores), config)
}

/// Verdict for the newest window of an online run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Decision {
    pub window: usize,
    pub previous_score: f64,
    pub current_score: f64,
    pub delta: f64,
    pub tau: f64,
    pub mu_delta: f64,
    pub sigma_delta: f64,
    pub anomalous: bool,
    pub gap_before: bool,
}

/// Incremental detector fed one window score at a time, in window order.
#[derive(Debug, Clone)]
pub struct OnlineDetector {
    config: ThresholdConfig,
    previous: Option<WindowScore>,
    deltas: Vec<Delta>,
    stats: RunningStats,
    windows_seen: usize,
}

impl OnlineDetector {
    pub fn new(config: ThresholdConfig) -> Self {
        OnlineDetector {
            config,
            previous: None,
            deltas: Vec::new(),
            stats: RunningStats::new(),
            windows_seen: 0,
        }
    }

    pub fn config(&self) -> &ThresholdConfig {
        &self.config
    }

    /// Feeds the next window. Returns `None` for the first window, which has
    /// no predecessor to compare against.
    pub fn update(&mut self, score: &WindowScore) -> Option<Decision> {
        self.windows_seen += 1;
        let previous = self.previous.replace(score.clone());
        let delta = Delta::between(&previous?, score);
        self.deltas.push(delta);
        self.stats.push(delta.delta);

        let th = match self.config.history {
            None => threshold_from_stats(&self.stats, &self.config),
            Some(_) => {
                let window = trailing(&self.deltas, self.deltas.len() - 1, self.config.history);
                compute_threshold(window.iter().map(|d| d.delta), &self.config)
            }
        }
        .expect("at least one delta");

        Some(Decision {
            window: delta.window,
            previous_score: delta.previous.value(),
            current_score: delta.current.value(),
            delta: delta.delta,
            tau: th.tau,
            mu_delta: th.mu.unwrap_or(f64::NAN),
            sigma_delta: th.sigma.unwrap_or(f64::NAN),
            anomalous: delta.delta < th.tau,
            gap_before: delta.gap_before,
        })
    }

    /// Batch report over everything seen so far.
    pub fn report(&self) -> AnomalyReport {
        detect(
            &DeltaSeries {
                deltas: self.deltas.clone(),
                source_len: self.windows_seen,
            },
            &self.config,
        )
    }
}

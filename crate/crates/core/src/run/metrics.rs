//! Episode records, run metrics and the analyses computed from logs:
//! manual-reset accounting, forward-step ratios, visitation counts.

use serde::{Deserialize, Serialize};

use super::config::Variant;
use crate::util::moving_average;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndCause {
    Goal,
    Collision,
    Timeout,
    Abort,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResetOutcomeTag {
    Reached,
    Failed,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurriculumRecord {
    /// Expected obtainable information per initial state; null while a
    /// reset buffer is still empty.
    pub scores: Vec<Option<f64>>,
    /// The informative set used to draw the next initial state.
    pub informative: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: u32,
    pub initial_index: usize,
    pub forward_steps: u32,
    pub abort_step: Option<u32>,
    pub cause: EndCause,
    pub reset_outcome: ResetOutcomeTag,
    pub reset_steps: u32,
    pub manual_reset: bool,
    pub cumulative_manual_resets: u32,
    pub episode_return: f64,
    pub next_initial: usize,
    pub curriculum: Option<CurriculumRecord>,
    /// Simulation ticks marking the reset-phase ordering: goal reached,
    /// curriculum re-estimated, initial state reached.
    pub goal_tick: Option<u64>,
    pub curriculum_tick: Option<u64>,
    pub arrive_tick: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub after_episode: u32,
    pub success_rate: f64,
    pub avg_steps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub scenario: String,
    pub variant: Variant,
    pub seed: u64,
    pub episodes: u32,
    /// Total manual resets over training (MR).
    pub manual_resets: u32,
    /// Final-evaluation success rate (SR).
    pub success_rate: f64,
    /// Final-evaluation average episode steps (AS).
    pub avg_steps: f64,
    /// Training episodes started per initial state; sums to `episodes`.
    pub visitation: Vec<u32>,
    pub eval: Vec<EvalPoint>,
}

/// Per-episode forward-step ratio: forward steps over forward plus reset
/// steps, smoothed with a centered moving average.
pub fn forward_step_ratio(records: &[EpisodeRecord], window: usize) -> Vec<(u32, f64)> {
    let raw: Vec<f64> = records
        .iter()
        .map(|r| {
            let total = r.forward_steps + r.reset_steps;
            if total == 0 {
                1.0
            } else {
                r.forward_steps as f64 / total as f64
            }
        })
        .collect();
    let smoothed = moving_average(&raw, window);
    records
        .iter()
        .zip(smoothed)
        .map(|(r, v)| (r.episode, v))
        .collect()
}

/// Re-derive MR from the per-episode trigger conditions; must agree with
/// the counter kept during training.
pub fn recount_manual_resets(records: &[EpisodeRecord], variant: Variant) -> u32 {
    records
        .iter()
        .filter(|r| {
            matches!(variant, Variant::Oracle | Variant::Random)
                || matches!(r.cause, EndCause::Collision | EndCause::Timeout)
                || r.reset_outcome == ResetOutcomeTag::Failed
        })
        .count() as u32
}

/// Episodes started per initial index (1-based), length `n`.
pub fn visitation_counts(records: &[EpisodeRecord], n: usize) -> Vec<u32> {
    let mut counts = vec![0u32; n];
    for r in records {
        counts[r.initial_index - 1] += 1;
    }
    counts
}

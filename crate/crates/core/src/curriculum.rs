//! Curriculum over initial states: per-initial-state reset buffers, the
//! expected-obtainable-information score, and the informative-set band.

use std::collections::{BTreeSet, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rnd::{NoveltyModel, NoveltyObservation};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurriculumConfig {
    /// Lower bound of the informative band.
    pub lambda1: f64,
    /// Upper bound of the informative band.
    pub lambda2: f64,
    pub buffer_capacity: usize,
}

impl Default for CurriculumConfig {
    fn default() -> Self {
        Self {
            lambda1: 1.0,
            lambda2: 1.7,
            buffer_capacity: 1000,
        }
    }
}

#[derive(Debug, Error)]
pub enum CurriculumError {
    #[error("initial-state index {index} out of range 1..={n}")]
    IndexOutOfRange { index: usize, n: usize },
}

#[derive(Debug, Clone)]
pub struct CurriculumState {
    buffers: Vec<VecDeque<NoveltyObservation>>,
    pub lambda1: f64,
    pub lambda2: f64,
    capacity: usize,
    last_scores: Vec<Option<f64>>,
    last_set: BTreeSet<usize>,
}

impl CurriculumState {
    pub fn new(n: usize, cfg: &CurriculumConfig) -> Self {
        Self {
            buffers: vec![VecDeque::new(); n],
            lambda1: cfg.lambda1,
            lambda2: cfg.lambda2,
            capacity: cfg.buffer_capacity,
            last_scores: vec![None; n],
            last_set: BTreeSet::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.buffers.len()
    }

    pub fn buffer_len(&self, index: usize) -> usize {
        self.buffers[index - 1].len()
    }

    /// Append to-goal observations to reset buffer `index` (1-based), FIFO
    /// at capacity.
    pub fn ingest_reset_observations(
        &mut self,
        index: usize,
        observations: impl IntoIterator<Item = NoveltyObservation>,
    ) -> Result<(), CurriculumError> {
        let n = self.n();
        if index == 0 || index > n {
            return Err(CurriculumError::IndexOutOfRange { index, n });
        }
        let buf = &mut self.buffers[index - 1];
        for o in observations {
            if buf.len() == self.capacity {
                buf.pop_front();
            }
            buf.push_back(o);
        }
        Ok(())
    }

    /// Mean novelty over reset buffer `index`; undefined on an empty buffer.
    /// Scoring never trains the predictor.
    pub fn score_initial_state(&self, index: usize, model: &NoveltyModel) -> Option<f64> {
        let buf = &self.buffers[index - 1];
        if buf.is_empty() {
            return None;
        }
        let sum: f64 = buf.iter().map(|o| model.novelty(o)).sum();
        Some(sum / buf.len() as f64)
    }

    /// Recompute all scores and the informative set (inclusive band).
    pub fn informative_set(&mut self, model: &NoveltyModel) -> BTreeSet<usize> {
        for i in 1..=self.n() {
            self.last_scores[i - 1] = self.score_initial_state(i, model);
        }
        self.last_set = informative_from_scores(&self.last_scores, self.lambda1, self.lambda2);
        self.last_set.clone()
    }

    pub fn last_scores(&self) -> &[Option<f64>] {
        &self.last_scores
    }

    pub fn last_set(&self) -> &BTreeSet<usize> {
        &self.last_set
    }

    /// Uniform draw from the informative set; falls back to uniform over
    /// all initial states when the set is empty.
    pub fn sample_next_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        if self.last_set.is_empty() {
            rng.random_range(1..=self.n())
        } else {
            let pick = rng.random_range(0..self.last_set.len());
            *self.last_set.iter().nth(pick).expect("non-empty set")
        }
    }
}

/// The informative-set predicate applied to a score vector; indices are
/// 1-based, undefined scores are excluded.
pub fn informative_from_scores(
    scores: &[Option<f64>],
    lambda1: f64,
    lambda2: f64,
) -> BTreeSet<usize> {
    scores
        .iter()
        .enumerate()
        .filter_map(|(i, s)| match s {
            Some(e) if (lambda1..=lambda2).contains(e) => Some(i + 1),
            _ => None,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rnd::NoveltyConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny_cfg() -> NoveltyConfig {
        NoveltyConfig {
            grid_size: 4,
            hidden: vec![16],
            feature_dim: 8,
            ..NoveltyConfig::default()
        }
    }

    fn obs(cfg: &NoveltyConfig, fill: u64) -> NoveltyObservation {
        NoveltyObservation::from_fn(cfg.input_dim(), |i| (fill >> (i % 64)) & 1 == 1)
    }

    #[test]
    fn collapsed_predictor_scores_zero() {
        let cfg = tiny_cfg();
        let mut model = NoveltyModel::new(&cfg, 3);
        model.collapse_predictor_to_target();
        let mut c = CurriculumState::new(2, &CurriculumConfig::default());
        c.ingest_reset_observations(1, vec![obs(&cfg, 0b1011), obs(&cfg, 0b0110)])
            .unwrap();
        let e = c.score_initial_state(1, &model).unwrap();
        assert!(e.abs() < 1e-12);
        assert!(c.score_initial_state(2, &model).is_none());
    }

    #[test]
    fn score_is_brute_force_mean() {
        let cfg = tiny_cfg();
        let model = NoveltyModel::new(&cfg, 9);
        let mut c = CurriculumState::new(1, &CurriculumConfig::default());
        let items: Vec<_> = (0..50).map(|i| obs(&cfg, 0x9e3779b97f4a7c15u64.wrapping_mul(i + 1))).collect();
        c.ingest_reset_observations(1, items.clone()).unwrap();
        let by_hand: f64 = items.iter().map(|o| model.novelty(o)).sum::<f64>() / items.len() as f64;
        let scored = c.score_initial_state(1, &model).unwrap();
        assert!((scored - by_hand).abs() <= 1e-10 * by_hand.abs().max(1.0));
    }

    #[test]
    fn informative_band_is_inclusive() {
        let scores = vec![Some(0.5), Some(1.0), Some(1.7), Some(2.0)];
        let set = informative_from_scores(&scores, 1.0, 1.7);
        assert_eq!(set.into_iter().collect::<Vec<_>>(), vec![2, 3]);
    }

    #[test]
    fn empty_buffers_yield_empty_set_and_uniform_fallback() {
        let cfg = tiny_cfg();
        let model = NoveltyModel::new(&cfg, 5);
        let mut c = CurriculumState::new(4, &CurriculumConfig::default());
        assert!(c.informative_set(&model).is_empty());
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut seen = [0u32; 4];
        for _ in 0..4000 {
            seen[c.sample_next_initial(&mut rng) - 1] += 1;
        }
        for count in seen {
            assert!((800..=1200).contains(&count), "fallback not uniform: {count}");
        }
    }

    #[test]
    fn vacuous_bounds_admit_all_nonempty_buffers() {
        let cfg = tiny_cfg();
        let model = NoveltyModel::new(&cfg, 5);
        let mut c = CurriculumState::new(3, &CurriculumConfig {
            lambda1: 0.0,
            lambda2: f64::INFINITY,
            ..CurriculumConfig::default()
        });
        c.ingest_reset_observations(1, vec![obs(&cfg, 1)]).unwrap();
        c.ingest_reset_observations(3, vec![obs(&cfg, 2)]).unwrap();
        let set = c.informative_set(&model);
        assert_eq!(set.into_iter().collect::<Vec<_>>(), vec![1, 3]);
    }

    #[test]
    fn singleton_set_always_sampled() {
        let cfg = tiny_cfg();
        let model = NoveltyModel::new(&cfg, 5);
        let mut c = CurriculumState::new(5, &CurriculumConfig {
            lambda1: 0.0,
            lambda2: f64::INFINITY,
            ..CurriculumConfig::default()
        });
        c.ingest_reset_observations(3, vec![obs(&cfg, 7)]).unwrap();
        c.informative_set(&model);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            assert_eq!(c.sample_next_initial(&mut rng), 3);
        }
    }

    #[test]
    fn fifo_eviction_at_capacity() {
        let cfg = tiny_cfg();
        let mut c = CurriculumState::new(1, &CurriculumConfig::default());
        let marked = obs(&cfg, u64::MAX);
        c.ingest_reset_observations(1, vec![marked.clone()]).unwrap();
        c.ingest_reset_observations(1, (0..1000).map(|i| obs(&cfg, i)))
            .unwrap();
        assert_eq!(c.buffer_len(1), 1000);
        assert!(!c.buffers[0].iter().any(|o| *o == marked), "oldest evicted");
    }

    #[test]
    fn ingest_isolates_other_buffers() {
        let cfg = tiny_cfg();
        let mut c = CurriculumState::new(3, &CurriculumConfig::default());
        c.ingest_reset_observations(2, vec![obs(&cfg, 1), obs(&cfg, 2)]).unwrap();
        assert_eq!(c.buffer_len(1), 0);
        assert_eq!(c.buffer_len(2), 2);
        assert_eq!(c.buffer_len(3), 0);
        assert!(matches!(
            c.ingest_reset_observations(4, vec![obs(&cfg, 1)]),
            Err(CurriculumError::IndexOutOfRange { index: 4, n: 3 })
        ));
    }

    #[test]
    fn scoring_never_touches_the_predictor() {
        let cfg = tiny_cfg();
        let model = NoveltyModel::new(&cfg, 21);
        let before = model.predictor_checksum();
        let mut c = CurriculumState::new(2, &CurriculumConfig::default());
        c.ingest_reset_observations(1, (0..40).map(|i| obs(&cfg, i * 3 + 1))).unwrap();
        for _ in 0..10 {
            c.informative_set(&model);
            c.score_initial_state(1, &model);
        }
        assert_eq!(model.predictor_checksum(), before);
        assert_eq!(model.target_checksum(), {
            let m2 = NoveltyModel::new(&cfg, 21);
            m2.target_checksum()
        });
    }
}

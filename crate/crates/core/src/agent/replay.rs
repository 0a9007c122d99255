//! Transition record and the uniform ring replay buffer.

use std::collections::VecDeque;

use rand::Rng;

use crate::rnd::NoveltyObservation;

#[derive(Debug, Clone)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    /// Real environment terminal (goal or collision); masks bootstrapping.
    pub terminal: bool,
    /// Episode was aborted right after this transition; bootstrapping
    /// proceeds (an abort is not task failure).
    pub abort: bool,
    /// Novelty-grid observation of `obs`'s state, for predictor training.
    pub novelty_obs: NoveltyObservation,
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    items: VecDeque<Transition>,
    capacity: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        Self {
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
            capacity,
        }
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn get(&self, i: usize) -> &Transition {
        &self.items[i]
    }

    /// Flag the most recent transition as an episode abort.
    pub fn mark_last_abort(&mut self) {
        if let Some(t) = self.items.back_mut() {
            t.abort = true;
            t.terminal = false;
        }
    }

    /// Uniform sample with replacement.
    pub fn sample<'a, R: Rng + ?Sized>(&'a self, rng: &mut R, batch: usize) -> Vec<&'a Transition> {
        (0..batch)
            .map(|_| &self.items[rng.random_range(0..self.items.len())])
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn transition(tag: f64) -> Transition {
        Transition {
            obs: vec![tag],
            action: 0,
            reward: tag,
            next_obs: vec![tag],
            terminal: false,
            abort: false,
            novelty_obs: NoveltyObservation::from_fn(8, |_| false),
        }
    }

    #[test]
    fn ring_evicts_oldest_at_capacity() {
        let mut buf = ReplayBuffer::new(50_000);
        for i in 0..50_001 {
            buf.push(transition(i as f64));
        }
        assert_eq!(buf.len(), 50_000);
        assert_eq!(buf.get(0).reward, 1.0);
    }

    #[test]
    fn sampling_is_uniform_over_contents() {
        let mut buf = ReplayBuffer::new(4);
        for i in 0..4 {
            buf.push(transition(i as f64));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut counts = [0usize; 4];
        for t in buf.sample(&mut rng, 8000) {
            counts[t.reward as usize] += 1;
        }
        for c in counts {
            assert!((1700..=2300).contains(&c), "count {c} outside uniform band");
        }
    }

    #[test]
    fn mark_last_abort_sets_flags() {
        let mut buf = ReplayBuffer::new(4);
        let mut t = transition(0.0);
        t.terminal = true;
        buf.push(t);
        buf.mark_last_abort();
        assert!(buf.get(0).abort);
        assert!(!buf.get(0).terminal);
    }
}

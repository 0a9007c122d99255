//! Discrete-action soft actor-critic with exact categorical expectations:
//! twin critics, soft target networks, fixed temperature.

use std::io::{Read, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::replay::Transition;
use crate::nn::{Activation, AdamState, Mlp, NnError};
use crate::sim::Action;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SacConfig {
    pub hidden: Vec<usize>,
    pub gamma: f64,
    /// Fixed entropy temperature.
    pub alpha: f64,
    /// Target smoothing coefficient.
    pub tau: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub target_update_interval: u64,
}

impl Default for SacConfig {
    fn default() -> Self {
        Self {
            hidden: vec![512, 512],
            gamma: 0.99,
            alpha: 0.4,
            tau: 0.005,
            lr: 1e-3,
            batch_size: 256,
            buffer_capacity: 50_000,
            target_update_interval: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActMode {
    Sample,
    Greedy,
}

#[derive(Debug, Clone, Copy)]
pub struct LossReport {
    pub critic_loss: f64,
    pub policy_loss: f64,
    pub entropy: f64,
}

#[derive(Debug, Error)]
pub enum SacError {
    #[error("batch size {got} does not match configured {expected}")]
    WrongBatchSize { expected: usize, got: usize },
    #[error("policy produced non-finite probabilities")]
    NonFiniteProbs,
    #[error(transparent)]
    Nn(#[from] NnError),
}

const N_ACTIONS: usize = 3;

#[derive(Debug, Clone)]
pub struct PolicyBundle {
    policy: Mlp,
    q1: Mlp,
    q2: Mlp,
    q1_target: Mlp,
    q2_target: Mlp,
    opt_policy: AdamState,
    opt_q1: AdamState,
    opt_q2: AdamState,
    pub alpha: f64,
    pub gamma: f64,
    pub tau: f64,
    batch_size: usize,
    target_update_interval: u64,
    updates: u64,
}

impl PolicyBundle {
    pub fn new(obs_dim: usize, cfg: &SacConfig, seed: u64) -> Self {
        use rand::SeedableRng;
        let mut dims = vec![obs_dim];
        dims.extend_from_slice(&cfg.hidden);
        dims.push(N_ACTIONS);
        let mut rng_pi = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0x01);
        let mut rng_q1 = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0x02);
        let mut rng_q2 = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0x03);
        let policy = Mlp::new(&dims, Activation::Softmax, &mut rng_pi);
        let q1 = Mlp::new(&dims, Activation::Linear, &mut rng_q1);
        let q2 = Mlp::new(&dims, Activation::Linear, &mut rng_q2);
        let n = policy.param_count();
        Self {
            q1_target: q1.clone(),
            q2_target: q2.clone(),
            opt_policy: AdamState::new(n, cfg.lr),
            opt_q1: AdamState::new(q1.param_count(), cfg.lr),
            opt_q2: AdamState::new(q2.param_count(), cfg.lr),
            policy,
            q1,
            q2,
            alpha: cfg.alpha,
            gamma: cfg.gamma,
            tau: cfg.tau,
            batch_size: cfg.batch_size,
            target_update_interval: cfg.target_update_interval.max(1),
            updates: 0,
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.policy.input_dim()
    }

    pub fn probs(&self, obs: &[f64]) -> Result<Vec<f64>, SacError> {
        let p = self.policy.forward(obs)?;
        if p.iter().any(|v| !v.is_finite()) {
            return Err(SacError::NonFiniteProbs);
        }
        Ok(p)
    }

    pub fn q_values(&self, obs: &[f64]) -> Result<(Vec<f64>, Vec<f64>), SacError> {
        Ok((self.q1.forward(obs)?, self.q2.forward(obs)?))
    }

    /// Sample from the categorical, or take the argmax (ties break toward
    /// the lowest action index).
    pub fn act<R: Rng + ?Sized>(
        &self,
        obs: &[f64],
        mode: ActMode,
        rng: &mut R,
    ) -> Result<Action, SacError> {
        let p = self.probs(obs)?;
        let idx = match mode {
            ActMode::Greedy => argmax_lowest(&p),
            ActMode::Sample => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut chosen = N_ACTIONS - 1;
                for (i, pi) in p.iter().enumerate() {
                    acc += pi;
                    if u < acc {
                        chosen = i;
                        break;
                    }
                }
                chosen
            }
        };
        Ok(Action::from_index(idx).expect("three actions"))
    }

    /// One critic step on the soft Bellman target, one policy step, and a
    /// soft target update.
    pub fn update(&mut self, batch: &[&Transition]) -> Result<LossReport, SacError> {
        if batch.len() != self.batch_size {
            return Err(SacError::WrongBatchSize {
                expected: self.batch_size,
                got: batch.len(),
            });
        }
        let inv_b = 1.0 / batch.len() as f64;

        // Soft targets from the next states.
        let mut targets = Vec::with_capacity(batch.len());
        for t in batch {
            let p_next = self.probs(&t.next_obs)?;
            let q1n = self.q1_target.forward(&t.next_obs)?;
            let q2n = self.q2_target.forward(&t.next_obs)?;
            let v_next: f64 = (0..N_ACTIONS)
                .map(|a| p_next[a] * (q1n[a].min(q2n[a]) - self.alpha * ln(p_next[a])))
                .sum();
            let mask = if t.terminal { 0.0 } else { 1.0 };
            targets.push(t.reward + self.gamma * mask * v_next);
        }

        // Critic regression on the taken actions.
        let mut critic_loss = 0.0;
        for (critic, opt) in [
            (&mut self.q1, &mut self.opt_q1),
            (&mut self.q2, &mut self.opt_q2),
        ] {
            let mut grads = vec![0.0; critic.param_count()];
            for (t, y) in batch.iter().zip(targets.iter()) {
                let trace = critic.forward_trace(&t.obs)?;
                let q = trace.output()[t.action];
                let d = q - y;
                critic_loss += d * d * inv_b * 0.5;
                let mut upstream = vec![0.0; N_ACTIONS];
                upstream[t.action] = 2.0 * d * inv_b;
                critic.backward_into(&trace, &upstream, &mut grads)?;
            }
            opt.step(critic.params_mut(), &grads)?;
        }

        // Policy step against the updated critics.
        let mut policy_loss = 0.0;
        let mut entropy = 0.0;
        let mut grads = vec![0.0; self.policy.param_count()];
        for t in batch.iter() {
            let trace = self.policy.forward_trace(&t.obs)?;
            let p = trace.output().to_vec();
            let q1 = self.q1.forward(&t.obs)?;
            let q2 = self.q2.forward(&t.obs)?;
            let mut upstream = vec![0.0; N_ACTIONS];
            for a in 0..N_ACTIONS {
                let q_min = q1[a].min(q2[a]);
                policy_loss += p[a] * (self.alpha * ln(p[a]) - q_min) * inv_b;
                entropy -= p[a] * ln(p[a]) * inv_b;
                upstream[a] = (self.alpha * (ln(p[a]) + 1.0) - q_min) * inv_b;
            }
            self.policy.backward_into(&trace, &upstream, &mut grads)?;
        }
        self.opt_policy.step(self.policy.params_mut(), &grads)?;

        self.updates += 1;
        if self.updates % self.target_update_interval == 0 {
            soft_update(&self.q1, &mut self.q1_target, self.tau);
            soft_update(&self.q2, &mut self.q2_target, self.tau);
        }

        Ok(LossReport {
            critic_loss,
            policy_loss,
            entropy,
        })
    }

    /// Distance between critics and their targets, for lag tests.
    pub fn target_gap(&self) -> f64 {
        let d1: f64 = self
            .q1
            .params()
            .iter()
            .zip(self.q1_target.params())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let d2: f64 = self
            .q2
            .params()
            .iter()
            .zip(self.q2_target.params())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        (d1 + d2).sqrt()
    }

    pub fn checksum(&self) -> u64 {
        self.policy
            .checksum()
            .rotate_left(1)
            .wrapping_add(self.q1.checksum())
            .rotate_left(1)
            .wrapping_add(self.q2.checksum())
            .rotate_left(1)
            .wrapping_add(self.q1_target.checksum())
            .rotate_left(1)
            .wrapping_add(self.q2_target.checksum())
    }

    /// Drive target nets toward the critics without touching anything else
    /// (test hook for the lag property).
    pub fn soft_update_targets(&mut self) {
        soft_update(&self.q1, &mut self.q1_target, self.tau);
        soft_update(&self.q2, &mut self.q2_target, self.tau);
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<(), NnError> {
        w.write_all(b"SACB")?;
        for v in [self.alpha, self.gamma, self.tau] {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&self.updates.to_le_bytes())?;
        for net in [&self.policy, &self.q1, &self.q2, &self.q1_target, &self.q2_target] {
            net.write_to(w)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R, cfg: &SacConfig) -> Result<Self, NnError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"SACB" {
            return Err(NnError::BadCheckpoint("bad policy-bundle magic".into()));
        }
        let mut buf = [0u8; 8];
        let mut scalars = [0.0f64; 3];
        for s in &mut scalars {
            r.read_exact(&mut buf)?;
            *s = f64::from_le_bytes(buf);
        }
        r.read_exact(&mut buf)?;
        let updates = u64::from_le_bytes(buf);
        let policy = Mlp::read_from(r)?;
        let q1 = Mlp::read_from(r)?;
        let q2 = Mlp::read_from(r)?;
        let q1_target = Mlp::read_from(r)?;
        let q2_target = Mlp::read_from(r)?;
        let n = policy.param_count();
        let nq = q1.param_count();
        Ok(Self {
            policy,
            q1,
            q2,
            q1_target,
            q2_target,
            opt_policy: AdamState::new(n, cfg.lr),
            opt_q1: AdamState::new(nq, cfg.lr),
            opt_q2: AdamState::new(nq, cfg.lr),
            alpha: scalars[0],
            gamma: scalars[1],
            tau: scalars[2],
            batch_size: cfg.batch_size,
            target_update_interval: cfg.target_update_interval,
            updates,
        })
    }
}

fn ln(p: f64) -> f64 {
    p.max(1e-12).ln()
}

fn argmax_lowest(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in p.iter().enumerate().skip(1) {
        if *v > p[best] {
            best = i;
        }
    }
    best
}

fn soft_update(src: &Mlp, dst: &mut Mlp, tau: f64) {
    for (d, s) in dst.params_mut().iter_mut().zip(src.params()) {
        *d = tau * s + (1.0 - tau) * *d;
    }
}

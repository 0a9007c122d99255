//! Random-network-distillation novelty: a frozen random target net, a
//! trained predictor, and the prediction-error norm used both to abort
//! episodes and to score initial states.
//!
//! The observation is an ego-centric occupancy grid (road mask, scripted
//! vehicles, ego route), rasterized straight from the world state.

use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::nn::{Activation, AdamState, Mlp, NnError};
use crate::sim::geometry::Vec2;
use crate::sim::{ScenarioSpec, WorldState};
use crate::util::mix64;

pub const GRID_CHANNELS: usize = 3;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoveltyConfig {
    pub grid_size: usize,
    /// Side length of the square grid window, in meters.
    pub grid_extent: f64,
    pub hidden: Vec<usize>,
    pub feature_dim: usize,
    /// Abort threshold on the unsquared prediction-error norm.
    pub lambda0: f64,
    pub lr: f64,
    pub batch_size: usize,
    /// Predictor updates happen every this many forward steps.
    pub update_every: u32,
}

impl Default for NoveltyConfig {
    fn default() -> Self {
        Self {
            grid_size: 32,
            grid_extent: 40.0,
            hidden: vec![256, 256],
            feature_dim: 64,
            lambda0: 1.4,
            lr: 1e-3,
            batch_size: 256,
            update_every: 1,
        }
    }
}

impl NoveltyConfig {
    pub fn input_dim(&self) -> usize {
        self.grid_size * self.grid_size * GRID_CHANNELS
    }
}

/// Binary occupancy grid, bit-packed: tens of thousands of these sit in the
/// replay buffer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NoveltyObservation {
    bits: Vec<u64>,
    dim: usize,
}

impl NoveltyObservation {
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize) -> bool) -> Self {
        let mut bits = vec![0u64; dim.div_ceil(64)];
        for i in 0..dim {
            if f(i) {
                bits[i / 64] |= 1 << (i % 64);
            }
        }
        Self { bits, dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn to_dense(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i) as u8 as f64).collect()
    }

    fn permuted(&self, perm: &[usize]) -> Self {
        Self::from_fn(self.dim, |i| self.get(perm[i]))
    }
}

/// Rasterize the ego-centric grid: ego at the center, facing up.
/// Channel 0 is the static road mask, channel 1 scripted vehicles,
/// channel 2 the remaining ego route. Non-informative episodes scramble
/// the cells with a per-tick permutation.
pub fn observe(w: &WorldState, spec: &ScenarioSpec, cfg: &NoveltyConfig) -> NoveltyObservation {
    let g = cfg.grid_size;
    let cell = cfg.grid_extent / g as f64;
    let (center, heading) = w.ego.pose(spec);
    let right = Vec2::new(heading.y, -heading.x);
    let half = (g as f64) / 2.0 - 0.5;

    let cells = g * g;
    let mut dense = vec![false; cells * GRID_CHANNELS];
    for row in 0..g {
        for col in 0..g {
            let fwd = (half - row as f64) * cell;
            let lat = (col as f64 - half) * cell;
            let p = center.add(heading.scale(fwd)).add(right.scale(lat));
            let idx = row * g + col;
            for e in &spec.graph.edges {
                if e.centerline.distance_to(p) <= e.width * 0.5 {
                    dense[idx] = true;
                    break;
                }
            }
            for v in &w.scripted {
                if v.state.footprint(spec).contains(p) {
                    dense[cells + idx] = true;
                    break;
                }
            }
            for &e in w.route.remaining() {
                let edge = spec.graph.edge(e);
                if edge.centerline.distance_to(p) <= edge.width * 0.5 {
                    dense[2 * cells + idx] = true;
                    break;
                }
            }
        }
    }
    let obs = NoveltyObservation::from_fn(dense.len(), |i| dense[i]);
    if w.mode.shuffle_obs {
        let mut rng = ChaCha8Rng::seed_from_u64(mix64(w.seed, w.tick, 0x0b5e55));
        let mut perm: Vec<usize> = (0..obs.dim).collect();
        // Fisher-Yates with the seeded stream.
        for i in (1..perm.len()).rev() {
            let j = rand::Rng::random_range(&mut rng, 0..=i);
            perm.swap(i, j);
        }
        obs.permuted(&perm)
    } else {
        obs
    }
}

#[derive(Debug, Clone)]
pub struct NoveltyModel {
    target: Mlp,
    predictor: Mlp,
    pub lambda0: f64,
    adam: AdamState,
}

impl NoveltyModel {
    /// Target and predictor get distinct sub-seeds so the initial novelty
    /// is nonzero everywhere.
    pub fn new(cfg: &NoveltyConfig, seed: u64) -> Self {
        let mut dims = vec![cfg.input_dim()];
        dims.extend_from_slice(&cfg.hidden);
        dims.push(cfg.feature_dim);
        let mut rng_t = ChaCha8Rng::seed_from_u64(seed ^ 0x7a67_e7);
        let mut rng_p = ChaCha8Rng::seed_from_u64(seed ^ 0x9ed1_c7);
        Self {
            target: Mlp::new(&dims, Activation::Linear, &mut rng_t),
            predictor: Mlp::new(&dims, Activation::Linear, &mut rng_p),
            lambda0: cfg.lambda0,
            adam: AdamState::new(
                Mlp::zeros(&dims, Activation::Linear).param_count(),
                cfg.lr,
            ),
        }
    }

    /// Unsquared prediction-error norm.
    pub fn novelty(&self, o: &NoveltyObservation) -> f64 {
        let x = o.to_dense();
        let t = self.target.forward(&x).expect("observation dim matches");
        let p = self.predictor.forward(&x).expect("observation dim matches");
        t.iter()
            .zip(p.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Abort when the novelty reaches the threshold (inclusive).
    pub fn should_abort(&self, o: &NoveltyObservation) -> bool {
        self.novelty(o) >= self.lambda0
    }

    /// One squared-error gradient step on the predictor; the target never
    /// changes. Returns the mean squared prediction error of the batch.
    pub fn train_predictor(&mut self, batch: &[&NoveltyObservation]) -> Result<f64, NnError> {
        if batch.is_empty() {
            return Err(NnError::DimMismatch { expected: 1, got: 0 });
        }
        let inv_b = 1.0 / batch.len() as f64;
        let mut grads = vec![0.0; self.predictor.param_count()];
        let mut loss = 0.0;
        for o in batch {
            let x = o.to_dense();
            let t = self.target.forward(&x)?;
            let trace = self.predictor.forward_trace(&x)?;
            let p = trace.output();
            let mut upstream = Vec::with_capacity(p.len());
            for (pi, ti) in p.iter().zip(t.iter()) {
                let d = pi - ti;
                loss += d * d * inv_b;
                upstream.push(2.0 * d * inv_b);
            }
            self.predictor.backward_into(&trace, &upstream, &mut grads)?;
        }
        self.adam.step(self.predictor.params_mut(), &grads)?;
        Ok(loss)
    }

    pub fn target_checksum(&self) -> u64 {
        self.target.checksum()
    }

    pub fn predictor_checksum(&self) -> u64 {
        self.predictor.checksum()
    }

    /// Copy the target parameters into the predictor (novelty becomes zero
    /// everywhere); test hook.
    pub fn collapse_predictor_to_target(&mut self) {
        let params = self.target.params().to_vec();
        self.predictor.params_mut().copy_from_slice(&params);
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<(), NnError> {
        w.write_all(b"RNDC")?;
        w.write_all(&self.lambda0.to_le_bytes())?;
        self.target.write_to(w)?;
        self.predictor.write_to(w)?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R, lr: f64) -> Result<Self, NnError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"RNDC" {
            return Err(NnError::BadCheckpoint("bad novelty-model magic".into()));
        }
        let mut buf = [0u8; 8];
        r.read_exact(&mut buf)?;
        let lambda0 = f64::from_le_bytes(buf);
        let target = Mlp::read_from(r)?;
        let predictor = Mlp::read_from(r)?;
        let n = predictor.param_count();
        Ok(Self {
            target,
            predictor,
            lambda0,
            adam: AdamState::new(n, lr),
        })
    }
}

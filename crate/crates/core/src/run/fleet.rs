//! Multi-run fan-out: seed sweeps and the non-informative-initial-state
//! ablation. Runs are independent, so they parallelize across threads.

use rayon::prelude::*;

use super::config::{RunConfig, Variant};
use super::train::{train, RunError, TrainOutput};

/// Train one run per seed, in parallel. Results come back in seed order.
pub fn run_seeds(base: &RunConfig, seeds: &[u64]) -> Result<Vec<TrainOutput>, RunError> {
    seeds
        .par_iter()
        .map(|&seed| {
            let mut cfg = base.clone();
            cfg.seed = seed;
            train(&cfg)
        })
        .collect()
}

#[derive(Debug)]
pub struct AblationOutput {
    pub curriculum: Vec<TrainOutput>,
    pub uniform: Vec<TrainOutput>,
}

/// The curriculum ablation: the full algorithm against the variant that
/// samples initial states uniformly (and never aborts), on a scenario with
/// designated non-informative anchors.
pub fn run_ablation(base: &RunConfig, seeds: &[u64]) -> Result<AblationOutput, RunError> {
    let mut ours = base.clone();
    ours.variant = Variant::Ours;
    let mut uniform = base.clone();
    uniform.variant = Variant::OursNoCurr;
    let (curriculum, uniform) = rayon::join(|| run_seeds(&ours, seeds), || run_seeds(&uniform, seeds));
    Ok(AblationOutput {
        curriculum: curriculum?,
        uniform: uniform?,
    })
}

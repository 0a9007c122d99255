//! The end-to-end training procedure: forward phase with novelty-gated
//! aborts, rule-based reset phase, curriculum re-estimation at the goal,
//! manual-reset accounting, periodic greedy evaluation and checkpoints.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::config::{RunConfig, Variant};
use super::metrics::{
    CurriculumRecord, EndCause, EpisodeRecord, EvalPoint, MetricsSummary, ResetOutcomeTag,
};
use crate::agent::{agent_observation, ActMode, PolicyBundle, ReplayBuffer, SacError, Transition};
use crate::curriculum::CurriculumState;
use crate::reset::{drive_leg, plan_reset, reset_rollout, LegOutcome, ResetOutcome};
use crate::reward::{detour_reward, shared_reward};
use crate::rnd::{observe, NoveltyModel};
use crate::sim::world::ModeFlags;
use crate::sim::{step_world, Action, EgoRoute, RewardKind, ScenarioSpec, WorldState};
use crate::util::{mix64, percentile};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] super::config::ConfigError),
    #[error(transparent)]
    Scenario(#[from] crate::sim::ScenarioError),
    #[error(transparent)]
    World(#[from] crate::sim::WorldError),
    #[error(transparent)]
    Sac(#[from] SacError),
    #[error(transparent)]
    Nn(#[from] crate::nn::NnError),
    #[error(transparent)]
    Reward(#[from] crate::reward::RewardError),
    #[error("checkpoint i/o failed: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub after_episode: u32,
    pub bytes: Vec<u8>,
}

#[derive(Debug)]
pub struct TrainOutput {
    pub config: RunConfig,
    pub summary: MetricsSummary,
    pub episodes: Vec<EpisodeRecord>,
    pub checkpoints: Vec<Checkpoint>,
    /// Gradient updates skipped because of non-finite losses.
    pub skipped_updates: u32,
}

/// Serialize the policy bundle plus novelty model as one checkpoint blob.
pub fn checkpoint_bytes(bundle: &PolicyBundle, model: &NoveltyModel) -> Result<Vec<u8>, RunError> {
    let mut out = Vec::new();
    out.extend_from_slice(b"CKPT");
    bundle.write_to(&mut out)?;
    model.write_to(&mut out)?;
    Ok(out)
}

pub fn load_checkpoint(
    bytes: &[u8],
    cfg: &RunConfig,
) -> Result<(PolicyBundle, NoveltyModel), RunError> {
    let mut r = bytes;
    let mut magic = [0u8; 4];
    std::io::Read::read_exact(&mut r, &mut magic)?;
    if &magic != b"CKPT" {
        return Err(RunError::Nn(crate::nn::NnError::BadCheckpoint(
            "bad checkpoint magic".into(),
        )));
    }
    let bundle = PolicyBundle::read_from(&mut r, &cfg.sac)?;
    let model = NoveltyModel::read_from(&mut r, cfg.rnd.lr)?;
    Ok((bundle, model))
}

fn step_reward(
    kind: RewardKind,
    flags: &crate::sim::StepFlags,
    speed: f64,
    v_max: f64,
    weights: &crate::reward::RewardWeights,
) -> Result<f64, crate::reward::RewardError> {
    match kind {
        RewardKind::Detour => Ok(detour_reward(flags, weights)),
        RewardKind::Shared => shared_reward(flags, speed.clamp(0.0, v_max), v_max, weights),
    }
}

/// Greedy evaluation: fresh worlds, uniform initial states, no aborts, no
/// learning, stuck events ignored. AS counts the step limit for episodes
/// that never finish.
pub fn evaluate(
    bundle: &PolicyBundle,
    spec: &ScenarioSpec,
    cfg: &RunConfig,
    episodes: u32,
    seed: u64,
) -> Result<(f64, f64), RunError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut successes = 0u32;
    let mut steps_total = 0u64;
    for e in 0..episodes {
        let index = rng.random_range(1..=spec.n_initial());
        let mut world = WorldState::reset(spec, index, mix64(seed, e as u64, 0x0e7a))?;
        let mut steps = 0u32;
        loop {
            if steps >= spec.limits.t_forward {
                break;
            }
            let obs = agent_observation(&world, spec, &cfg.features);
            let action = bundle.act(&obs, ActMode::Greedy, &mut rng)?;
            let out = step_world(&world, action, spec)?;
            steps += 1;
            world = out.world;
            if out.flags.collision_or_unsafe {
                break;
            }
            if out.flags.reached_goal {
                successes += 1;
                break;
            }
        }
        steps_total += steps as u64;
    }
    Ok((
        successes as f64 / episodes as f64,
        steps_total as f64 / episodes as f64,
    ))
}

struct ForwardPhase {
    cause: EndCause,
    abort_step: Option<u32>,
    forward_steps: u32,
    episode_return: f64,
}

/// Run one forward phase in place; learning and novelty bookkeeping happen
/// here.
#[allow(clippy::too_many_arguments)]
fn forward_phase(
    world: &mut WorldState,
    spec: &ScenarioSpec,
    cfg: &RunConfig,
    bundle: &mut PolicyBundle,
    model: &mut NoveltyModel,
    buffer: &mut ReplayBuffer,
    rng: &mut ChaCha8Rng,
    warmup_pool: &mut Vec<f64>,
    in_warmup: bool,
    skipped_updates: &mut u32,
) -> Result<ForwardPhase, RunError> {
    let learning = cfg.variant != Variant::Random;
    let aborts = cfg.variant == Variant::Ours && !in_warmup;
    let mut pushed_this_episode = false;
    let mut forward_steps = 0u32;
    let mut episode_return = 0.0;
    let mut cur_obs = agent_observation(world, spec, &cfg.features);
    loop {
        // Novelty check at the current state, before acting.
        let nov_obs = if learning {
            let nov_obs = observe(world, spec, &cfg.rnd);
            let value = model.novelty(&nov_obs);
            if in_warmup {
                warmup_pool.push(value);
            }
            if aborts && value >= model.lambda0 {
                if pushed_this_episode {
                    buffer.mark_last_abort();
                }
                return Ok(ForwardPhase {
                    cause: EndCause::Abort,
                    abort_step: Some(forward_steps + 1),
                    forward_steps,
                    episode_return,
                });
            }
            Some(nov_obs)
        } else {
            None
        };

        let action = if cfg.variant == Variant::Random {
            Action::ALL[rng.random_range(0..Action::ALL.len())]
        } else {
            bundle.act(&cur_obs, ActMode::Sample, rng)?
        };
        let out = step_world(world, action, spec)?;
        forward_steps += 1;
        let reward = step_reward(
            spec.reward_kind,
            &out.flags,
            out.world.ego.speed,
            spec.limits.v_max,
            &cfg.reward,
        )?;
        episode_return += reward;
        let next_obs = agent_observation(&out.world, spec, &cfg.features);

        if let Some(nov_obs) = nov_obs {
            buffer.push(Transition {
                obs: std::mem::take(&mut cur_obs),
                action: action.index(),
                reward,
                next_obs: next_obs.clone(),
                terminal: out.flags.reached_goal || out.flags.collision_or_unsafe,
                abort: false,
                novelty_obs: nov_obs,
            });
            pushed_this_episode = true;
            if buffer.len() >= cfg.sac.batch_size {
                let batch = buffer.sample(rng, cfg.sac.batch_size);
                match bundle.update(&batch) {
                    Ok(_) => {}
                    Err(SacError::Nn(crate::nn::NnError::NonFiniteGradient)) => {
                        *skipped_updates += 1;
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            if cfg.rnd.update_every > 0
                && out.world.tick % cfg.rnd.update_every as u64 == 0
                && buffer.len() >= cfg.rnd.batch_size
            {
                let batch = buffer.sample(rng, cfg.rnd.batch_size);
                let obs_batch: Vec<&crate::rnd::NoveltyObservation> =
                    batch.iter().map(|t| &t.novelty_obs).collect();
                match model.train_predictor(&obs_batch) {
                    Ok(_) => {}
                    Err(crate::nn::NnError::NonFiniteGradient) => *skipped_updates += 1,
                    Err(e) => return Err(e.into()),
                }
            }
        }

        let flags = out.flags;
        *world = out.world;
        cur_obs = next_obs;
        if flags.collision_or_unsafe {
            return Ok(ForwardPhase {
                cause: EndCause::Collision,
                abort_step: None,
                forward_steps,
                episode_return,
            });
        }
        if flags.reached_goal {
            return Ok(ForwardPhase {
                cause: EndCause::Goal,
                abort_step: None,
                forward_steps,
                episode_return,
            });
        }
        if flags.stuck || flags.timeout {
            return Ok(ForwardPhase {
                cause: EndCause::Timeout,
                abort_step: None,
                forward_steps,
                episode_return,
            });
        }
    }
}

pub fn train(cfg: &RunConfig) -> Result<TrainOutput, RunError> {
    cfg.validate()?;
    let spec = ScenarioSpec::load(&cfg.scenario)?;
    let n = spec.n_initial();
    let mut rng = ChaCha8Rng::seed_from_u64(mix64(cfg.seed, 0x7ea1, 0));
    let mut bundle = PolicyBundle::new(cfg.features.dim(), &cfg.sac, mix64(cfg.seed, 0x5ac0, 0));
    let mut model = NoveltyModel::new(&cfg.rnd, mix64(cfg.seed, 0x12d0, 0));
    let mut curriculum = CurriculumState::new(n, &cfg.curriculum);
    let mut buffer = ReplayBuffer::new(cfg.sac.buffer_capacity);
    let mut warmup_pool: Vec<f64> = Vec::new();
    let mut records: Vec<EpisodeRecord> = Vec::with_capacity(cfg.episodes as usize);
    let mut evals: Vec<EvalPoint> = Vec::new();
    let mut checkpoints: Vec<Checkpoint> = Vec::new();
    let mut visitation = vec![0u32; n];
    let mut mr_total = 0u32;
    let mut skipped_updates = 0u32;

    let mut next_initial: usize = rng.random_range(1..=n);
    let mut world = WorldState::reset(&spec, next_initial, mix64(cfg.seed, w_seed(1), 1))?;

    for k in 1..=cfg.episodes {
        let i_k = next_initial;
        visitation[i_k - 1] += 1;
        let init = spec.initial(i_k).expect("index sampled in range");
        world.mode = ModeFlags {
            traffic_enabled: init.informative,
            shuffle_obs: !init.informative,
        };
        world.begin_episode(EgoRoute::to_goal(&spec, i_k).expect("index in range"));

        let in_warmup = k <= cfg.warmup_episodes;
        let fwd = forward_phase(
            &mut world,
            &spec,
            cfg,
            &mut bundle,
            &mut model,
            &mut buffer,
            &mut rng,
            &mut warmup_pool,
            in_warmup,
            &mut skipped_updates,
        )?;

        // Calibrate the novelty thresholds once warmup data is complete.
        // The predictor already trained through warmup, so the early pool
        // values live on a stale scale: use the trailing window.
        if cfg.calibration.auto && k == cfg.warmup_episodes && !warmup_pool.is_empty() {
            let tail = warmup_pool.len().saturating_sub(CALIBRATION_WINDOW);
            let recent = &warmup_pool[tail..];
            model.lambda0 = percentile(recent, cfg.calibration.abort_percentile);
            curriculum.lambda1 = percentile(recent, cfg.calibration.lower_percentile);
            curriculum.lambda2 = percentile(recent, cfg.calibration.upper_percentile);
        }

        // Reset phase.
        let mut reset_outcome = ResetOutcomeTag::NotApplicable;
        let mut reset_steps = 0u32;
        let mut goal_tick = None;
        let mut curriculum_tick = None;
        let mut arrive_tick = None;
        let mut curriculum_rec = None;
        #[allow(unused_assignments)]
        let mut manual = false;

        match cfg.variant {
            Variant::Oracle | Variant::Random => {
                manual = true; // external reset after every episode
                next_initial = rng.random_range(1..=n);
                world = WorldState::reset(&spec, next_initial, mix64(cfg.seed, w_seed(2), k as u64 + 1))?;
            }
            Variant::OursNoCurr => {
                manual = matches!(fwd.cause, EndCause::Collision | EndCause::Timeout);
                next_initial = rng.random_range(1..=n);
                if fwd.cause == EndCause::Collision {
                    world =
                        WorldState::reset(&spec, next_initial, mix64(cfg.seed, w_seed(3), k as u64 + 1))?;
                } else {
                    match reset_rollout(
                        world.clone(),
                        &spec,
                        next_initial,
                        &cfg.reset,
                        spec.limits.t_reset,
                        None,
                    ) {
                        Ok(rollout) => {
                            reset_steps = rollout.steps;
                            goal_tick = rollout.goal_tick;
                            arrive_tick = rollout.arrive_tick;
                            if rollout.outcome == ResetOutcome::Reached {
                                reset_outcome = ResetOutcomeTag::Reached;
                                world = rollout.world;
                            } else {
                                reset_outcome = ResetOutcomeTag::Failed;
                                manual = true;
                                world = WorldState::reset(
                                    &spec,
                                    next_initial,
                                    mix64(cfg.seed, w_seed(4), k as u64 + 1),
                                )?;
                            }
                        }
                        Err(_) => {
                            reset_outcome = ResetOutcomeTag::Failed;
                            manual = true;
                            world = WorldState::reset(
                                &spec,
                                next_initial,
                                mix64(cfg.seed, w_seed(4), k as u64 + 1),
                            )?;
                        }
                    }
                }
            }
            Variant::Ours => {
                manual = matches!(fwd.cause, EndCause::Collision | EndCause::Timeout);
                let mut teleport = false;
                if fwd.cause == EndCause::Collision {
                    teleport = true;
                } else {
                    // Leg 1: drive to the goal, collecting reset-buffer
                    // observations only for aborted episodes.
                    let collect = fwd.cause == EndCause::Abort;
                    let mut leg1_ok = true;
                    if fwd.cause != EndCause::Goal {
                        match plan_reset(&world, &spec, i_k) {
                            Ok(plan) => {
                                if let Some(route) = plan.to_goal {
                                    let leg = drive_leg(
                                        world.clone(),
                                        &spec,
                                        route,
                                        &cfg.reset,
                                        spec.limits.t_reset,
                                        collect.then_some(&cfg.rnd),
                                    );
                                    reset_steps += leg.steps;
                                    world = leg.world;
                                    if collect {
                                        curriculum
                                            .ingest_reset_observations(i_k, leg.observations)
                                            .expect("index in range");
                                    }
                                    leg1_ok = leg.outcome == LegOutcome::Reached;
                                }
                            }
                            Err(_) => leg1_ok = false,
                        }
                    }
                    if leg1_ok {
                        goal_tick = Some(world.tick);
                    }
                    // Curriculum re-estimation at the goal (or after a
                    // failed leg, to pick the teleport target).
                    let informative = curriculum.informative_set(&model);
                    next_initial = curriculum.sample_next_initial(&mut rng);
                    curriculum_tick = Some(world.tick);
                    curriculum_rec = Some(CurriculumRecord {
                        scores: curriculum.last_scores().to_vec(),
                        informative: informative.iter().copied().collect(),
                    });
                    if leg1_ok {
                        // Leg 2: goal to the chosen initial state.
                        let budget = spec.limits.t_reset.saturating_sub(reset_steps);
                        match plan_reset(&world, &spec, next_initial) {
                            Ok(plan) => {
                                let leg = drive_leg(
                                    world.clone(),
                                    &spec,
                                    plan.to_initial,
                                    &cfg.reset,
                                    budget,
                                    None,
                                );
                                reset_steps += leg.steps;
                                world = leg.world;
                                if leg.outcome == LegOutcome::Reached {
                                    let anchor =
                                        spec.initial(next_initial).expect("in range").anchor;
                                    world.snap_to_anchor(anchor);
                                    world.terminal = None;
                                    arrive_tick = Some(world.tick);
                                    reset_outcome = ResetOutcomeTag::Reached;
                                } else {
                                    teleport = true;
                                }
                            }
                            Err(_) => teleport = true,
                        }
                    } else {
                        teleport = true;
                    }
                }
                if teleport {
                    if curriculum_rec.is_none() {
                        let informative = curriculum.informative_set(&model);
                        next_initial = curriculum.sample_next_initial(&mut rng);
                        curriculum_tick = Some(world.tick);
                        curriculum_rec = Some(CurriculumRecord {
                            scores: curriculum.last_scores().to_vec(),
                            informative: informative.iter().copied().collect(),
                        });
                    }
                    if fwd.cause != EndCause::Collision {
                        reset_outcome = ResetOutcomeTag::Failed;
                    }
                    manual = true;
                    world = WorldState::reset(
                        &spec,
                        next_initial,
                        mix64(cfg.seed, w_seed(5), k as u64 + 1),
                    )?;
                }
            }
        }

        mr_total += manual as u32;
        records.push(EpisodeRecord {
            episode: k,
            initial_index: i_k,
            forward_steps: fwd.forward_steps,
            abort_step: fwd.abort_step,
            cause: fwd.cause,
            reset_outcome,
            reset_steps,
            manual_reset: manual,
            cumulative_manual_resets: mr_total,
            episode_return: fwd.episode_return,
            next_initial,
            curriculum: curriculum_rec,
            goal_tick,
            curriculum_tick,
            arrive_tick,
        });

        if k % cfg.eval_every == 0 || k == cfg.episodes {
            let (sr, avg) = evaluate(&bundle, &spec, cfg, cfg.eval_episodes, mix64(cfg.seed, 0xe7a1, k as u64))?;
            if evals.last().map(|e| e.after_episode) != Some(k) {
                evals.push(EvalPoint {
                    after_episode: k,
                    success_rate: sr,
                    avg_steps: avg,
                });
                if cfg.checkpoint_evals {
                    checkpoints.push(Checkpoint {
                        after_episode: k,
                        bytes: checkpoint_bytes(&bundle, &model)?,
                    });
                }
            }
        }
    }

    let last = evals.last().copied().unwrap_or(EvalPoint {
        after_episode: cfg.episodes,
        success_rate: 0.0,
        avg_steps: spec.limits.t_forward as f64,
    });
    Ok(TrainOutput {
        config: cfg.clone(),
        summary: MetricsSummary {
            scenario: spec.name.clone(),
            variant: cfg.variant,
            seed: cfg.seed,
            episodes: cfg.episodes,
            manual_resets: mr_total,
            success_rate: last.success_rate,
            avg_steps: last.avg_steps,
            visitation,
            eval: evals,
        },
        episodes: records,
        checkpoints,
        skipped_updates,
    })
}

/// Distinct world-seed stream tags.
fn w_seed(tag: u64) -> u64 {
    0x77_0000 + tag
}

/// Novelty values from roughly the last warmup episode or two; older ones
/// reflect a scale the predictor has already left behind.
const CALIBRATION_WINDOW: usize = 200;

//! Rule-based reset controller: plans a lane-graph route from the current
//! pose through the goal to a chosen initial state, and follows it with a
//! conservative stop/crawl/go cascade that yields at conflict zones.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rnd::{observe, NoveltyConfig, NoveltyObservation};
use crate::sim::lane_graph::Anchor;
use crate::sim::world::{occupancy_window, route_chain, step_world};
use crate::sim::{Action, EgoRoute, ScenarioSpec, WorldState};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResetConfig {
    /// Stop when the interacting gap falls below this (meters).
    pub hard_margin: f64,
    /// Crawl below this gap (meters).
    pub soft_margin: f64,
    /// Extra seconds of separation required around yield windows.
    pub clearance_margin: f64,
    /// Consecutive stopped steps against a stationary blocker before the
    /// rollout gives up.
    pub deadlock_steps: u32,
}

impl Default for ResetConfig {
    fn default() -> Self {
        Self {
            hard_margin: 4.0,
            soft_margin: 8.0,
            clearance_margin: 1.5,
            deadlock_steps: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ResetPhase {
    ToGoal,
    ToInitial,
}

/// Route through the goal anchor and onward to a target initial anchor.
#[derive(Debug, Clone)]
pub struct ResetPlan {
    /// None when the ego already stands at the goal.
    pub to_goal: Option<EgoRoute>,
    pub to_initial: EgoRoute,
    pub phase: ResetPhase,
    pub target_initial: usize,
}

#[derive(Debug, Error)]
pub enum ResetError {
    #[error("no lane-graph path from `{from}` to `{to}`")]
    NoPath { from: String, to: String },
    #[error("initial-state index {index} out of range 1..={n}")]
    IndexOutOfRange { index: usize, n: usize },
}

/// How close (meters along the edge) counts as standing at an anchor.
const AT_ANCHOR_TOL: f64 = 0.5;

/// Shortest edge chain from a mid-edge pose to an anchor, looping around
/// the graph when the target lies behind the pose. Edges obstructed by a
/// stationary vehicle are avoided.
fn route_from_pose(
    w: &WorldState,
    spec: &ScenarioSpec,
    edge: crate::sim::EdgeId,
    s: f64,
    target: Anchor,
) -> Option<EgoRoute> {
    if edge == target.edge && s <= target.s {
        return Some(EgoRoute::new(vec![edge], target.s));
    }
    let graph = &spec.graph;
    let blocked = |e: crate::sim::EdgeId| {
        w.scripted
            .iter()
            .any(|v| v.state.edge == e && v.state.speed < 0.05 && v.target_speed < 0.05)
    };
    let mut best: Option<Vec<crate::sim::EdgeId>> = None;
    let mut best_len = f64::INFINITY;
    for &succ in graph.successors(edge) {
        if succ != target.edge && blocked(succ) {
            continue;
        }
        if let Some(chain) = graph.route_avoiding(succ, target.edge, &blocked) {
            let len: f64 = chain.iter().map(|&e| graph.edge(e).length()).sum();
            if len < best_len {
                best_len = len;
                best = Some(chain);
            }
        }
    }
    let mut chain = vec![edge];
    chain.extend(best?);
    Some(EgoRoute::new(chain, target.s))
}

/// Plan the two reset legs: current pose -> goal anchor -> initial anchor.
pub fn plan_reset(
    w: &WorldState,
    spec: &ScenarioSpec,
    target_initial: usize,
) -> Result<ResetPlan, ResetError> {
    let init = spec
        .initial(target_initial)
        .ok_or(ResetError::IndexOutOfRange {
            index: target_initial,
            n: spec.n_initial(),
        })?;
    let goal = spec.goal;
    let at_goal = w.ego.edge == goal.edge && (w.ego.s - goal.s).abs() <= AT_ANCHOR_TOL;
    let to_goal = if at_goal {
        None
    } else {
        Some(
            route_from_pose(w, spec, w.ego.edge, w.ego.s, goal).ok_or_else(|| {
                ResetError::NoPath {
                    from: spec.graph.edge(w.ego.edge).name.clone(),
                    to: spec.graph.edge(goal.edge).name.clone(),
                }
            })?,
        )
    };
    let to_initial = route_from_pose(w, spec, goal.edge, goal.s, init.anchor).ok_or_else(|| {
        ResetError::NoPath {
            from: spec.graph.edge(goal.edge).name.clone(),
            to: spec.graph.edge(init.anchor.edge).name.clone(),
        }
    })?;
    Ok(ResetPlan {
        phase: if to_goal.is_some() {
            ResetPhase::ToGoal
        } else {
            ResetPhase::ToInitial
        },
        to_goal,
        to_initial,
        target_initial,
    })
}

/// Rule cascade on top of the gap components and conflict-zone clusters:
/// stop for a close leader, yield before an uncrossable zone cluster, and
/// once inside a cluster keep moving to clear it.
pub fn reset_act(w: &WorldState, spec: &ScenarioSpec, cfg: &ResetConfig) -> Action {
    let gaps = crate::sim::world::gap_components(w, spec);
    let clusters = zone_clusters(w, spec);
    let half_len = w.ego.length * 0.5;
    let inside = clusters
        .iter()
        .any(|c| c.d_in <= half_len && c.d_out >= -half_len);
    if gaps.leader < cfg.hard_margin {
        return Action::Stop;
    }
    if !inside {
        if let Some(d) = yield_distance(w, spec, cfg, &clusters) {
            let v = w.ego.speed;
            let stop_dist = v * v / (2.0 * spec.limits.a_max);
            // Stop at the line; creep toward it while it is still far.
            return if d <= stop_dist + cfg.hard_margin + 1.0 {
                Action::Stop
            } else {
                Action::Crawl
            };
        }
    }
    if gaps.leader < cfg.soft_margin {
        return Action::Crawl;
    }
    if inside {
        return Action::Go; // committed: clear the shared zone
    }
    if gaps.conflict < cfg.hard_margin {
        return Action::Stop;
    }
    if gaps.conflict < cfg.soft_margin {
        return Action::Crawl;
    }
    Action::Go
}

/// One conflict zone ahead on the ego chain, with the occupancy windows of
/// scripted vehicles bound for it. The geometry comes from the lane graph
/// alone, so commitment regions do not shift when traffic appears.
struct ZoneAhead {
    d_in: f64,
    d_out: f64,
    other_edge: crate::sim::EdgeId,
    other_range: (f64, f64),
    vehicle_windows: Vec<(f64, f64)>,
}

/// Zones merged into commitment regions: once inside a cluster the ego
/// keeps moving, and yielding happens only at cluster entry. The window
/// check stays per zone, since a vehicle sweeping one zone while the ego
/// occupies a different part of the cluster is no conflict.
struct ZoneCluster {
    d_in: f64,
    d_out: f64,
    zones: Vec<ZoneAhead>,
}

/// Zone intervals closer than this merge into one commitment.
const CLUSTER_MERGE_GAP: f64 = 3.0;

fn zone_clusters(w: &WorldState, spec: &ScenarioSpec) -> Vec<ZoneCluster> {
    let chain = route_chain(w, spec, 80.0);
    let mut zones: Vec<ZoneAhead> = Vec::new();
    for &(e, start) in &chain {
        for (other_edge, zone) in spec.graph.conflicts_involving(e) {
            let d_in = start + zone.range_a.0;
            let d_out = start + zone.range_a.1;
            if d_out < -w.ego.length {
                continue;
            }
            zones.push(ZoneAhead {
                d_in,
                d_out,
                other_edge,
                other_range: zone.range_b,
                vehicle_windows: Vec::new(),
            });
        }
    }
    for other in &w.scripted {
        for &(f, vstart) in &other.chain(spec, 80.0) {
            for z in zones.iter_mut().filter(|z| z.other_edge == f) {
                let o_in = vstart + z.other_range.0;
                let o_out = vstart + z.other_range.1;
                if o_out < 0.0 {
                    continue;
                }
                if let Some(win) =
                    occupancy_window(o_in, o_out, other.state.speed, other.state.length)
                {
                    z.vehicle_windows.push(win);
                }
            }
        }
    }
    zones.sort_by(|a, b| a.d_in.partial_cmp(&b.d_in).expect("finite distances"));
    let mut clusters: Vec<ZoneCluster> = Vec::new();
    for z in zones {
        match clusters.last_mut() {
            Some(c) if z.d_in <= c.d_out + CLUSTER_MERGE_GAP => {
                c.d_out = c.d_out.max(z.d_out);
                c.zones.push(z);
            }
            _ => clusters.push(ZoneCluster {
                d_in: z.d_in,
                d_out: z.d_out,
                zones: vec![z],
            }),
        }
    }
    clusters
}

/// How far ahead conflict clusters are evaluated for yielding.
const YIELD_HORIZON: f64 = 30.0;

/// Distance to the nearest cluster the ego must yield for, if any.
fn yield_distance(
    w: &WorldState,
    spec: &ScenarioSpec,
    cfg: &ResetConfig,
    clusters: &[ZoneCluster],
) -> Option<f64> {
    let limits = &spec.limits;
    let v = w.ego.speed;
    let stop_dist = v * v / (2.0 * limits.a_max);
    let m = cfg.clearance_margin;
    let mut nearest: Option<f64> = None;
    for c in clusters {
        // A cluster the ego can no longer stop short of is a commitment:
        // braking there would strand the vehicle on the crossing paths.
        if c.d_in <= stop_dist + 0.3 || c.d_in > YIELD_HORIZON {
            continue;
        }
        'zones: for z in &c.zones {
            // Ego window over this zone assuming full acceleration.
            let t_enter = time_to_cover(z.d_in, v, limits.v_max, limits.a_max);
            let t_clear = time_to_cover(z.d_out + w.ego.length, v, limits.v_max, limits.a_max);
            for &(o_enter, o_exit) in &z.vehicle_windows {
                if t_enter < o_exit + m && o_enter < t_clear + m {
                    nearest = Some(nearest.map_or(c.d_in, |d: f64| d.min(c.d_in)));
                    break 'zones;
                }
            }
        }
    }
    nearest
}

/// Seconds to cover `d` meters starting at `v0`, accelerating at `a` up to
/// `v_max` and cruising there.
fn time_to_cover(d: f64, v0: f64, v_max: f64, a: f64) -> f64 {
    if d <= 0.0 {
        return 0.0;
    }
    let t_acc = (v_max - v0).max(0.0) / a;
    let d_acc = v0 * t_acc + 0.5 * a * t_acc * t_acc;
    if d <= d_acc {
        ((v0 * v0 + 2.0 * a * d).sqrt() - v0) / a
    } else {
        t_acc + (d - d_acc) / v_max
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LegOutcome {
    Reached,
    Collision,
    BudgetExhausted,
    Deadlock,
}

#[derive(Debug)]
pub struct LegResult {
    pub outcome: LegOutcome,
    pub steps: u32,
    pub observations: Vec<NoveltyObservation>,
    pub world: WorldState,
}

/// Follow one route leg under the rule cascade. Collects novelty
/// observations when `collect` carries a grid config.
pub fn drive_leg(
    mut world: WorldState,
    spec: &ScenarioSpec,
    route: EgoRoute,
    cfg: &ResetConfig,
    budget: u32,
    collect: Option<&NoveltyConfig>,
) -> LegResult {
    let mut observations = Vec::new();
    if world.retarget(route).is_err() {
        return LegResult {
            outcome: LegOutcome::Collision,
            steps: 0,
            observations,
            world,
        };
    }
    let mut consecutive_stops = 0u32;
    for step in 1..=budget {
        let action = reset_act(&world, spec, cfg);
        if action == Action::Stop {
            consecutive_stops += 1;
            if consecutive_stops >= cfg.deadlock_steps && stationary_blocker(&world, spec, cfg) {
                return LegResult {
                    outcome: LegOutcome::Deadlock,
                    steps: step - 1,
                    observations,
                    world,
                };
            }
        } else {
            consecutive_stops = 0;
        }
        let out = match step_world(&world, action, spec) {
            Ok(o) => o,
            Err(_) => {
                return LegResult {
                    outcome: LegOutcome::Collision,
                    steps: step - 1,
                    observations,
                    world,
                }
            }
        };
        world = out.world;
        if let Some(ncfg) = collect {
            observations.push(observe(&world, spec, ncfg));
        }
        if out.flags.collision_or_unsafe {
            return LegResult {
                outcome: LegOutcome::Collision,
                steps: step,
                observations,
                world,
            };
        }
        if out.flags.reached_goal {
            return LegResult {
                outcome: LegOutcome::Reached,
                steps: step,
                observations,
                world,
            };
        }
    }
    LegResult {
        outcome: LegOutcome::BudgetExhausted,
        steps: budget,
        observations,
        world,
    }
}

/// A stationary vehicle that actually interacts with the ego route: a
/// leader on the chain or a conflict-zone occupant near the ego.
fn stationary_blocker(w: &WorldState, spec: &ScenarioSpec, cfg: &ResetConfig) -> bool {
    let chain = route_chain(w, spec, 80.0);
    let (ego_pos, _) = w.ego.pose(spec);
    w.scripted.iter().any(|v| {
        if v.state.speed >= 0.05 {
            return false;
        }
        let near = ego_pos.dist(v.state.pose(spec).0) - (w.ego.length + v.state.length) * 0.5
            < cfg.soft_margin;
        if !near {
            return false;
        }
        chain.iter().any(|&(e, start)| {
            if e == v.state.edge && start + v.state.s > 0.0 {
                return true; // stationary leader
            }
            match spec.graph.conflict(e, v.state.edge) {
                Some(zone) => {
                    // Occupying a shared zone the ego still has to cross.
                    let in_zone =
                        (zone.range_b.0..=zone.range_b.1).contains(&v.state.s);
                    in_zone && start + zone.range_a.1 > 0.0
                }
                None => false,
            }
        })
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResetOutcome {
    Reached,
    Failed,
}

#[derive(Debug)]
pub struct ResetRollout {
    /// Novelty observations from the to-goal leg only.
    pub observations: Vec<NoveltyObservation>,
    pub outcome: ResetOutcome,
    pub steps: u32,
    pub world: WorldState,
    pub goal_tick: Option<u64>,
    pub arrive_tick: Option<u64>,
}

/// Full reset: drive to the goal (collecting observations), then onward to
/// the target initial anchor. Failure is an outcome, not an error.
pub fn reset_rollout(
    world: WorldState,
    spec: &ScenarioSpec,
    target_initial: usize,
    cfg: &ResetConfig,
    budget: u32,
    collect: Option<&NoveltyConfig>,
) -> Result<ResetRollout, ResetError> {
    let plan = plan_reset(&world, spec, target_initial)?;
    let mut steps = 0;
    let mut world = world;
    let mut observations = Vec::new();
    if let Some(route) = plan.to_goal {
        let leg = drive_leg(world, spec, route, cfg, budget, collect);
        steps += leg.steps;
        world = leg.world;
        observations = leg.observations;
        if leg.outcome != LegOutcome::Reached {
            return Ok(ResetRollout {
                observations,
                outcome: ResetOutcome::Failed,
                steps,
                world,
                goal_tick: None,
                arrive_tick: None,
            });
        }
    }
    let goal_tick = Some(world.tick);
    let leg = drive_leg(world, spec, plan.to_initial, cfg, budget - steps, None);
    steps += leg.steps;
    world = leg.world;
    if leg.outcome != LegOutcome::Reached {
        return Ok(ResetRollout {
            observations,
            outcome: ResetOutcome::Failed,
            steps,
            world,
            goal_tick,
            arrive_tick: None,
        });
    }
    let anchor = spec.initial(target_initial).expect("validated index").anchor;
    world.snap_to_anchor(anchor);
    world.terminal = None;
    let arrive_tick = Some(world.tick);
    Ok(ResetRollout {
        observations,
        outcome: ResetOutcome::Reached,
        steps,
        world,
        goal_tick,
        arrive_tick,
    })
}

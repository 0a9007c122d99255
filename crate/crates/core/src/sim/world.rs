//! World state and the deterministic transition function: ego kinematics on
//! a routed edge chain, scripted traffic driven by spawn schedules, event
//! flags (goal, center-line crossing, collision/unsafe gap, stuck) and the
//! conflict-gap safety measure.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::geometry::{Footprint, Vec2};
use super::lane_graph::{Anchor, EdgeId};
use super::scenario::ScenarioSpec;

/// Speeds below this are treated as standing still.
const SPEED_EPS: f64 = 0.05;
/// Ego displacement per step below this counts as "no progress".
const PROGRESS_EPS: f64 = 0.01;
/// How far ahead along the ego route other vehicles are considered.
const SENSE_HORIZON: f64 = 80.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Action {
    Go,
    Crawl,
    Stop,
}

impl Action {
    pub const ALL: [Action; 3] = [Action::Go, Action::Crawl, Action::Stop];

    pub fn index(self) -> usize {
        match self {
            Action::Go => 0,
            Action::Crawl => 1,
            Action::Stop => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Action::ALL.get(i).copied()
    }

    pub fn target_speed(self, spec: &ScenarioSpec) -> f64 {
        match self {
            Action::Go => spec.limits.v_max,
            Action::Crawl => spec.limits.crawl_speed,
            Action::Stop => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    Ego,
    Scripted,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct VehicleState {
    pub edge: EdgeId,
    pub s: f64,
    pub lateral: f64,
    pub speed: f64,
    pub length: f64,
    pub width: f64,
    pub role: Role,
}

impl VehicleState {
    pub fn pose(&self, spec: &ScenarioSpec) -> (Vec2, Vec2) {
        let (center, heading) = spec.graph.edge(self.edge).centerline.point_at(self.s);
        (center.add(heading.perp().scale(self.lateral)), heading)
    }

    pub fn footprint(&self, spec: &ScenarioSpec) -> Footprint {
        let (center, heading) = self.pose(spec);
        Footprint {
            center,
            heading,
            half_len: self.length * 0.5,
            half_wid: self.width * 0.5,
        }
    }
}

/// Edge chain the ego follows, ending at `target_s` on the last edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EgoRoute {
    pub edges: Vec<EdgeId>,
    pub pos: usize,
    pub target_s: f64,
}

impl EgoRoute {
    pub fn new(edges: Vec<EdgeId>, target_s: f64) -> Self {
        Self {
            edges,
            pos: 0,
            target_s,
        }
    }

    /// Forward-task route for initial anchor `index` (1-based).
    pub fn to_goal(spec: &ScenarioSpec, index: usize) -> Option<Self> {
        let init = spec.initial(index)?;
        Some(Self::new(init.route.clone(), spec.goal.s))
    }

    pub fn current_edge(&self) -> EdgeId {
        self.edges[self.pos]
    }

    /// Remaining edges from the current one.
    pub fn remaining(&self) -> &[EdgeId] {
        &self.edges[self.pos..]
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScriptedVehicle {
    pub state: VehicleState,
    pub route: Vec<EdgeId>,
    pub route_pos: usize,
    pub target_speed: f64,
    pub stream: u32,
}

impl ScriptedVehicle {
    /// Remaining scripted route as (edge, distance of its start from the
    /// vehicle position), cut off at `horizon` meters.
    pub(crate) fn chain(&self, spec: &ScenarioSpec, horizon: f64) -> Vec<(EdgeId, f64)> {
        let mut chain = Vec::with_capacity(self.route.len() - self.route_pos);
        let mut offset = -self.state.s;
        for &e in &self.route[self.route_pos..] {
            chain.push((e, offset));
            offset += spec.graph.edge(e).length();
            if offset > horizon {
                break;
            }
        }
        chain
    }
}

/// Episode-level behavior switches, set from the originating initial anchor.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ModeFlags {
    pub traffic_enabled: bool,
    pub shuffle_obs: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Terminal {
    Goal,
    Collision,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorldState {
    pub ego: VehicleState,
    pub route: EgoRoute,
    pub scripted: Vec<ScriptedVehicle>,
    /// Simulation ticks since the last teleport reset.
    pub tick: u64,
    /// Steps since the current episode or reset leg began.
    pub episode_step: u32,
    pub seed: u64,
    spawned: Vec<u32>,
    pub stuck_counter: u32,
    pub terminal: Option<Terminal>,
    pub mode: ModeFlags,
}

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("initial-state index {index} out of range 1..={n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("cannot step a terminal world state ({0:?})")]
    Terminal(Terminal),
    #[error("cannot retarget a crashed world state")]
    RetargetAfterCollision,
}

/// Event flags produced by one transition.
#[derive(Debug, Clone, Copy)]
pub struct StepFlags {
    pub reached_goal: bool,
    pub crossed_center: bool,
    pub collision_or_unsafe: bool,
    pub survived: bool,
    pub timeout: bool,
    pub stuck: bool,
    /// Minimum interacting gap seen this step (meters, +inf when clear).
    pub min_gap: f64,
}

/// Result of advancing the world one tick.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub world: WorldState,
    pub flags: StepFlags,
}

impl WorldState {
    /// Place the ego at initial anchor `index` (1-based) with fresh traffic.
    pub fn reset(spec: &ScenarioSpec, index: usize, seed: u64) -> Result<WorldState, WorldError> {
        let n = spec.n_initial();
        let init = spec.initial(index).ok_or(WorldError::IndexOutOfRange { index, n })?;
        let limits = &spec.limits;
        let ego = VehicleState {
            edge: init.anchor.edge,
            s: init.anchor.s,
            lateral: 0.0,
            speed: 0.0,
            length: limits.vehicle_length,
            width: limits.vehicle_width,
            role: Role::Ego,
        };
        let mode = ModeFlags {
            traffic_enabled: init.informative,
            shuffle_obs: !init.informative,
        };
        let mut world = WorldState {
            ego,
            route: EgoRoute::new(init.route.clone(), spec.goal.s),
            scripted: Vec::new(),
            tick: 0,
            episode_step: 0,
            seed,
            spawned: vec![0; spec.streams.len()],
            stuck_counter: 0,
            terminal: None,
            mode,
        };
        if mode.traffic_enabled {
            world.prepopulate(spec);
            world.process_spawns(spec, 0.0);
        }
        Ok(world)
    }

    /// Begin a new episode in place: zero the step counter and route the ego
    /// toward the task goal. Traffic keeps flowing.
    pub fn begin_episode(&mut self, route: EgoRoute) {
        self.route = route;
        self.episode_step = 0;
        self.stuck_counter = 0;
        self.terminal = None;
    }

    /// Redirect the ego onto a new route (reset legs). Clears a goal
    /// terminal; a crashed world cannot be redirected.
    pub fn retarget(&mut self, route: EgoRoute) -> Result<(), WorldError> {
        if self.terminal == Some(Terminal::Collision) {
            return Err(WorldError::RetargetAfterCollision);
        }
        self.route = route;
        self.episode_step = 0;
        self.stuck_counter = 0;
        self.terminal = None;
        Ok(())
    }

    /// Snap the ego exactly onto an anchor at standstill.
    pub fn snap_to_anchor(&mut self, anchor: Anchor) {
        self.ego.edge = anchor.edge;
        self.ego.s = anchor.s;
        self.ego.lateral = 0.0;
        self.ego.speed = 0.0;
    }

    /// Remaining distance to the route target, along the edge chain.
    pub fn distance_to_target(&self, spec: &ScenarioSpec) -> f64 {
        let mut d = -self.ego.s;
        for (i, &e) in self.route.remaining().iter().enumerate() {
            let last = self.route.pos + i == self.route.edges.len() - 1;
            if last {
                d += self.route.target_s;
            } else {
                d += spec.graph.edge(e).length();
            }
        }
        d.max(0.0)
    }

    /// Total route length from its first edge to the target.
    pub fn route_length(&self, spec: &ScenarioSpec) -> f64 {
        let mut d = 0.0;
        for (i, &e) in self.route.edges.iter().enumerate() {
            if i == self.route.edges.len() - 1 {
                d += self.route.target_s;
            } else {
                d += spec.graph.edge(e).length();
            }
        }
        d
    }

    fn prepopulate(&mut self, spec: &ScenarioSpec) {
        for (m, stream) in spec.streams.iter().enumerate() {
            if !stream.prepopulate || stream.speed < SPEED_EPS {
                continue;
            }
            let Some(period) = stream.period else { continue };
            let route_len = route_length_from(spec, &stream.route, stream.spawn.s);
            // Serial -1, -2, ... spawned at times first - k*period.
            let mut k = 1i64;
            loop {
                let spawn_time = stream.first - k as f64 * period;
                let speed = jittered_speed(self.seed, m as u32, -k, stream);
                let traveled = -spawn_time * speed;
                if traveled > route_len || traveled < 0.0 {
                    break;
                }
                if let Some(v) = place_on_route(spec, stream, m as u32, speed, traveled) {
                    self.scripted.push(v);
                }
                k += 1;
            }
        }
    }

    fn process_spawns(&mut self, spec: &ScenarioSpec, now: f64) {
        if !self.mode.traffic_enabled {
            return;
        }
        for (m, stream) in spec.streams.iter().enumerate() {
            loop {
                let serial = self.spawned[m];
                let due = match stream.period {
                    Some(p) => stream.first + serial as f64 * p,
                    None if serial == 0 => stream.first,
                    None => break,
                };
                if due > now + 1e-9 {
                    break;
                }
                let speed = jittered_speed(self.seed, m as u32, serial as i64, stream);
                self.scripted.push(ScriptedVehicle {
                    state: VehicleState {
                        edge: stream.spawn.edge,
                        s: stream.spawn.s,
                        lateral: 0.0,
                        speed,
                        length: spec.limits.vehicle_length,
                        width: spec.limits.vehicle_width,
                        role: Role::Scripted,
                    },
                    route: stream.route.clone(),
                    route_pos: 0,
                    target_speed: speed,
                    stream: m as u32,
                });
                self.spawned[m] += 1;
            }
        }
    }

    /// Canonical little-endian byte form, for determinism checks.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(256);
        let f = |v: f64, out: &mut Vec<u8>| out.extend_from_slice(&v.to_bits().to_le_bytes());
        let vehicle = |v: &VehicleState, out: &mut Vec<u8>| {
            out.extend_from_slice(&v.edge.0.to_le_bytes());
            for x in [v.s, v.lateral, v.speed, v.length, v.width] {
                out.extend_from_slice(&x.to_bits().to_le_bytes());
            }
            out.push(matches!(v.role, Role::Ego) as u8);
        };
        vehicle(&self.ego, &mut out);
        out.extend_from_slice(&(self.route.edges.len() as u32).to_le_bytes());
        for e in &self.route.edges {
            out.extend_from_slice(&e.0.to_le_bytes());
        }
        out.extend_from_slice(&(self.route.pos as u32).to_le_bytes());
        f(self.route.target_s, &mut out);
        out.extend_from_slice(&(self.scripted.len() as u32).to_le_bytes());
        for v in &self.scripted {
            vehicle(&v.state, &mut out);
            out.extend_from_slice(&v.stream.to_le_bytes());
            out.extend_from_slice(&(v.route_pos as u32).to_le_bytes());
            f(v.target_speed, &mut out);
        }
        out.extend_from_slice(&self.tick.to_le_bytes());
        out.extend_from_slice(&self.episode_step.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        for s in &self.spawned {
            out.extend_from_slice(&s.to_le_bytes());
        }
        out.extend_from_slice(&self.stuck_counter.to_le_bytes());
        out.push(match self.terminal {
            None => 0,
            Some(Terminal::Goal) => 1,
            Some(Terminal::Collision) => 2,
        });
        out.push(self.mode.traffic_enabled as u8);
        out.push(self.mode.shuffle_obs as u8);
        out
    }
}

fn route_length_from(spec: &ScenarioSpec, route: &[EdgeId], start_s: f64) -> f64 {
    let mut len = -start_s;
    for &e in route {
        len += spec.graph.edge(e).length();
    }
    len.max(0.0)
}

fn place_on_route(
    spec: &ScenarioSpec,
    stream: &super::scenario::TrafficStream,
    stream_idx: u32,
    speed: f64,
    traveled: f64,
) -> Option<ScriptedVehicle> {
    let mut remaining = stream.spawn.s + traveled;
    for (i, &e) in stream.route.iter().enumerate() {
        let len = spec.graph.edge(e).length();
        if remaining <= len {
            return Some(ScriptedVehicle {
                state: VehicleState {
                    edge: e,
                    s: remaining,
                    lateral: 0.0,
                    speed,
                    length: spec.limits.vehicle_length,
                    width: spec.limits.vehicle_width,
                    role: Role::Scripted,
                },
                route: stream.route.clone(),
                route_pos: i,
                target_speed: speed,
                stream: stream_idx,
            });
        }
        remaining -= len;
    }
    None
}

/// Deterministic per-vehicle speed jitter derived from the world seed.
fn jittered_speed(seed: u64, stream: u32, serial: i64, s: &super::scenario::TrafficStream) -> f64 {
    if s.speed_jitter == 0.0 {
        return s.speed;
    }
    let u = crate::util::unit_hash(seed, stream as u64, serial as u64);
    (s.speed * (1.0 + s.speed_jitter * (2.0 * u - 1.0))).max(0.0)
}

/// First-order speed tracking with a symmetric acceleration clamp.
fn track_speed(v: f64, target: f64, a_max: f64, dt: f64, v_max: f64) -> f64 {
    let dv = (target - v).clamp(-a_max * dt, a_max * dt);
    (v + dv).clamp(0.0, v_max)
}

/// Advance the world one tick under `action`. Pure in (state, action, seed).
pub fn step_world(
    w: &WorldState,
    action: Action,
    spec: &ScenarioSpec,
) -> Result<StepOutcome, WorldError> {
    if let Some(t) = w.terminal {
        return Err(WorldError::Terminal(t));
    }
    let limits = &spec.limits;
    let dt = limits.tick;
    let mut next = w.clone();
    next.tick += 1;
    next.episode_step += 1;

    // Ego kinematics along its route.
    let target = action.target_speed(spec);
    next.ego.speed = track_speed(w.ego.speed, target, limits.a_max, dt, limits.v_max);
    let displacement = next.ego.speed * dt;
    let mut reached_goal = advance_ego(&mut next, spec, displacement);

    // Scripted traffic: constant-speed scripts, despawn at route end.
    let mut survivors = Vec::with_capacity(next.scripted.len());
    for mut v in std::mem::take(&mut next.scripted) {
        v.state.speed = track_speed(v.state.speed, v.target_speed, limits.a_max, dt, f64::MAX);
        let mut remaining = v.state.speed * dt;
        let mut alive = true;
        while remaining > 0.0 {
            let len = spec.graph.edge(v.state.edge).length();
            if v.state.s + remaining <= len {
                v.state.s += remaining;
                remaining = 0.0;
            } else {
                remaining -= len - v.state.s;
                if v.route_pos + 1 < v.route.len() {
                    v.route_pos += 1;
                    v.state.edge = v.route[v.route_pos];
                    v.state.s = 0.0;
                } else {
                    alive = false;
                    break;
                }
            }
        }
        if alive {
            survivors.push(v);
        }
    }
    next.scripted = survivors;
    next.process_spawns(spec, next.tick as f64 * dt);

    // Event flags.
    let ego_fp = next.ego.footprint(spec);
    let collision = next
        .scripted
        .iter()
        .any(|v| ego_fp.overlaps(&v.state.footprint(spec)));
    let min_gap = conflict_gap(&next, spec);
    let unsafe_gap = min_gap < limits.safe_distance;
    let collision_or_unsafe = collision || unsafe_gap;
    if collision_or_unsafe {
        reached_goal = false;
    }

    let edge = spec.graph.edge(next.ego.edge);
    let crossed_center = edge
        .center_cross
        .iter()
        .any(|&(lo, hi)| (lo..=hi).contains(&next.ego.s));

    if displacement < PROGRESS_EPS {
        next.stuck_counter += 1;
    } else {
        next.stuck_counter = 0;
    }
    let stuck = next.stuck_counter >= limits.stuck_steps;
    let timeout = next.episode_step >= limits.t_forward;
    let survived = !(reached_goal || collision_or_unsafe);

    next.terminal = if collision_or_unsafe {
        Some(Terminal::Collision)
    } else if reached_goal {
        Some(Terminal::Goal)
    } else {
        None
    };

    Ok(StepOutcome {
        world: next,
        flags: StepFlags {
            reached_goal,
            crossed_center,
            collision_or_unsafe,
            survived,
            timeout,
            stuck,
            min_gap,
        },
    })
}

/// Move the ego `displacement` meters along its route; true when the route
/// target was crossed this step.
fn advance_ego(next: &mut WorldState, spec: &ScenarioSpec, displacement: f64) -> bool {
    let mut remaining = displacement;
    loop {
        let on_last = next.route.pos == next.route.edges.len() - 1;
        let edge_len = spec.graph.edge(next.ego.edge).length();
        let limit = if on_last {
            next.route.target_s
        } else {
            edge_len
        };
        if next.ego.s + remaining < limit {
            next.ego.s += remaining;
            return false;
        }
        if on_last {
            next.ego.s = limit.min(edge_len);
            return true;
        }
        remaining -= limit - next.ego.s;
        next.route.pos += 1;
        next.ego.edge = next.route.edges[next.route.pos];
        next.ego.s = 0.0;
    }
}

/// Minimum interacting gap: same-route leader gaps and, for conflict zones
/// with overlapping occupancy windows, the euclidean bumper distance.
/// +inf when no vehicle interacts.
pub fn check_conflict_gap(w: &WorldState, spec: &ScenarioSpec) -> f64 {
    conflict_gap(w, spec)
}

/// Remaining route as (edge, chain distance of its start from the ego
/// position), cut off at `horizon` meters.
pub(crate) fn route_chain(w: &WorldState, spec: &ScenarioSpec, horizon: f64) -> Vec<(EdgeId, f64)> {
    let mut chain = Vec::with_capacity(w.route.remaining().len());
    let mut offset = -w.ego.s;
    for &e in w.route.remaining() {
        chain.push((e, offset));
        offset += spec.graph.edge(e).length();
        if offset > horizon {
            break;
        }
    }
    chain
}

/// Leader gap and window-gated conflict gap, separated so the reset
/// controller can treat them differently.
#[derive(Debug, Clone, Copy)]
pub(crate) struct GapComponents {
    pub leader: f64,
    pub conflict: f64,
}

pub(crate) fn gap_components(w: &WorldState, spec: &ScenarioSpec) -> GapComponents {
    let mut leader = f64::INFINITY;
    let mut conflict = f64::INFINITY;
    let ego = &w.ego;
    let ego_fp = ego.footprint(spec);
    let chain = route_chain(w, spec, SENSE_HORIZON);

    for v in &w.scripted {
        // Leader on the ego chain.
        for &(e, start) in &chain {
            if e == v.state.edge {
                let d = start + v.state.s;
                if d > 0.0 {
                    leader = leader.min(d - (ego.length + v.state.length) * 0.5);
                }
            }
        }
        // Conflict zones with temporal overlap, seen along the vehicle's
        // scripted route so approaching traffic counts before it reaches
        // the zone edge.
        let vchain = v.chain(spec, SENSE_HORIZON);
        for &(e, start) in &chain {
            for &(f, vstart) in &vchain {
                let Some(zone) = spec.graph.conflict(e, f) else {
                    continue;
                };
                let d_in = start + zone.range_a.0;
                let d_out = start + zone.range_a.1;
                if d_out < 0.0 {
                    continue; // ego already past this zone
                }
                let Some(ego_win) = occupancy_window(d_in, d_out, ego.speed, ego.length) else {
                    continue;
                };
                let o_in = vstart + zone.range_b.0;
                let o_out = vstart + zone.range_b.1;
                if o_out < 0.0 {
                    continue;
                }
                let Some(other_win) =
                    occupancy_window(o_in, o_out, v.state.speed, v.state.length)
                else {
                    continue;
                };
                if ego_win.0 < other_win.1 && other_win.0 < ego_win.1 {
                    conflict = conflict.min(ego_fp.distance(&v.state.footprint(spec)));
                }
            }
        }
    }
    GapComponents { leader, conflict }
}

fn conflict_gap(w: &WorldState, spec: &ScenarioSpec) -> f64 {
    let g = gap_components(w, spec);
    g.leader.min(g.conflict)
}

/// Time window [enter, exit) during which a vehicle occupies a zone whose
/// entry/exit lie `d_in`/`d_out` meters ahead, at constant speed. `None`
/// when it never enters.
pub(crate) fn occupancy_window(d_in: f64, d_out: f64, speed: f64, length: f64) -> Option<(f64, f64)> {
    if speed < SPEED_EPS {
        if d_in <= 0.0 {
            Some((0.0, f64::INFINITY)) // standing inside the zone
        } else {
            None
        }
    } else {
        Some((d_in.max(0.0) / speed, (d_out + length) / speed))
    }
}

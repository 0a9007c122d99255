//! Fixed-length observation vector for the forward policy: ego kinematics,
//! route progress, and script-derived conflict features of the nearest
//! scripted vehicles. Every component lies in [-1, 1].

use serde::{Deserialize, Serialize};

use crate::sim::geometry::Vec2;
use crate::sim::world::{occupancy_window, route_chain};
use crate::sim::{ScenarioSpec, WorldState};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureConfig {
    pub k_nearest: usize,
    pub sensing_radius: f64,
    /// Normalization horizon for time-to-conflict-zone, seconds.
    pub ttc_horizon: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            k_nearest: 4,
            sensing_radius: 40.0,
            ttc_horizon: 8.0,
        }
    }
}

impl FeatureConfig {
    pub fn dim(&self) -> usize {
        3 + 5 * self.k_nearest
    }
}

const FEATURES_PER_VEHICLE: usize = 5;
/// Feature block for a slot with no vehicle in it.
const ABSENT: [f64; FEATURES_PER_VEHICLE] = [1.0, 1.0, 0.0, 1.0, 0.0];

pub fn agent_observation(w: &WorldState, spec: &ScenarioSpec, cfg: &FeatureConfig) -> Vec<f64> {
    let v_max = spec.limits.v_max;
    let total = w.route_length(spec).max(1e-6);
    let to_go = w.distance_to_target(spec).min(total);
    let mut out = Vec::with_capacity(cfg.dim());
    out.push((w.ego.speed / v_max).clamp(0.0, 1.0));
    out.push(1.0 - to_go / total);
    out.push(to_go / total);

    let (ego_pos, heading) = w.ego.pose(spec);
    let right = Vec2::new(heading.y, -heading.x);
    let chain = route_chain(w, spec, cfg.sensing_radius * 2.0);

    // Nearest scripted vehicles by euclidean distance, index as tie-break.
    let mut order: Vec<(f64, usize)> = w
        .scripted
        .iter()
        .enumerate()
        .map(|(i, v)| (ego_pos.dist(v.state.pose(spec).0), i))
        .collect();
    order.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));

    for slot in 0..cfg.k_nearest {
        match order.get(slot) {
            Some(&(dist, i)) if dist <= cfg.sensing_radius => {
                let v = &w.scripted[i];
                let (pos, _) = v.state.pose(spec);
                let rel = pos.sub(ego_pos);
                out.push((rel.dot(heading) / cfg.sensing_radius).clamp(-1.0, 1.0));
                out.push((rel.dot(right) / cfg.sensing_radius).clamp(-1.0, 1.0));
                out.push((v.state.speed / v_max).clamp(0.0, 1.0));
                let (conflicting, ttz) = interaction(w, spec, &chain, i);
                out.push((ttz / cfg.ttc_horizon).clamp(0.0, 1.0));
                out.push(conflicting as u8 as f64);
            }
            _ => out.extend_from_slice(&ABSENT),
        }
    }
    out
}

/// Whether scripted vehicle `i` interacts with the ego route (leader on the
/// chain or conflict zone ahead of both), and its time to the shared zone.
fn interaction(
    w: &WorldState,
    spec: &ScenarioSpec,
    chain: &[(crate::sim::EdgeId, f64)],
    i: usize,
) -> (bool, f64) {
    let v = &w.scripted[i];
    let mut conflicting = false;
    let mut time_to_zone = f64::INFINITY;
    let vchain = v.chain(spec, 80.0);
    for &(e, start) in chain {
        if e == v.state.edge && start + v.state.s > 0.0 {
            conflicting = true; // leader ahead on the ego route
            time_to_zone = time_to_zone.min(0.0);
        }
        for &(f, vstart) in &vchain {
            let Some(zone) = spec.graph.conflict(e, f) else {
                continue;
            };
            if start + zone.range_a.1 < 0.0 {
                continue;
            }
            let o_in = vstart + zone.range_b.0;
            let o_out = vstart + zone.range_b.1;
            if o_out < 0.0 {
                continue;
            }
            conflicting = true;
            if let Some((t_in, _)) = occupancy_window(o_in, o_out, v.state.speed, v.state.length)
            {
                time_to_zone = time_to_zone.min(t_in);
            }
        }
    }
    (conflicting, time_to_zone)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::WorldState;

    #[test]
    fn observation_has_fixed_dim_and_bounded_components() {
        let spec = ScenarioSpec::builtin("four_way").unwrap();
        let cfg = FeatureConfig::default();
        for index in 1..=spec.n_initial() {
            let mut w = WorldState::reset(&spec, index, 33).unwrap();
            for step in 0..40 {
                let obs = agent_observation(&w, &spec, &cfg);
                assert_eq!(obs.len(), cfg.dim());
                for (j, x) in obs.iter().enumerate() {
                    assert!(
                        (-1.0..=1.0).contains(x),
                        "component {j} = {x} out of range at step {step}"
                    );
                }
                let action = crate::sim::Action::ALL[step % 3];
                match crate::sim::step_world(&w, action, &spec) {
                    Ok(o) => w = o.world,
                    Err(_) => break,
                }
            }
        }
    }

    #[test]
    fn empty_road_uses_sentinel_blocks() {
        let spec = ScenarioSpec::builtin("corridor").unwrap();
        let cfg = FeatureConfig::default();
        let w = WorldState::reset(&spec, 1, 1).unwrap();
        let obs = agent_observation(&w, &spec, &cfg);
        for slot in 0..cfg.k_nearest {
            assert_eq!(&obs[3 + slot * 5..3 + (slot + 1) * 5], &ABSENT);
        }
    }
}

//! Per-step rewards: the detour reward over event indicators and the shared
//! intersection/roundabout reward over normalized speed.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::world::StepFlags;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardWeights {
    pub lambda_g: f64,
    pub lambda_p: f64,
    pub lambda_c: f64,
    pub lambda_s: f64,
    pub lambda_v: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            lambda_g: 100.0,
            lambda_p: 1.0,
            lambda_c: 50.0,
            lambda_s: 0.1,
            lambda_v: 1.0,
        }
    }
}

impl RewardWeights {
    pub fn validate(&self) -> Result<(), RewardError> {
        let all = [
            self.lambda_g,
            self.lambda_p,
            self.lambda_c,
            self.lambda_s,
            self.lambda_v,
        ];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(RewardError::InvalidWeights);
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum RewardError {
    #[error("reward weights must be finite and non-negative")]
    InvalidWeights,
    #[error("speed {v_t} outside [0, {v_max}]")]
    SpeedOutOfRange { v_t: f64, v_max: f64 },
}

fn ind(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Detour-task reward over the goal / center-line / collision / survive
/// indicators.
pub fn detour_reward(o: &StepFlags, w: &RewardWeights) -> f64 {
    w.lambda_g * ind(o.reached_goal)
        - w.lambda_p * ind(o.crossed_center)
        - w.lambda_c * ind(o.collision_or_unsafe)
        - w.lambda_s * ind(o.survived)
}

/// Shared reward for the intersection and roundabout tasks: normalized speed
/// minus collision and survival penalties.
pub fn shared_reward(
    o: &StepFlags,
    v_t: f64,
    v_max: f64,
    w: &RewardWeights,
) -> Result<f64, RewardError> {
    if !(v_max > 0.0) || !(0.0..=v_max).contains(&v_t) {
        return Err(RewardError::SpeedOutOfRange { v_t, v_max });
    }
    Ok(w.lambda_v * (v_t / v_max)
        - w.lambda_c * ind(o.collision_or_unsafe)
        - w.lambda_s * ind(o.survived))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn flags(goal: bool, center: bool, collision: bool, survived: bool) -> StepFlags {
        StepFlags {
            reached_goal: goal,
            crossed_center: center,
            collision_or_unsafe: collision,
            survived,
            timeout: false,
            stuck: false,
            min_gap: f64::INFINITY,
        }
    }

    fn weights() -> RewardWeights {
        RewardWeights {
            lambda_g: 100.0,
            lambda_p: 1.0,
            lambda_c: 50.0,
            lambda_s: 0.1,
            lambda_v: 1.0,
        }
    }

    #[test]
    fn detour_all_flags_zero() {
        assert_eq!(detour_reward(&flags(false, false, false, false), &weights()), 0.0);
    }

    #[test]
    fn detour_goal_with_survive() {
        let r = detour_reward(&flags(true, false, false, true), &weights());
        assert!((r - 99.9).abs() < 1e-12);
    }

    #[test]
    fn detour_center_and_collision() {
        let r = detour_reward(&flags(false, true, true, true), &weights());
        assert!((r - (-51.1)).abs() < 1e-12);
    }

    #[test]
    fn shared_full_speed() {
        let w = RewardWeights {
            lambda_v: 1.0,
            lambda_s: 0.1,
            ..weights()
        };
        let r = shared_reward(&flags(false, false, false, true), 5.0, 5.0, &w).unwrap();
        assert!((r - 0.9).abs() < 1e-12);
    }

    #[test]
    fn shared_collision_at_standstill() {
        let r = shared_reward(&flags(false, false, true, true), 0.0, 5.0, &weights()).unwrap();
        assert!((r - (-50.1)).abs() < 1e-12);
    }

    #[test]
    fn shared_half_speed() {
        let r = shared_reward(&flags(false, false, false, false), 2.5, 5.0, &weights()).unwrap();
        assert!((r - 0.5).abs() < 1e-12);
    }

    #[test]
    fn shared_rejects_bad_speed() {
        assert!(shared_reward(&flags(false, false, false, false), 6.0, 5.0, &weights()).is_err());
        assert!(shared_reward(&flags(false, false, false, false), -0.1, 5.0, &weights()).is_err());
    }

    #[test]
    fn toggling_one_flag_moves_reward_by_its_weight() {
        let w = weights();
        let base = detour_reward(&flags(false, false, false, false), &w);
        assert_eq!(detour_reward(&flags(true, false, false, false), &w) - base, w.lambda_g);
        assert_eq!(base - detour_reward(&flags(false, true, false, false), &w), w.lambda_p);
        assert_eq!(base - detour_reward(&flags(false, false, true, false), &w), w.lambda_c);
        assert_eq!(base - detour_reward(&flags(false, false, false, true), &w), w.lambda_s);
    }
}

//! Deterministic, seeded 2D lane-graph driving micro-simulator.

pub mod geometry;
pub mod lane_graph;
pub mod scenario;
pub mod world;

pub use lane_graph::{Anchor, EdgeId, LaneGraph};
pub use scenario::{RewardKind, ScenarioError, ScenarioSpec};
pub use world::{
    check_conflict_gap, step_world, Action, EgoRoute, StepFlags, StepOutcome, Terminal,
    VehicleState, WorldError, WorldState,
};

//! Forward agent: observation features, replay storage and the discrete
//! soft actor-critic learner.

pub mod features;
pub mod replay;
pub mod sac;

pub use features::{agent_observation, FeatureConfig};
pub use replay::{ReplayBuffer, Transition};
pub use sac::{ActMode, LossReport, PolicyBundle, SacConfig, SacError};

//! A desk-scale framework for training a driving agent with as few manual
//! resets as possible: a seeded lane-graph micro-simulator, a discrete
//! soft actor-critic forward policy, prediction-error novelty for episode
//! aborts, a rule-based reset controller, and a novelty-banded curriculum
//! over initial states.

pub mod agent;
pub mod curriculum;
pub mod nn;
pub mod reset;
pub mod run;
pub mod reward;
pub mod rnd;
pub mod sim;
pub mod util;

//! Dual-system reinforcement-learning agent: a model-based planner and a
//! model-free learner arbitrated by a meta-controller that trades policy
//! entropy against inference cost, plus the navigation task and experiment
//! harness used to evaluate it.

pub mod cost;
pub mod dqn;
pub mod env;
pub mod error;
pub mod expert;
pub mod harness;
pub mod meta;
pub mod policy;

pub use error::{Error, Result};

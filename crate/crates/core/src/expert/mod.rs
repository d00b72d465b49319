//! The two experts. Both learn from every executed transition, whichever of
//! them chose the action, and share the softmax decision process.

pub mod mb;
pub mod mf;

use rand::Rng;

use crate::cost::InferenceCost;
use crate::env::{ActionId, StateId};
use crate::error::Result;
use crate::policy::{softmax, ProbDist};

pub use mb::{value_iteration, MbExpert, PlannerConfig, RewardModel, TransitionModel, ValueIterationResult};
pub use mf::{MfExpert, MfParams, QTable};

/// Action values for one state and what it cost to produce them.
#[derive(Debug, Clone, PartialEq)]
pub struct Inference {
    pub values: Vec<f64>,
    pub cost: InferenceCost,
}

pub trait Expert {
    /// Produces action values for `s`. This is the costly step the
    /// meta-controller inhibits for the losing expert.
    fn infer(&mut self, s: StateId) -> Result<Inference>;

    /// Turns action values into a softmax policy and samples from it.
    fn decide<R: Rng + ?Sized>(&self, values: &[f64], rng: &mut R) -> Result<(ActionId, ProbDist)>;

    fn learn(&mut self, s: StateId, a: ActionId, reward: f64, s_next: StateId) -> Result<()>;
}

/// Softmax decision shared by every value-based agent.
pub fn decide<R: Rng + ?Sized>(values: &[f64], tau: f64, rng: &mut R) -> Result<(ActionId, ProbDist)> {
    let dist = softmax(values, tau)?;
    let action = dist.sample(rng);
    Ok((action, dist))
}

pub(crate) fn check_reward(reward: f64) -> Result<()> {
    if reward != 0.0 && reward != 1.0 {
        return Err(crate::Error::Input(format!("reward must be 0 or 1, got {reward}")));
    }
    Ok(())
}

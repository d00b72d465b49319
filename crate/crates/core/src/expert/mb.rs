//! Model-based expert.
//!
//! The transition model keeps, for every (state, action), a FIFO window of the
//! last `N` observed successor states; `T(s, a, s')` is the share of `s'` in
//! that window, so probabilities are multiples of one over the window length.
//! The reward model remembers the latest reward seen for each
//! (state, action, successor). Planning is full-table value iteration from the
//! optimistic initial values; pairs that were never tried are left out of the
//! backups and keep their initial value.

use std::collections::VecDeque;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_reward, decide, Expert, Inference};
use crate::cost::CostModel;
use crate::env::{ActionId, Outcome, StateId};
use crate::error::{Error, Result};
use crate::policy::ProbDist;

#[derive(Debug, Clone)]
pub struct TransitionModel {
    num_states: usize,
    num_actions: usize,
    window_len: usize,
    windows: Vec<VecDeque<StateId>>,
}

impl TransitionModel {
    pub fn new(num_states: usize, num_actions: usize, window_len: usize) -> Self {
        TransitionModel {
            num_states,
            num_actions,
            window_len,
            windows: vec![VecDeque::with_capacity(window_len); num_states * num_actions],
        }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    fn check_ids(&self, s: StateId, a: ActionId) -> Result<()> {
        if s >= self.num_states || a >= self.num_actions {
            return Err(Error::Input(format!(
                "(state {s}, action {a}) outside a {}x{} model",
                self.num_states, self.num_actions
            )));
        }
        Ok(())
    }

    pub fn observe(&mut self, s: StateId, a: ActionId, s_next: StateId) -> Result<()> {
        self.check_ids(s, a)?;
        self.check_ids(s_next, 0)?;
        let window = &mut self.windows[s * self.num_actions + a];
        if window.len() == self.window_len {
            window.pop_front();
        }
        window.push_back(s_next);
        Ok(())
    }

    pub fn window(&self, s: StateId, a: ActionId) -> &VecDeque<StateId> {
        &self.windows[s * self.num_actions + a]
    }

    pub fn visited(&self, s: StateId, a: ActionId) -> bool {
        !self.window(s, a).is_empty()
    }

    /// `T(s, a, s')`; zero for an unvisited pair.
    pub fn prob(&self, s: StateId, a: ActionId, s_next: StateId) -> f64 {
        let window = self.window(s, a);
        if window.is_empty() {
            return 0.0;
        }
        window.iter().filter(|&&x| x == s_next).count() as f64 / window.len() as f64
    }

    /// Estimated successor distribution, in first-seen order; empty when the
    /// pair was never tried.
    pub fn outcomes(&self, s: StateId, a: ActionId) -> Vec<Outcome> {
        let window = self.window(s, a);
        let len = window.len() as f64;
        let mut outs: Vec<Outcome> = Vec::new();
        for &next in window {
            match outs.iter_mut().find(|o| o.next == next) {
                Some(o) => o.prob += 1.0,
                None => outs.push(Outcome { next, prob: 1.0 }),
            }
        }
        for o in &mut outs {
            o.prob /= len;
        }
        outs
    }
}

#[derive(Debug, Clone)]
pub struct RewardModel {
    num_actions: usize,
    /// Per (state, action): latest reward for each successor seen.
    last: Vec<Vec<(StateId, f64)>>,
}

impl RewardModel {
    pub fn new(num_states: usize, num_actions: usize) -> Self {
        RewardModel {
            num_actions,
            last: vec![Vec::new(); num_states * num_actions],
        }
    }

    pub fn record(&mut self, s: StateId, a: ActionId, s_next: StateId, reward: f64) {
        let cell = &mut self.last[s * self.num_actions + a];
        match cell.iter_mut().find(|(n, _)| *n == s_next) {
            Some(entry) => entry.1 = reward,
            None => cell.push((s_next, reward)),
        }
    }

    pub fn reward(&self, s: StateId, a: ActionId, s_next: StateId) -> f64 {
        self.last[s * self.num_actions + a]
            .iter()
            .find(|(n, _)| *n == s_next)
            .map(|(_, r)| *r)
            .unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    pub gamma: f64,
    /// Stop once the largest change over a sweep drops below this.
    pub epsilon_vi: f64,
    pub max_sweeps: usize,
    pub tau: f64,
    /// Sliding-window length of the transition model.
    pub window_len: usize,
    pub init_value: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            gamma: 0.95,
            epsilon_vi: 1e-3,
            max_sweeps: 100,
            tau: 0.02,
            window_len: 6,
            init_value: 1.0,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::param("mb.gamma", format!("must lie in (0, 1), got {}", self.gamma)));
        }
        if !(self.epsilon_vi > 0.0) {
            return Err(Error::param("mb.epsilon_vi", "must be positive"));
        }
        if self.max_sweeps == 0 {
            return Err(Error::param("mb.max_sweeps", "must be at least 1"));
        }
        if !(self.tau > 0.0) {
            return Err(Error::param("mb.tau", "must be positive"));
        }
        if self.window_len == 0 {
            return Err(Error::param("mb.window_len", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueIterationResult {
    /// Row-major `num_states x num_actions` action values.
    pub q: Vec<f64>,
    pub sweeps: usize,
    /// Visited pairs times sweeps: the deterministic cost proxy.
    pub backups: u64,
    pub converged: bool,
    /// Largest absolute change in each sweep.
    pub deltas: Vec<f64>,
}

struct Backup {
    index: usize,
    /// (successor, probability, reward)
    terms: Vec<(StateId, f64, f64)>,
}

/// Value iteration over the learnt models:
/// `Q(s,a) <- sum_s' T(s,a,s') [R(s,a,s') + gamma max_a' Q(s',a')]`,
/// with synchronous sweeps starting from `init_value` everywhere.
pub fn value_iteration(tm: &TransitionModel, rm: &RewardModel, config: &PlannerConfig) -> ValueIterationResult {
    let (ns, na) = (tm.num_states, tm.num_actions);
    let mut backups_list = Vec::new();
    for s in 0..ns {
        for a in 0..na {
            if !tm.visited(s, a) {
                continue;
            }
            let terms = tm
                .outcomes(s, a)
                .into_iter()
                .map(|o| (o.next, o.prob, rm.reward(s, a, o.next)))
                .collect();
            backups_list.push(Backup { index: s * na + a, terms });
        }
    }

    let mut q = vec![config.init_value; ns * na];
    let mut v = vec![0.0; ns];
    let mut deltas = Vec::new();
    let mut converged = false;
    if backups_list.is_empty() {
        converged = true;
    }
    while !converged && deltas.len() < config.max_sweeps {
        for (s, vs) in v.iter_mut().enumerate() {
            *vs = q[s * na..(s + 1) * na]
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max);
        }
        let mut delta: f64 = 0.0;
        for b in &backups_list {
            let new: f64 = b
                .terms
                .iter()
                .map(|&(next, p, r)| p * (r + config.gamma * v[next]))
                .sum();
            delta = delta.max((new - q[b.index]).abs());
            q[b.index] = new;
        }
        deltas.push(delta);
        converged = delta < config.epsilon_vi;
    }
    let sweeps = deltas.len();
    ValueIterationResult {
        q,
        sweeps,
        backups: (backups_list.len() * sweeps) as u64,
        converged,
        deltas,
    }
}

#[derive(Debug, Clone)]
pub struct MbExpert {
    config: PlannerConfig,
    transitions: TransitionModel,
    rewards: RewardModel,
    cost: CostModel,
}

impl MbExpert {
    pub fn new(num_states: usize, num_actions: usize, config: PlannerConfig, cost: CostModel) -> Self {
        MbExpert {
            config,
            transitions: TransitionModel::new(num_states, num_actions, config.window_len),
            rewards: RewardModel::new(num_states, num_actions),
            cost,
        }
    }

    pub fn transitions(&self) -> &TransitionModel {
        &self.transitions
    }

    pub fn rewards(&self) -> &RewardModel {
        &self.rewards
    }

    pub fn config(&self) -> &PlannerConfig {
        &self.config
    }

    pub fn plan(&self) -> ValueIterationResult {
        value_iteration(&self.transitions, &self.rewards, &self.config)
    }

    /// The agent's current beliefs as a world-file-shaped JSON document:
    /// raw windows plus derived probabilities and remembered rewards for every
    /// visited pair.
    pub fn model_json(&self) -> serde_json::Value {
        let na = self.transitions.num_actions;
        let mut entries = Vec::new();
        for s in 0..self.transitions.num_states {
            for a in 0..na {
                if !self.transitions.visited(s, a) {
                    continue;
                }
                let outcomes: Vec<serde_json::Value> = self
                    .transitions
                    .outcomes(s, a)
                    .iter()
                    .map(|o| {
                        serde_json::json!({
                            "next": o.next,
                            "prob": o.prob,
                            "reward": self.rewards.reward(s, a, o.next),
                        })
                    })
                    .collect();
                entries.push(serde_json::json!({
                    "state": s,
                    "action": a,
                    "window": self.transitions.window(s, a),
                    "outcomes": outcomes,
                }));
            }
        }
        serde_json::json!({
            "num_states": self.transitions.num_states,
            "num_actions": na,
            "window_len": self.transitions.window_len,
            "transitions": entries,
        })
    }
}

impl Expert for MbExpert {
    fn infer(&mut self, s: StateId) -> Result<Inference> {
        self.transitions.check_ids(s, 0)?;
        let start = Instant::now();
        let plan = self.plan();
        let na = self.transitions.num_actions;
        let values = plan.q[s * na..(s + 1) * na].to_vec();
        Ok(Inference {
            values,
            cost: self.cost.planner(plan.backups, start.elapsed()),
        })
    }

    fn decide<R: Rng + ?Sized>(&self, values: &[f64], rng: &mut R) -> Result<(ActionId, ProbDist)> {
        decide(values, self.config.tau, rng)
    }

    fn learn(&mut self, s: StateId, a: ActionId, reward: f64, s_next: StateId) -> Result<()> {
        check_reward(reward)?;
        self.transitions.observe(s, a, s_next)?;
        self.rewards.record(s, a, s_next, reward);
        Ok(())
    }
}

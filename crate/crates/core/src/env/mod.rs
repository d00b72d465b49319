//! The discrete navigation MDP: stochastic stepping, episode resets and
//! scheduled changes (goal relocation, obstacle introduction).

mod arena;
mod io;

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use arena::{generate_arena, ArenaLayout, ArenaParams, Direction, GeneratedArena};
pub use io::{load_world, save_world, world_from_json, world_to_json};

use crate::error::{Error, Result};
use crate::policy::PROB_TOL;

pub type StateId = usize;
pub type ActionId = usize;

/// One possible result of taking an action.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub next: StateId,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum ChangeKind {
    RewardMove { new_goal: StateId },
    AddObstacles { blocked: Vec<(StateId, ActionId)> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangeEvent {
    pub at_step: u64,
    #[serde(flatten)]
    pub kind: ChangeKind,
}

impl ChangeEvent {
    pub fn reward_move(at_step: u64, new_goal: StateId) -> Self {
        ChangeEvent {
            at_step,
            kind: ChangeKind::RewardMove { new_goal },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub next_state: StateId,
    pub reward: f64,
    pub episode_reset: bool,
    pub post_reset_state: Option<StateId>,
}

impl StepOutcome {
    /// Where the agent actually stands for its next decision.
    pub fn position(&self) -> StateId {
        self.post_reset_state.unwrap_or(self.next_state)
    }
}

/// A tabular stochastic MDP with a single rewarded goal state.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldModel {
    num_states: usize,
    num_actions: usize,
    /// Outcome lists indexed by `state * num_actions + action`.
    transitions: Vec<Vec<Outcome>>,
    goal: StateId,
    resets: Vec<StateId>,
    schedule: Vec<ChangeEvent>,
}

impl WorldModel {
    /// Builds a world from its parts, enforcing every structural invariant.
    pub fn new(
        num_states: usize,
        num_actions: usize,
        transitions: Vec<Vec<Outcome>>,
        goal: StateId,
        resets: Vec<StateId>,
        schedule: Vec<ChangeEvent>,
    ) -> Result<Self> {
        let world = WorldModel {
            num_states,
            num_actions,
            transitions,
            goal,
            resets,
            schedule,
        };
        world.check()?;
        Ok(world)
    }

    fn check(&self) -> Result<()> {
        if self.num_states == 0 || self.num_actions == 0 {
            return Err(Error::Input("world needs at least one state and one action".into()));
        }
        if self.transitions.len() != self.num_states * self.num_actions {
            return Err(Error::Input(format!(
                "expected {} (state, action) entries, found {}",
                self.num_states * self.num_actions,
                self.transitions.len()
            )));
        }
        for (idx, outcomes) in self.transitions.iter().enumerate() {
            let (s, a) = (idx / self.num_actions, idx % self.num_actions);
            if let Some(o) = outcomes.iter().find(|o| o.next >= self.num_states) {
                return Err(Error::Input(format!(
                    "state {s}, action {a}: next state {} out of range",
                    o.next
                )));
            }
            if outcomes.iter().any(|o| !o.prob.is_finite() || o.prob < 0.0) {
                return Err(Error::Input(format!("state {s}, action {a}: negative probability")));
            }
            let sum: f64 = outcomes.iter().map(|o| o.prob).sum();
            if (sum - 1.0).abs() > PROB_TOL {
                return Err(Error::Normalization { state: s, action: a, sum });
            }
        }
        self.check_state(self.goal, "goal")?;
        if self.resets.is_empty() {
            return Err(Error::Input("world needs at least one reset state".into()));
        }
        for &r in &self.resets {
            self.check_state(r, "reset state")?;
        }
        for ev in &self.schedule {
            match &ev.kind {
                ChangeKind::RewardMove { new_goal } => self.check_state(*new_goal, "new goal")?,
                ChangeKind::AddObstacles { blocked } => {
                    for &(s, a) in blocked {
                        self.check_pair(s, a)?;
                    }
                }
            }
        }
        Ok(())
    }

    fn check_state(&self, s: StateId, what: &str) -> Result<()> {
        if s >= self.num_states {
            return Err(Error::Input(format!(
                "{what} {s} out of range (num_states = {})",
                self.num_states
            )));
        }
        Ok(())
    }

    fn check_pair(&self, s: StateId, a: ActionId) -> Result<()> {
        self.check_state(s, "state")?;
        if a >= self.num_actions {
            return Err(Error::Input(format!(
                "action {a} out of range (num_actions = {})",
                self.num_actions
            )));
        }
        Ok(())
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn goal(&self) -> StateId {
        self.goal
    }

    pub fn resets(&self) -> &[StateId] {
        &self.resets
    }

    pub fn schedule(&self) -> &[ChangeEvent] {
        &self.schedule
    }

    pub fn set_schedule(&mut self, schedule: Vec<ChangeEvent>) -> Result<()> {
        let old = std::mem::replace(&mut self.schedule, schedule);
        if let Err(e) = self.check() {
            self.schedule = old;
            return Err(e);
        }
        Ok(())
    }

    pub fn outcomes(&self, s: StateId, a: ActionId) -> &[Outcome] {
        &self.transitions[s * self.num_actions + a]
    }

    /// Probability of landing in `next` after `(s, a)`.
    pub fn prob(&self, s: StateId, a: ActionId, next: StateId) -> f64 {
        self.outcomes(s, a)
            .iter()
            .filter(|o| o.next == next)
            .map(|o| o.prob)
            .sum()
    }

    /// Draws a start position uniformly among the reset states.
    pub fn sample_reset<R: Rng + ?Sized>(&self, rng: &mut R) -> StateId {
        self.resets[rng.gen_range(0..self.resets.len())]
    }

    /// Samples one transition. Entering the goal pays a unit reward and
    /// teleports the agent to a random reset state.
    pub fn step<R: Rng + ?Sized>(
        &self,
        current: StateId,
        action: ActionId,
        rng: &mut R,
    ) -> Result<StepOutcome> {
        self.check_pair(current, action)?;
        let outcomes = self.outcomes(current, action);
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut next_state = outcomes.last().map(|o| o.next).unwrap_or(current);
        for o in outcomes {
            acc += o.prob;
            if u < acc {
                next_state = o.next;
                break;
            }
        }
        if next_state == self.goal {
            let reset = self.sample_reset(rng);
            Ok(StepOutcome {
                next_state,
                reward: 1.0,
                episode_reset: true,
                post_reset_state: Some(reset),
            })
        } else {
            Ok(StepOutcome {
                next_state,
                reward: 0.0,
                episode_reset: false,
                post_reset_state: None,
            })
        }
    }

    /// Applies every scheduled change whose `at_step` equals `global_step`.
    /// Returns the number of events applied. Re-applying the same step is a
    /// no-op in effect.
    pub fn apply_schedule(&mut self, global_step: u64) -> usize {
        let due: Vec<ChangeKind> = self
            .schedule
            .iter()
            .filter(|ev| ev.at_step == global_step)
            .map(|ev| ev.kind.clone())
            .collect();
        for kind in &due {
            match kind {
                ChangeKind::RewardMove { new_goal } => self.goal = *new_goal,
                ChangeKind::AddObstacles { blocked } => {
                    for &(s, a) in blocked {
                        self.transitions[s * self.num_actions + a] = vec![Outcome { next: s, prob: 1.0 }];
                    }
                }
            }
        }
        due.len()
    }

    /// Breadth-first distances over transitions with non-zero probability.
    /// Unreachable states are `None`.
    pub fn bfs_distances(&self, from: StateId) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.num_states];
        let mut queue = VecDeque::new();
        dist[from] = Some(0);
        queue.push_back(from);
        while let Some(s) = queue.pop_front() {
            let d = dist[s].unwrap_or(0);
            for a in 0..self.num_actions {
                for o in self.outcomes(s, a) {
                    if o.prob > 0.0 && dist[o.next].is_none() {
                        dist[o.next] = Some(d + 1);
                        queue.push_back(o.next);
                    }
                }
            }
        }
        dist
    }

    /// Checks that the current goal and every scheduled goal are reachable
    /// from every reset state, with the schedule applied in order.
    pub fn validate(&self) -> Result<()> {
        let mut world = self.clone();
        let mut steps: Vec<u64> = self.schedule.iter().map(|e| e.at_step).collect();
        steps.sort_unstable();
        steps.dedup();
        world.check_reachable()?;
        for step in steps {
            world.apply_schedule(step);
            world.check_reachable()?;
        }
        Ok(())
    }

    fn check_reachable(&self) -> Result<()> {
        for &r in &self.resets {
            let dist = self.bfs_distances(r);
            if dist[self.goal].is_none() {
                return Err(Error::Validation(format!(
                    "goal {} is unreachable from reset state {r}",
                    self.goal
                )));
            }
        }
        Ok(())
    }
}

//! JSON world files.
//!
//! ```json
//! {
//!   "num_states": 38,
//!   "num_actions": 8,
//!   "transitions": [{"state": 0, "action": 0, "outcomes": [{"next": 1, "prob": 0.8}, ...]}, ...],
//!   "goal": 18,
//!   "resets": [0, 32],
//!   "schedule": [{"at_step": 1600, "kind": "reward_move", "payload": {"new_goal": 34}}]
//! }
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ChangeEvent, Outcome, StateId, WorldModel};
use crate::error::{Error, Result};
use crate::policy::PROB_TOL;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransitionEntry {
    state: StateId,
    action: usize,
    outcomes: Vec<Outcome>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WorldFile {
    num_states: usize,
    num_actions: usize,
    transitions: Vec<TransitionEntry>,
    goal: StateId,
    resets: Vec<StateId>,
    #[serde(default)]
    schedule: Vec<ChangeEvent>,
}

pub fn world_to_json(world: &WorldModel) -> Result<String> {
    let mut transitions = Vec::with_capacity(world.num_states * world.num_actions);
    for s in 0..world.num_states {
        for a in 0..world.num_actions {
            transitions.push(TransitionEntry {
                state: s,
                action: a,
                outcomes: world.outcomes(s, a).to_vec(),
            });
        }
    }
    let file = WorldFile {
        num_states: world.num_states,
        num_actions: world.num_actions,
        transitions,
        goal: world.goal,
        resets: world.resets.clone(),
        schedule: world.schedule.clone(),
    };
    serde_json::to_string_pretty(&file).map_err(|e| Error::Parse {
        field: "<root>".into(),
        reason: e.to_string(),
    })
}

pub fn world_from_json(text: &str) -> Result<WorldModel> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: WorldFile = serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
        field: e.path().to_string(),
        reason: e.inner().to_string(),
    })?;

    let (ns, na) = (file.num_states, file.num_actions);
    let mut slots: Vec<Option<Vec<Outcome>>> = vec![None; ns * na];
    for (i, entry) in file.transitions.into_iter().enumerate() {
        let field = |name: &str| format!("transitions[{i}].{name}");
        if entry.state >= ns {
            return Err(Error::Parse {
                field: field("state"),
                reason: format!("state {} out of range", entry.state),
            });
        }
        if entry.action >= na {
            return Err(Error::Parse {
                field: field("action"),
                reason: format!("action {} out of range", entry.action),
            });
        }
        let sum: f64 = entry.outcomes.iter().map(|o| o.prob).sum();
        if (sum - 1.0).abs() > PROB_TOL {
            return Err(Error::Normalization {
                state: entry.state,
                action: entry.action,
                sum,
            });
        }
        let slot = &mut slots[entry.state * na + entry.action];
        if slot.is_some() {
            return Err(Error::Parse {
                field: field("state"),
                reason: format!("duplicate entry for ({}, {})", entry.state, entry.action),
            });
        }
        *slot = Some(entry.outcomes);
    }
    let mut transitions = Vec::with_capacity(slots.len());
    for (idx, slot) in slots.into_iter().enumerate() {
        match slot {
            Some(outs) => transitions.push(outs),
            None => {
                return Err(Error::Parse {
                    field: "transitions".into(),
                    reason: format!("missing entry for state {}, action {}", idx / na, idx % na),
                })
            }
        }
    }
    WorldModel::new(ns, na, transitions, file.goal, file.resets, file.schedule)
}

pub fn save_world(world: &WorldModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = world_to_json(world)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn load_world(path: impl AsRef<Path>) -> Result<WorldModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    world_from_json(&text)
}

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cost::CostModel;
use crate::dqn::DqnParams;
use crate::env::{generate_arena, load_world, ArenaParams, ChangeEvent, WorldModel};
use crate::error::{Error, Result};
use crate::expert::{MfParams, PlannerConfig};
use crate::meta::ArbitrationParams;

/// Seed of the arena committed under `data/reference_arena.json`.
pub const REFERENCE_ARENA_SEED: u64 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AgentKind {
    #[serde(rename = "MF_ONLY")]
    MfOnly,
    #[serde(rename = "MB_ONLY")]
    MbOnly,
    #[serde(rename = "MC_RND")]
    McRnd,
    #[serde(rename = "MC_EC")]
    McEc,
    #[serde(rename = "DQN")]
    Dqn,
}

impl AgentKind {
    pub const ALL: [AgentKind; 5] = [
        AgentKind::MfOnly,
        AgentKind::MbOnly,
        AgentKind::McRnd,
        AgentKind::McEc,
        AgentKind::Dqn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AgentKind::MfOnly => "MF_ONLY",
            AgentKind::MbOnly => "MB_ONLY",
            AgentKind::McRnd => "MC_RND",
            AgentKind::McEc => "MC_EC",
            AgentKind::Dqn => "DQN",
        }
    }

    /// Agents that arbitrate between both experts.
    pub fn is_coordinated(self) -> bool {
        matches!(self, AgentKind::McRnd | AgentKind::McEc)
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_uppercase().replace('-', "_");
        AgentKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| Error::Config(format!("unknown agent kind `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum WorldSource {
    File { path: PathBuf },
    Generated { seed: u64, #[serde(default)] params: ArenaParams },
}

impl Default for WorldSource {
    fn default() -> Self {
        WorldSource::Generated {
            seed: REFERENCE_ARENA_SEED,
            params: ArenaParams::default(),
        }
    }
}

/// Everything needed to run one agent on one task, for any number of seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub world: WorldSource,
    pub agent: AgentKind,
    pub total_steps: u64,
    /// Replaces the world's own change schedule when set.
    pub schedule: Option<Vec<ChangeEvent>>,
    pub mf: MfParams,
    pub mb: PlannerConfig,
    pub mc: ArbitrationParams,
    pub dqn: DqnParams,
    pub cost: CostModel,
    pub seeds: Vec<u64>,
    /// Moving-average window for phase detection.
    pub phase_window: usize,
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            world: WorldSource::default(),
            agent: AgentKind::McEc,
            total_steps: 6400,
            schedule: None,
            mf: MfParams::default(),
            mb: PlannerConfig::default(),
            mc: ArbitrationParams::default(),
            dqn: DqnParams::default(),
            cost: CostModel::default(),
            seeds: (0..100).collect(),
            phase_window: 50,
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    /// The reduced-seed preset used by the acceptance suite.
    pub fn ci_preset(agent: AgentKind) -> Self {
        ExperimentConfig {
            agent,
            seeds: (0..20).collect(),
            ..ExperimentConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.total_steps == 0 {
            return Err(Error::Config("total_steps must be positive".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.phase_window == 0 {
            return Err(Error::Config("phase_window must be at least 1".into()));
        }
        let wrap = |e: Error| Error::Config(e.to_string());
        self.mf.validate().map_err(wrap)?;
        self.mb.validate().map_err(wrap)?;
        self.mc.validate().map_err(wrap)?;
        self.dqn.validate().map_err(wrap)?;
        self.cost.validate().map_err(wrap)?;
        Ok(())
    }

    /// Builds or loads the world and applies the schedule override.
    pub fn resolve_world(&self) -> Result<WorldModel> {
        let mut world = match &self.world {
            WorldSource::File { path } => load_world(path)?,
            WorldSource::Generated { seed, params } => generate_arena(*seed, params)?.world,
        };
        if let Some(schedule) = &self.schedule {
            world.set_schedule(schedule.clone())?;
        }
        Ok(world)
    }

    /// First scheduled change, used to split runs into task periods.
    pub fn change_steps(&self, world: &WorldModel) -> Vec<u64> {
        let mut steps: Vec<u64> = world
            .schedule()
            .iter()
            .map(|e| e.at_step)
            .filter(|t| *t < self.total_steps)
            .collect();
        steps.sort_unstable();
        steps.dedup();
        steps
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
            field: e.path().to_string(),
            reason: e.inner().to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }
}

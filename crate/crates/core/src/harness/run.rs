//! A single seeded run: the decide / act / learn loop for one agent.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{AgentKind, ExperimentConfig};
use crate::cost::InferenceCost;
use crate::dqn::{DqnAgent, Mlp, Transition};
use crate::env::{ActionId, StateId, WorldModel};
use crate::error::Result;
use crate::expert::{Expert, Inference, MbExpert, MfExpert, QTable};
use crate::meta::{run_one_decision, Arbitration, ExpertMonitor};
use crate::policy::ProbDist;

/// Who produced the executed action.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decider {
    Mb,
    Mf,
    Dqn,
}

impl Decider {
    pub fn label(self) -> &'static str {
        match self {
            Decider::Mb => "MB",
            Decider::Mf => "MF",
            Decider::Dqn => "DQN",
        }
    }
}

/// One decision cycle. Entropy, kappa and selection columns are only filled
/// where they exist for the agent kind.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub step: u64,
    pub state: StateId,
    pub winner: Decider,
    pub action: ActionId,
    pub next_state: StateId,
    pub reward: f64,
    pub cost_units: u64,
    pub cost_seconds: f64,
    pub h_mb: Option<f64>,
    pub h_mf: Option<f64>,
    pub kappa: Option<f64>,
    pub p_mb: Option<f64>,
    pub p_mf: Option<f64>,
    pub episode: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub agent: AgentKind,
    pub seed: u64,
    pub rows: Vec<LogRow>,
    /// Inference calls observed on each expert, counted around the experts.
    pub mb_infer_calls: u64,
    pub mf_infer_calls: u64,
}

impl RunLog {
    pub fn total_reward(&self) -> f64 {
        self.rows.iter().map(|r| r.reward).sum()
    }

    pub fn total_cost_units(&self) -> u64 {
        self.rows.iter().map(|r| r.cost_units).sum()
    }

    pub fn total_cost_seconds(&self) -> f64 {
        self.rows.iter().map(|r| r.cost_seconds).sum()
    }

    /// Number of steps that ended an episode.
    pub fn resets(&self) -> u64 {
        self.rows.windows(2).filter(|w| w[1].episode > w[0].episode).count() as u64
            + self
                .rows
                .last()
                .map(|r| u64::from(r.reward > 0.0))
                .unwrap_or(0)
    }

    /// First step (0-based) that earned a reward.
    pub fn first_reward_step(&self) -> Option<u64> {
        self.rows.iter().find(|r| r.reward > 0.0).map(|r| r.step)
    }

    pub fn cumulative_reward(&self) -> Vec<f64> {
        prefix_sums(self.rows.iter().map(|r| r.reward))
    }

    pub fn cumulative_cost_seconds(&self) -> Vec<f64> {
        prefix_sums(self.rows.iter().map(|r| r.cost_seconds))
    }

    pub fn cumulative_cost_units(&self) -> Vec<f64> {
        prefix_sums(self.rows.iter().map(|r| r.cost_units as f64))
    }

    pub fn p_mf_curve(&self) -> Option<Vec<f64>> {
        self.rows.iter().map(|r| r.p_mf).collect()
    }
}

fn prefix_sums(values: impl Iterator<Item = f64>) -> Vec<f64> {
    values
        .scan(0.0, |acc, v| {
            *acc += v;
            Some(*acc)
        })
        .collect()
}

/// Final learner state, for the optional dumps.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub log: RunLog,
    pub mf_table: Option<QTable>,
    pub mb_model: Option<serde_json::Value>,
    pub network: Option<Mlp>,
}

/// Counts inference calls on the wrapped expert.
pub struct Counted<E> {
    pub inner: E,
    pub infer_calls: u64,
}

impl<E> Counted<E> {
    pub fn new(inner: E) -> Self {
        Counted { inner, infer_calls: 0 }
    }
}

impl<E: Expert> Expert for Counted<E> {
    fn infer(&mut self, s: StateId) -> Result<Inference> {
        self.infer_calls += 1;
        self.inner.infer(s)
    }

    fn decide<R: Rng + ?Sized>(&self, values: &[f64], rng: &mut R) -> Result<(ActionId, ProbDist)> {
        self.inner.decide(values, rng)
    }

    fn learn(&mut self, s: StateId, a: ActionId, reward: f64, s_next: StateId) -> Result<()> {
        self.inner.learn(s, a, reward, s_next)
    }
}

struct Choice {
    action: ActionId,
    winner: Decider,
    cost: InferenceCost,
    h_mb: Option<f64>,
    h_mf: Option<f64>,
    kappa: Option<f64>,
    p_mb: Option<f64>,
    p_mf: Option<f64>,
}

impl Choice {
    fn solo(action: ActionId, winner: Decider, cost: InferenceCost) -> Self {
        let (p_mb, p_mf) = match winner {
            Decider::Mb => (Some(1.0), Some(0.0)),
            Decider::Mf => (Some(0.0), Some(1.0)),
            Decider::Dqn => (None, None),
        };
        Choice {
            action,
            winner,
            cost,
            h_mb: None,
            h_mf: None,
            kappa: None,
            p_mb,
            p_mf,
        }
    }
}

fn solo_decide<E: Expert, R: Rng>(expert: &mut E, s: StateId, rng: &mut R) -> Result<(ActionId, InferenceCost)> {
    let inf = expert.infer(s)?;
    let (a, _) = expert.decide(&inf.values, rng)?;
    Ok((a, inf.cost))
}

/// Runs one seeded experiment on a copy of `world`.
pub fn run_experiment(config: &ExperimentConfig, world: &WorldModel, seed: u64) -> Result<RunLog> {
    run_experiment_full(config, world, seed).map(|a| a.log)
}

pub fn run_experiment_full(config: &ExperimentConfig, world: &WorldModel, seed: u64) -> Result<RunArtifacts> {
    config.validate()?;
    let mut world = world.clone();
    if let Some(schedule) = &config.schedule {
        world.set_schedule(schedule.clone())?;
    }
    let (ns, na) = (world.num_states(), world.num_actions());

    // separate streams for the environment and the agent
    let mut env_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut agent_rng = ChaCha8Rng::seed_from_u64(seed);
    agent_rng.set_stream(1);

    let agent = config.agent;
    let mut mb = Counted::new(MbExpert::new(ns, na, config.mb, config.cost));
    let mut mf = Counted::new(MfExpert::new(ns, na, config.mf, config.cost));
    let mut monitor = ExpertMonitor::new(ns, na, config.mc.alpha_f);
    let mut dqn = (agent == AgentKind::Dqn).then(|| DqnAgent::new(ns, na, config.dqn, &mut agent_rng));

    let mut rows = Vec::with_capacity(config.total_steps as usize);
    let mut s = world.sample_reset(&mut env_rng);
    let mut episode = 0u64;
    for t in 0..config.total_steps {
        world.apply_schedule(t);
        let choice = match agent {
            AgentKind::MfOnly => {
                let (a, cost) = solo_decide(&mut mf, s, &mut agent_rng)?;
                Choice::solo(a, Decider::Mf, cost)
            }
            AgentKind::MbOnly => {
                let (a, cost) = solo_decide(&mut mb, s, &mut agent_rng)?;
                Choice::solo(a, Decider::Mb, cost)
            }
            AgentKind::McEc | AgentKind::McRnd => {
                let arbitration = if agent == AgentKind::McEc {
                    Arbitration::EntropyCost
                } else {
                    Arbitration::Random
                };
                let d = run_one_decision(s, &mut mb, &mut mf, &mut monitor, &config.mc, arbitration, &mut agent_rng)?;
                let sel = &d.selection;
                Choice {
                    action: d.action,
                    winner: match sel.winner {
                        crate::meta::ExpertId::Mb => Decider::Mb,
                        crate::meta::ExpertId::Mf => Decider::Mf,
                    },
                    cost: d.cost,
                    h_mb: Some(sel.h_mb),
                    h_mf: Some(sel.h_mf),
                    kappa: Some(sel.kappa),
                    p_mb: Some(sel.p_mb()),
                    p_mf: Some(sel.p_mf()),
                }
            }
            AgentKind::Dqn => {
                let net = dqn.as_ref().expect("dqn agent");
                let start = std::time::Instant::now();
                let (a, _) = net.act(s, &mut agent_rng)?;
                Choice::solo(a, Decider::Dqn, config.cost.forward_pass(start.elapsed()))
            }
        };

        let out = world.step(s, choice.action, &mut env_rng)?;
        match agent {
            AgentKind::MfOnly => mf.learn(s, choice.action, out.reward, out.next_state)?,
            AgentKind::MbOnly => mb.learn(s, choice.action, out.reward, out.next_state)?,
            AgentKind::McEc | AgentKind::McRnd => {
                mb.learn(s, choice.action, out.reward, out.next_state)?;
                mf.learn(s, choice.action, out.reward, out.next_state)?;
            }
            AgentKind::Dqn => {
                let net = dqn.as_mut().expect("dqn agent");
                net.remember(Transition {
                    s,
                    a: choice.action,
                    r: out.reward,
                    s_next: out.next_state,
                    reset: out.episode_reset,
                });
                net.train_step(&mut agent_rng);
            }
        }

        rows.push(LogRow {
            step: t,
            state: s,
            winner: choice.winner,
            action: choice.action,
            next_state: out.next_state,
            reward: out.reward,
            cost_units: choice.cost.units,
            cost_seconds: choice.cost.seconds_equivalent,
            h_mb: choice.h_mb,
            h_mf: choice.h_mf,
            kappa: choice.kappa,
            p_mb: choice.p_mb,
            p_mf: choice.p_mf,
            episode,
        });
        if out.episode_reset {
            episode += 1;
        }
        s = out.position();
    }

    let uses_mb = matches!(agent, AgentKind::MbOnly | AgentKind::McEc | AgentKind::McRnd);
    let uses_mf = matches!(agent, AgentKind::MfOnly | AgentKind::McEc | AgentKind::McRnd);
    let log = RunLog {
        agent,
        seed,
        rows,
        mb_infer_calls: mb.infer_calls,
        mf_infer_calls: mf.infer_calls,
    };
    Ok(RunArtifacts {
        log,
        mf_table: uses_mf.then(|| mf.inner.table().clone()),
        mb_model: uses_mb.then(|| mb.inner.model_json()),
        network: dqn.map(|d| d.network().clone()),
    })
}

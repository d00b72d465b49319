//! Many seeds of one configuration, run in parallel and aggregated.

use rayon::prelude::*;

use super::config::{AgentKind, ExperimentConfig};
use super::run::{run_experiment, RunLog};
use crate::env::WorldModel;
use crate::error::{Error, Result};

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl Aggregate {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Aggregate { mean: f64::NAN, std: f64::NAN, n };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        Aggregate { mean, std: var.sqrt(), n }
    }
}

#[derive(Debug, Clone)]
pub struct BatchResult {
    pub agent: AgentKind,
    pub runs: Vec<RunLog>,
}

impl BatchResult {
    pub fn total_reward(&self) -> Aggregate {
        Aggregate::of(&self.runs.iter().map(|r| r.total_reward()).collect::<Vec<_>>())
    }

    pub fn total_cost_units(&self) -> Aggregate {
        Aggregate::of(&self.runs.iter().map(|r| r.total_cost_units() as f64).collect::<Vec<_>>())
    }

    pub fn total_cost_seconds(&self) -> Aggregate {
        Aggregate::of(&self.runs.iter().map(|r| r.total_cost_seconds()).collect::<Vec<_>>())
    }

    /// Reward collected in `[from, to)`.
    pub fn reward_between(&self, from: u64, to: u64) -> Aggregate {
        let per_run: Vec<f64> = self
            .runs
            .iter()
            .map(|r| {
                r.rows
                    .iter()
                    .filter(|row| row.step >= from && row.step < to)
                    .map(|row| row.reward)
                    .sum()
            })
            .collect();
        Aggregate::of(&per_run)
    }

    pub fn mean_cumulative_reward(&self) -> Vec<f64> {
        mean_curve(self.runs.iter().map(|r| r.cumulative_reward()))
    }

    pub fn mean_cumulative_cost_seconds(&self) -> Vec<f64> {
        mean_curve(self.runs.iter().map(|r| r.cumulative_cost_seconds()))
    }

    /// Mean probability of choosing the model-free expert at each step, for
    /// agents that log one.
    pub fn mean_p_mf(&self) -> Option<Vec<f64>> {
        let curves: Option<Vec<Vec<f64>>> = self.runs.iter().map(|r| r.p_mf_curve()).collect();
        curves.map(|c| mean_curve(c.into_iter()))
    }

    pub fn mean_first_reward_step(&self) -> Option<f64> {
        let steps: Vec<f64> = self
            .runs
            .iter()
            .filter_map(|r| r.first_reward_step())
            .map(|s| s as f64)
            .collect();
        (!steps.is_empty()).then(|| Aggregate::of(&steps).mean)
    }
}

/// Element-wise mean of equally long curves.
pub fn mean_curve(curves: impl Iterator<Item = Vec<f64>>) -> Vec<f64> {
    let mut sum: Vec<f64> = Vec::new();
    let mut n = 0usize;
    for c in curves {
        if sum.is_empty() {
            sum = vec![0.0; c.len()];
        }
        for (acc, v) in sum.iter_mut().zip(&c) {
            *acc += v;
        }
        n += 1;
    }
    if n > 0 {
        sum.iter_mut().for_each(|v| *v /= n as f64);
    }
    sum
}

/// Runs every seed of `config` in parallel. Errors name the failing seed.
pub fn run_batch(config: &ExperimentConfig, world: &WorldModel) -> Result<BatchResult> {
    config.validate()?;
    let runs = config
        .seeds
        .par_iter()
        .map(|&seed| {
            run_experiment(config, world, seed).map_err(|e| Error::Run {
                seed,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BatchResult {
        agent: config.agent,
        runs,
    })
}

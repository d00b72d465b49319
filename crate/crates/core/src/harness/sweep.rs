//! Reward/cost trade-off over the entropy gate constant.

use super::batch::run_batch;
use super::config::ExperimentConfig;
use crate::env::WorldModel;
use crate::error::{Error, Result};

pub const DEFAULT_ETAS: [f64; 5] = [0.0, 1.0, 3.0, 7.0, 15.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaPoint {
    pub eta: f64,
    pub mean_reward: f64,
    pub mean_cost_units: f64,
    pub mean_cost_seconds: f64,
    /// Some other point has at least the reward and at most the cost, and is
    /// strictly better on one of them.
    pub dominated: bool,
}

/// Runs one batch per eta on the same seeds and flags dominated points.
pub fn sweep_eta(config: &ExperimentConfig, world: &WorldModel, etas: &[f64]) -> Result<Vec<EtaPoint>> {
    if etas.is_empty() {
        return Err(Error::Config("the eta sweep needs at least one value".into()));
    }
    let mut points = Vec::with_capacity(etas.len());
    for &eta in etas {
        let mut c = config.clone();
        c.mc.eta = eta;
        let batch = run_batch(&c, world)?;
        points.push(EtaPoint {
            eta,
            mean_reward: batch.total_reward().mean,
            mean_cost_units: batch.total_cost_units().mean,
            mean_cost_seconds: batch.total_cost_seconds().mean,
            dominated: false,
        });
    }
    mark_dominated(&mut points);
    Ok(points)
}

pub fn mark_dominated(points: &mut [EtaPoint]) {
    let snapshot = points.to_vec();
    for p in points.iter_mut() {
        p.dominated = snapshot.iter().any(|q| {
            q.mean_reward >= p.mean_reward
                && q.mean_cost_units <= p.mean_cost_units
                && (q.mean_reward > p.mean_reward || q.mean_cost_units < p.mean_cost_units)
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(eta: f64, r: f64, c: f64) -> EtaPoint {
        EtaPoint {
            eta,
            mean_reward: r,
            mean_cost_units: c,
            mean_cost_seconds: c,
            dominated: false,
        }
    }

    #[test]
    fn dominance_flags() {
        let mut pts = vec![point(0.0, 10.0, 5.0), point(1.0, 12.0, 6.0), point(2.0, 9.0, 7.0), point(3.0, 12.0, 6.0)];
        mark_dominated(&mut pts);
        let flags: Vec<bool> = pts.iter().map(|p| p.dominated).collect();
        assert_eq!(flags, vec![false, false, true, false]);
        let mut single = vec![point(7.0, 1.0, 1.0)];
        mark_dominated(&mut single);
        assert!(!single[0].dominated);
    }
}

//! Model-free expert: tabular Q-learning with optimistic initialisation.

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_reward, decide, Expert, Inference};
use crate::cost::CostModel;
use crate::env::{ActionId, StateId};
use crate::error::{Error, Result};
use crate::policy::ProbDist;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MfParams {
    pub alpha: f64,
    pub gamma: f64,
    pub tau: f64,
    pub init_value: f64,
}

impl Default for MfParams {
    fn default() -> Self {
        MfParams {
            alpha: 0.6,
            gamma: 0.9,
            tau: 0.02,
            init_value: 1.0,
        }
    }
}

impl MfParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::param("mf.alpha", format!("must lie in (0, 1], got {}", self.alpha)));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::param("mf.gamma", format!("must lie in [0, 1), got {}", self.gamma)));
        }
        if !(self.tau > 0.0) {
            return Err(Error::param("mf.tau", format!("must be positive, got {}", self.tau)));
        }
        if !self.init_value.is_finite() {
            return Err(Error::param("mf.init_value", "must be finite"));
        }
        Ok(())
    }
}

/// Dense state-action value table.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    num_states: usize,
    num_actions: usize,
    q: Vec<f64>,
}

impl QTable {
    pub fn new(num_states: usize, num_actions: usize, init: f64) -> Self {
        QTable {
            num_states,
            num_actions,
            q: vec![init; num_states * num_actions],
        }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn get(&self, s: StateId, a: ActionId) -> f64 {
        self.q[s * self.num_actions + a]
    }

    pub fn set(&mut self, s: StateId, a: ActionId, v: f64) {
        self.q[s * self.num_actions + a] = v;
    }

    pub fn row(&self, s: StateId) -> &[f64] {
        &self.q[s * self.num_actions..(s + 1) * self.num_actions]
    }

    pub fn max(&self, s: StateId) -> f64 {
        self.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub(crate) fn check_ids(&self, s: StateId, a: ActionId) -> Result<()> {
        if s >= self.num_states || a >= self.num_actions {
            return Err(Error::Input(format!(
                "(state {s}, action {a}) outside a {}x{} table",
                self.num_states, self.num_actions
            )));
        }
        Ok(())
    }

    /// `state,action,value` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("state,action,value\n");
        for s in 0..self.num_states {
            for a in 0..self.num_actions {
                out.push_str(&format!("{s},{a},{}\n", self.get(s, a)));
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct MfExpert {
    params: MfParams,
    table: QTable,
    cost: CostModel,
}

impl MfExpert {
    pub fn new(num_states: usize, num_actions: usize, params: MfParams, cost: CostModel) -> Self {
        MfExpert {
            params,
            table: QTable::new(num_states, num_actions, params.init_value),
            cost,
        }
    }

    pub fn table(&self) -> &QTable {
        &self.table
    }

    pub fn params(&self) -> &MfParams {
        &self.params
    }

    /// One Q-learning update of the `(s, a)` cell toward
    /// `reward + gamma * max_a' q(s_next, a')`.
    pub fn update(&mut self, s: StateId, a: ActionId, reward: f64, s_next: StateId) -> Result<()> {
        self.table.check_ids(s, a)?;
        self.table.check_ids(s_next, 0)?;
        check_reward(reward)?;
        let target = reward + self.params.gamma * self.table.max(s_next);
        let q = self.table.get(s, a);
        self.table.set(s, a, q + self.params.alpha * (target - q));
        Ok(())
    }

    pub fn values(&self, s: StateId) -> Result<&[f64]> {
        self.table.check_ids(s, 0)?;
        Ok(self.table.row(s))
    }
}

impl Expert for MfExpert {
    fn infer(&mut self, s: StateId) -> Result<Inference> {
        let start = Instant::now();
        let values = self.values(s)?.to_vec();
        Ok(Inference {
            values,
            cost: self.cost.table_read(start.elapsed()),
        })
    }

    fn decide<R: Rng + ?Sized>(&self, values: &[f64], rng: &mut R) -> Result<(ActionId, ProbDist)> {
        decide(values, self.params.tau, rng)
    }

    fn learn(&mut self, s: StateId, a: ActionId, reward: f64, s_next: StateId) -> Result<()> {
        self.update(s, a, reward, s_next)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn expert(ns: usize) -> MfExpert {
        MfExpert::new(ns, 8, MfParams::default(), CostModel::default())
    }

    #[test]
    fn rewarded_update() {
        let mut mf = expert(2);
        mf.update(0, 3, 1.0, 1).unwrap();
        assert_abs_diff_eq!(mf.table().get(0, 3), 1.54, epsilon = 1e-12);
        let row = mf.infer(0).unwrap().values;
        for (a, v) in row.iter().enumerate() {
            let expected = if a == 3 { 1.54 } else { 1.0 };
            assert_abs_diff_eq!(*v, expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn unrewarded_update() {
        let mut mf = expert(2);
        mf.update(0, 0, 0.0, 1).unwrap();
        assert_abs_diff_eq!(mf.table().get(0, 0), 0.94, epsilon = 1e-12);
    }

    #[test]
    fn zero_td_error_is_a_fixed_point() {
        let mut mf = expert(2);
        // target = 0 + 0.9 * max q(1) = 0.9
        mf.table.set(0, 2, 0.9);
        let before = mf.table().clone();
        mf.update(0, 2, 0.0, 1).unwrap();
        assert_eq!(mf.table(), &before);
    }

    #[test]
    fn only_the_updated_cell_changes() {
        let mut mf = expert(3);
        let before = mf.table().clone();
        mf.update(1, 5, 1.0, 2).unwrap();
        for s in 0..3 {
            for a in 0..8 {
                if (s, a) != (1, 5) {
                    assert_eq!(mf.table().get(s, a), before.get(s, a));
                }
            }
        }
    }

    #[test]
    fn fresh_inference_is_optimistic_and_pure() {
        let mut mf = expert(4);
        let first = mf.infer(2).unwrap();
        assert_eq!(first.values, vec![1.0; 8]);
        assert_eq!(first.cost.units, 1);
        assert_abs_diff_eq!(first.cost.seconds_equivalent, 1e-5);
        let table = mf.table().clone();
        let second = mf.infer(2).unwrap();
        assert_eq!(first.values, second.values);
        assert_eq!(mf.table(), &table);
    }

    #[test]
    fn rejects_invalid_input() {
        let mut mf = expert(2);
        assert!(mf.update(2, 0, 0.0, 0).is_err());
        assert!(mf.update(0, 8, 0.0, 0).is_err());
        assert!(mf.update(0, 0, 0.0, 5).is_err());
        assert!(mf.update(0, 0, 0.5, 1).is_err());
        assert!(mf.infer(9).is_err());
    }

    #[test]
    fn uniform_values_give_uniform_actions() {
        let mf = expert(1);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 10_000;
        let mut counts = [0usize; 8];
        for _ in 0..n {
            counts[mf.decide(&[1.0; 8], &mut rng).unwrap().0] += 1;
        }
        let p = 0.125;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        for c in counts {
            assert!((c as f64 / n as f64 - p).abs() <= 3.0 * se, "{counts:?}");
        }
    }

    #[test]
    fn dominant_action_is_almost_always_chosen() {
        let mf = expert(1);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut values = [0.0; 8];
        values[6] = 1.0;
        let n = 10_000;
        let hits = (0..n)
            .filter(|_| mf.decide(&values, &mut rng).unwrap().0 == 6)
            .count();
        assert!(hits as f64 / n as f64 >= 0.9999);
    }

    #[test]
    fn seeded_decisions_reproduce() {
        let mf = expert(1);
        let values = [0.9, 0.95, 1.0, 0.97, 0.9, 0.99, 1.0, 0.92];
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..50).map(|_| mf.decide(&values, &mut rng).unwrap().0).collect::<Vec<_>>()
        };
        assert_eq!(run(77), run(77));
    }

    #[test]
    fn csv_dump_lists_every_cell() {
        let mf = expert(2);
        let csv = mf.table().to_csv();
        assert_eq!(csv.lines().count(), 1 + 16);
        assert!(csv.starts_with("state,action,value\n0,0,1\n"));
    }

    proptest! {
        #[test]
        fn values_stay_bounded(updates in prop::collection::vec((0usize..5, 0usize..8, prop::bool::ANY, 0usize..5), 1..400)) {
            let mut mf = MfExpert::new(5, 8, MfParams::default(), CostModel::default());
            for (s, a, rewarded, next) in updates {
                mf.update(s, a, if rewarded { 1.0 } else { 0.0 }, next).unwrap();
            }
            for s in 0..5 {
                for v in mf.table().row(s) {
                    prop_assert!(v.is_finite());
                    prop_assert!(*v >= 0.0 && *v <= 10.0 + 1e-9);
                }
            }
        }
    }
}

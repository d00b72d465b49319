//! Meta-controller: picks the expert that leads each decision.
//!
//! For every (state, expert) it keeps a low-pass filtered copy of the action
//! distribution the expert produced the last times it led in that state, and a
//! filtered inference cost. The expert value is
//! `-(H(s, E) + kappa * T(s, E))` with `kappa = exp(-eta * H(s, MF))`, and the
//! leader is drawn from a softmax over the two expert values. Selection uses
//! stored data only, so the loser never runs its inference.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cost::InferenceCost;
use crate::env::{ActionId, StateId};
use crate::error::{Error, Result};
use crate::expert::Expert;
use crate::policy::{low_pass, low_pass_scalar, softmax, ProbDist};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExpertId {
    Mb,
    Mf,
}

impl ExpertId {
    pub const BOTH: [ExpertId; 2] = [ExpertId::Mb, ExpertId::Mf];

    fn index(self) -> usize {
        match self {
            ExpertId::Mb => 0,
            ExpertId::Mf => 1,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ExpertId::Mb => "MB",
            ExpertId::Mf => "MF",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArbitrationParams {
    /// Weight of MF entropy in `kappa = exp(-eta * H_mf)`.
    pub eta: f64,
    pub tau_mc: f64,
    /// Filter coefficient for stored distributions and costs.
    pub alpha_f: f64,
}

impl Default for ArbitrationParams {
    fn default() -> Self {
        ArbitrationParams {
            eta: 7.0,
            tau_mc: 0.02,
            alpha_f: 0.6,
        }
    }
}

impl ArbitrationParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta >= 0.0) || !self.eta.is_finite() {
            return Err(Error::param("mc.eta", format!("must be >= 0, got {}", self.eta)));
        }
        if !(self.tau_mc > 0.0) {
            return Err(Error::param("mc.tau_mc", format!("must be positive, got {}", self.tau_mc)));
        }
        if !(0.0..=1.0).contains(&self.alpha_f) {
            return Err(Error::param("mc.alpha_f", format!("must lie in [0, 1], got {}", self.alpha_f)));
        }
        Ok(())
    }
}

pub fn kappa(h_mf: f64, eta: f64) -> f64 {
    (-eta * h_mf).exp()
}

#[derive(Debug, Clone, PartialEq)]
struct Slot {
    dist: ProbDist,
    cost: f64,
}

/// Per-(state, expert) filtered evidence.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertMonitor {
    num_actions: usize,
    alpha_f: f64,
    slots: Vec<[Slot; 2]>,
}

impl ExpertMonitor {
    /// Every distribution starts uniform and every cost at zero.
    pub fn new(num_states: usize, num_actions: usize, alpha_f: f64) -> Self {
        let fresh = Slot {
            dist: ProbDist::uniform(num_actions),
            cost: 0.0,
        };
        ExpertMonitor {
            num_actions,
            alpha_f,
            slots: vec![[fresh.clone(), fresh]; num_states],
        }
    }

    fn slot(&self, s: StateId, e: ExpertId) -> &Slot {
        &self.slots[s][e.index()]
    }

    pub fn dist(&self, s: StateId, e: ExpertId) -> &ProbDist {
        &self.slot(s, e).dist
    }

    pub fn cost(&self, s: StateId, e: ExpertId) -> f64 {
        self.slot(s, e).cost
    }

    pub fn entropy(&self, s: StateId, e: ExpertId) -> f64 {
        self.dist(s, e).entropy_bits()
    }

    /// Overwrites the stored evidence for one (state, expert).
    pub fn set(&mut self, s: StateId, e: ExpertId, dist: ProbDist, cost: f64) -> Result<()> {
        self.check(s, &dist)?;
        self.slots[s][e.index()] = Slot { dist, cost };
        Ok(())
    }

    fn check(&self, s: StateId, dist: &ProbDist) -> Result<()> {
        if s >= self.slots.len() {
            return Err(Error::Input(format!("state {s} outside the monitor")));
        }
        if dist.len() != self.num_actions {
            return Err(Error::Input(format!(
                "distribution has {} entries, expected {}",
                dist.len(),
                self.num_actions
            )));
        }
        Ok(())
    }

    /// Filters the leader's fresh distribution and cost into its slot for `s`.
    /// The other expert's slot, and every other state, are left untouched.
    pub fn update(&mut self, s: StateId, winner: ExpertId, dist: &ProbDist, cost: &InferenceCost) -> Result<()> {
        self.check(s, dist)?;
        let slot = &mut self.slots[s][winner.index()];
        slot.dist = low_pass(&slot.dist, dist, self.alpha_f)?;
        slot.cost = low_pass_scalar(slot.cost, cost.seconds_equivalent, self.alpha_f)?;
        Ok(())
    }
}

/// Everything the arbitration computed for one decision.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub winner: ExpertId,
    /// `[p_mb, p_mf]`.
    pub expert_probs: ProbDist,
    pub h_mb: f64,
    pub h_mf: f64,
    pub kappa: f64,
    pub q_mb: f64,
    pub q_mf: f64,
}

impl Selection {
    pub fn p_mb(&self) -> f64 {
        self.expert_probs.probs()[0]
    }

    pub fn p_mf(&self) -> f64 {
        self.expert_probs.probs()[1]
    }
}

/// Expert values and softmax selection probabilities from stored evidence.
pub fn expert_values(monitor: &ExpertMonitor, params: &ArbitrationParams, s: StateId) -> Result<Selection> {
    if s >= monitor.slots.len() {
        return Err(Error::Input(format!("state {s} outside the monitor")));
    }
    let h_mb = monitor.entropy(s, ExpertId::Mb);
    let h_mf = monitor.entropy(s, ExpertId::Mf);
    let k = kappa(h_mf, params.eta);
    let q_mb = -(h_mb + k * monitor.cost(s, ExpertId::Mb));
    let q_mf = -(h_mf + k * monitor.cost(s, ExpertId::Mf));
    let expert_probs = softmax(&[q_mb, q_mf], params.tau_mc)?;
    Ok(Selection {
        winner: ExpertId::Mb,
        expert_probs,
        h_mb,
        h_mf,
        kappa: k,
        q_mb,
        q_mf,
    })
}

/// Entropy-and-cost arbitration: samples the leader from the expert softmax.
pub fn select_expert<R: Rng + ?Sized>(
    monitor: &ExpertMonitor,
    params: &ArbitrationParams,
    s: StateId,
    rng: &mut R,
) -> Result<Selection> {
    let mut sel = expert_values(monitor, params, s)?;
    sel.winner = ExpertId::BOTH[sel.expert_probs.sample(rng)];
    Ok(sel)
}

/// Random coordination: a fair coin between the experts.
pub fn select_expert_random<R: Rng + ?Sized>(rng: &mut R) -> ExpertId {
    if rng.gen_bool(0.5) {
        ExpertId::Mb
    } else {
        ExpertId::Mf
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arbitration {
    EntropyCost,
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub action: ActionId,
    pub selection: Selection,
    /// The leader's fresh action distribution.
    pub dist: ProbDist,
    pub cost: InferenceCost,
}

/// One arbitrated decision. The leader is chosen from stored evidence first;
/// only the leader then infers and decides, and its fresh output is filtered
/// into the monitor.
pub fn run_one_decision<Mb, Mf, R>(
    s: StateId,
    mb: &mut Mb,
    mf: &mut Mf,
    monitor: &mut ExpertMonitor,
    params: &ArbitrationParams,
    arbitration: Arbitration,
    rng: &mut R,
) -> Result<Decision>
where
    Mb: Expert,
    Mf: Expert,
    R: Rng + ?Sized,
{
    let selection = match arbitration {
        Arbitration::EntropyCost => select_expert(monitor, params, s, rng)?,
        Arbitration::Random => {
            let mut sel = expert_values(monitor, params, s)?;
            sel.expert_probs = ProbDist::uniform(2);
            sel.winner = select_expert_random(rng);
            sel
        }
    };
    let (action, dist, cost) = match selection.winner {
        ExpertId::Mb => {
            let inf = mb.infer(s)?;
            let (a, d) = mb.decide(&inf.values, rng)?;
            (a, d, inf.cost)
        }
        ExpertId::Mf => {
            let inf = mf.infer(s)?;
            let (a, d) = mf.decide(&inf.values, rng)?;
            (a, d, inf.cost)
        }
    };
    monitor.update(s, selection.winner, &dist, &cost)?;
    Ok(Decision {
        action,
        selection,
        dist,
        cost,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::CostModel;
    use crate::expert::{Inference, MbExpert, MfExpert, MfParams, PlannerConfig};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params() -> ArbitrationParams {
        ArbitrationParams::default()
    }

    #[test]
    fn symmetric_evidence_gives_even_odds() {
        let mut m = ExpertMonitor::new(2, 8, 0.6);
        let d = ProbDist::new(vec![0.3, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1]).unwrap();
        m.set(0, ExpertId::Mb, d.clone(), 0.004).unwrap();
        m.set(0, ExpertId::Mf, d, 0.004).unwrap();
        let sel = expert_values(&m, &params(), 0).unwrap();
        assert_abs_diff_eq!(sel.p_mb(), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(sel.p_mf(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn cost_breaks_ties_when_both_policies_are_certain() {
        let mut m = ExpertMonitor::new(1, 8, 0.6);
        m.set(0, ExpertId::Mb, ProbDist::one_hot(8, 1), 0.01).unwrap();
        m.set(0, ExpertId::Mf, ProbDist::one_hot(8, 1), 1e-5).unwrap();
        let sel = expert_values(&m, &params(), 0).unwrap();
        assert_eq!(sel.kappa, 1.0);
        assert_abs_diff_eq!(sel.q_mb, -0.01, epsilon = 1e-15);
        assert_abs_diff_eq!(sel.q_mf, -1e-5, epsilon = 1e-15);
        // 1 / (1 + exp(-0.00999 / 0.02))
        let expected = 1.0 / (1.0 + (-0.4995f64).exp());
        assert_abs_diff_eq!(expected, 0.62234, epsilon = 1e-5);
        assert_abs_diff_eq!(sel.p_mf(), expected, epsilon = 1e-12);
    }

    #[test]
    fn uncertain_model_free_silences_cost() {
        let mut m = ExpertMonitor::new(1, 8, 0.6);
        // H = 0.5 bits: two-outcome distribution with p = 0.110028...
        let p = 0.11002786443835957;
        let mut probs = vec![0.0; 8];
        probs[0] = p;
        probs[1] = 1.0 - p;
        let d = ProbDist::new(probs).unwrap();
        assert_abs_diff_eq!(d.entropy_bits(), 0.5, epsilon = 1e-9);
        m.set(0, ExpertId::Mb, d, 0.01).unwrap();
        let sel = expert_values(&m, &params(), 0).unwrap();
        assert_abs_diff_eq!(sel.h_mf, 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sel.kappa, (-21.0f64).exp(), epsilon = 1e-20);
        assert_abs_diff_eq!(sel.q_mf, -3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sel.q_mb, -0.5, epsilon = 1e-9);
        assert!(sel.p_mf() < 1e-50);
        assert_eq!(sel.p_mb(), 1.0);
    }

    #[test]
    fn update_touches_only_the_winner() {
        let mut m = ExpertMonitor::new(3, 8, 0.6);
        let before = m.clone();
        let cost = InferenceCost { units: 10, wall_seconds: None, seconds_equivalent: 0.02 };
        m.update(1, ExpertId::Mb, &ProbDist::one_hot(8, 0), &cost).unwrap();
        assert_eq!(m.dist(1, ExpertId::Mf), before.dist(1, ExpertId::Mf));
        assert_eq!(m.cost(1, ExpertId::Mf), 0.0);
        for s in [0, 2] {
            for e in ExpertId::BOTH {
                assert_eq!(m.dist(s, e), before.dist(s, e));
            }
        }
        let d = m.dist(1, ExpertId::Mb).probs();
        assert_abs_diff_eq!(d[0], 0.65, epsilon = 1e-12);
        assert!(d[1..].iter().all(|p| (p - 0.05).abs() < 1e-12));
        assert_abs_diff_eq!(m.cost(1, ExpertId::Mb), 0.012, epsilon = 1e-15);
    }

    #[test]
    fn repeated_updates_converge_geometrically() {
        let mut m = ExpertMonitor::new(1, 8, 0.6);
        let target = ProbDist::one_hot(8, 4);
        for k in 1..=10 {
            m.update(0, ExpertId::Mf, &target, &InferenceCost::ZERO).unwrap();
            let gap = 1.0 - m.dist(0, ExpertId::Mf).probs()[4];
            assert_abs_diff_eq!(gap, 0.875 * 0.4f64.powi(k), epsilon = 1e-12);
        }
    }

    #[test]
    fn random_selection_is_fair_and_reproducible() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let n = 10_000;
        let mb = (0..n).filter(|_| select_expert_random(&mut rng) == ExpertId::Mb).count();
        let se = (0.25 / n as f64).sqrt();
        assert!((mb as f64 / n as f64 - 0.5).abs() <= 3.0 * se);
        let seq = |seed| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            (0..64).map(|_| select_expert_random(&mut r)).collect::<Vec<_>>()
        };
        assert_eq!(seq(3), seq(3));
    }

    /// Wraps an expert and counts inference calls.
    struct Probe<E> {
        inner: E,
        calls: usize,
    }

    impl<E: Expert> Expert for Probe<E> {
        fn infer(&mut self, s: StateId) -> Result<Inference> {
            self.calls += 1;
            self.inner.infer(s)
        }
        fn decide<R: Rng + ?Sized>(&self, values: &[f64], rng: &mut R) -> Result<(ActionId, ProbDist)> {
            self.inner.decide(values, rng)
        }
        fn learn(&mut self, s: StateId, a: ActionId, r: f64, n: StateId) -> Result<()> {
            self.inner.learn(s, a, r, n)
        }
    }

    #[test]
    fn only_the_leader_infers() {
        for arbitration in [Arbitration::EntropyCost, Arbitration::Random] {
            let cost = CostModel::default();
            let mut mb = Probe { inner: MbExpert::new(4, 8, PlannerConfig::default(), cost), calls: 0 };
            let mut mf = Probe { inner: MfExpert::new(4, 8, MfParams::default(), cost), calls: 0 };
            let mut monitor = ExpertMonitor::new(4, 8, 0.6);
            let mut rng = ChaCha8Rng::seed_from_u64(6);
            let mut s = 0;
            for step in 0..300 {
                let before = mb.calls + mf.calls;
                let d = run_one_decision(s, &mut mb, &mut mf, &mut monitor, &params(), arbitration, &mut rng).unwrap();
                assert_eq!(mb.calls + mf.calls, before + 1, "step {step}");
                let next = (s + d.action) % 4;
                mb.learn(s, d.action, 0.0, next).unwrap();
                mf.learn(s, d.action, 0.0, next).unwrap();
                s = next;
            }
            assert!(mb.calls > 0 && mf.calls > 0);
        }
    }

    proptest! {
        #[test]
        fn expert_values_are_non_positive(h in prop::collection::vec(0.0f64..1.0, 16), c_mb in 0.0f64..0.1, c_mf in 0.0f64..0.1) {
            let mut m = ExpertMonitor::new(1, 8, 0.6);
            let norm = |v: &[f64]| {
                let s: f64 = v.iter().sum::<f64>() + 8e-3;
                ProbDist::new(v.iter().map(|x| (x + 1e-3) / s).collect()).unwrap()
            };
            m.set(0, ExpertId::Mb, norm(&h[..8]), c_mb).unwrap();
            m.set(0, ExpertId::Mf, norm(&h[8..]), c_mf).unwrap();
            let sel = expert_values(&m, &params(), 0).unwrap();
            prop_assert!(sel.q_mb <= 0.0 && sel.q_mf <= 0.0);
            prop_assert!(sel.kappa > 0.0 && sel.kappa <= 1.0);
            prop_assert!((sel.p_mb() + sel.p_mf() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn kappa_decreases_with_entropy(h1 in 0.0f64..3.0, h2 in 0.0f64..3.0, eta in 0.0f64..20.0) {
            let (lo, hi) = if h1 <= h2 { (h1, h2) } else { (h2, h1) };
            prop_assert!(kappa(hi, eta) <= kappa(lo, eta));
            prop_assert!(kappa(hi, eta) > 0.0 && kappa(lo, eta) <= 1.0);
        }

        #[test]
        fn cheaper_expert_is_never_less_likely(c_hi in 0.0f64..0.2, cut in 0.0f64..1.0, p in 0.5f64..1.0) {
            let mut probs = vec![(1.0 - p) / 7.0; 8];
            probs[0] = p;
            let d = ProbDist::new(probs).unwrap();
            let mut m = ExpertMonitor::new(1, 8, 0.6);
            m.set(0, ExpertId::Mb, d.clone(), c_hi).unwrap();
            m.set(0, ExpertId::Mf, d, 0.05).unwrap();
            let before = expert_values(&m, &params(), 0).unwrap().p_mb();
            let dm = m.dist(0, ExpertId::Mb).clone();
            m.set(0, ExpertId::Mb, dm, c_hi * cut).unwrap();
            let after = expert_values(&m, &params(), 0).unwrap().p_mb();
            prop_assert!(after >= before - 1e-15);
        }
    }
}

//! Shared fixtures for the integration and acceptance tests.
#![allow(dead_code)]

use mbmf_core::cost::CostModel;
use mbmf_core::dqn::Mlp;
use mbmf_core::expert::{value_iteration, Expert, MfExpert, MfParams, PlannerConfig, RewardModel, TransitionModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const LEFT: usize = 0;
pub const RIGHT: usize = 1;

/// Deterministic episodic chain `0 - 1 - ... - (n-1)`. Entering the last
/// state pays 1; that state is terminal: every action loops on it for
/// nothing. Moving left from 0 bumps.
pub fn chain_step(n: usize, s: usize, a: usize) -> (usize, f64) {
    let terminal = n - 1;
    if s == terminal {
        return (s, 0.0);
    }
    let next = if a == LEFT { s.saturating_sub(1) } else { s + 1 };
    (next, if next == terminal { 1.0 } else { 0.0 })
}

/// Exact action values of the chain, by value iteration on its true model.
pub fn chain_oracle(n: usize, gamma: f64) -> Vec<f64> {
    let mut tm = TransitionModel::new(n, 2, 6);
    let mut rm = RewardModel::new(n, 2);
    for s in 0..n {
        for a in [LEFT, RIGHT] {
            let (next, r) = chain_step(n, s, a);
            tm.observe(s, a, next).unwrap();
            rm.record(s, a, next, r);
        }
    }
    let config = PlannerConfig {
        gamma,
        epsilon_vi: 1e-12,
        max_sweeps: 100_000,
        ..PlannerConfig::default()
    };
    let res = value_iteration(&tm, &rm, &config);
    assert!(res.converged);
    res.q
}

/// Runs the model-free expert on the chain for `steps` decisions with its own
/// softmax behaviour. After acting once in the terminal state the episode
/// restarts from 0. Returns the final table, row-major.
pub fn train_mf_on_chain(n: usize, params: MfParams, steps: usize, seed: u64) -> Vec<f64> {
    let mut mf = MfExpert::new(n, 2, params, CostModel::default());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = 0;
    for _ in 0..steps {
        let inf = mf.infer(s).unwrap();
        let (a, _) = mf.decide(&inf.values, &mut rng).unwrap();
        let (next, r) = chain_step(n, s, a);
        mf.learn(s, a, r, next).unwrap();
        s = if s == n - 1 { 0 } else { next };
    }
    (0..n).flat_map(|s| mf.table().row(s).to_vec()).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Reads parameter `i` of layer `l` (weights first, then bias), optionally
/// overwriting it; returns the previous value.
fn param(net: &mut Mlp, l: usize, i: usize, set: Option<f64>) -> f64 {
    let layer = &mut net.layers[l];
    let n_w = layer.weights.len();
    let slot = if i < n_w { &mut layer.weights[i] } else { &mut layer.bias[i - n_w] };
    let old = *slot;
    if let Some(v) = set {
        *slot = v;
    }
    old
}

/// Largest relative error between backprop and central differences over all
/// parameters, for the squared-error loss `0.5 * sum((out - target)^2)`.
pub fn gradient_check(sizes: &[usize], inputs: usize, eps: f64, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Mlp::glorot(sizes, &mut rng);
    let n_out = *sizes.last().unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..inputs {
        let x: Vec<f64> = (0..sizes[0]).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let target: Vec<f64> = (0..n_out).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let loss = |net: &Mlp| -> f64 {
            net.forward(&x)
                .iter()
                .zip(&target)
                .map(|(o, t)| 0.5 * (o - t).powi(2))
                .sum()
        };
        let cache = net.forward_cached(&x);
        let grad_out: Vec<f64> = cache.output().iter().zip(&target).map(|(o, t)| o - t).collect();
        let mut grads = Mlp::zeros(sizes);
        net.backward(&cache, &grad_out, &mut grads);
        for l in 0..net.layers.len() {
            let n_w = net.layers[l].weights.len();
            let n_b = net.layers[l].bias.len();
            for i in 0..n_w + n_b {
                let analytic = if i < n_w { grads.layers[l].weights[i] } else { grads.layers[l].bias[i - n_w] };
                let orig = param(&mut net, l, i, None);
                param(&mut net, l, i, Some(orig + eps));
                let up = loss(&net);
                param(&mut net, l, i, Some(orig - eps));
                let down = loss(&net);
                param(&mut net, l, i, Some(orig));
                let numeric = (up - down) / (2.0 * eps);
                let denom = analytic.abs().max(numeric.abs());
                // both gradients vanish (e.g. a dead rectifier): nothing to compare
                if denom > 1e-7 {
                    worst = worst.max((analytic - numeric).abs() / denom);
                }
            }
        }
    }
    worst
}

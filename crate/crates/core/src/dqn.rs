//! Baseline deep Q-network: a small fully connected network over one-hot
//! state input, trained by plain SGD on replayed transitions.

use std::collections::VecDeque;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{ActionId, StateId};
use crate::error::{Error, Result};
use crate::policy::{softmax, ProbDist};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub rows: usize,
    pub cols: usize,
    /// Row-major `rows x cols`; row `i` holds the input weights of unit `i`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    fn zeros(cols: usize, rows: usize) -> Self {
        Layer {
            rows,
            cols,
            weights: vec![0.0; rows * cols],
            bias: vec![0.0; rows],
        }
    }

    fn affine(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.weights.chunks_exact(self.cols).zip(&self.bias).map(|(row, b)| {
            b + row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>()
        }));
    }
}

/// Fully connected network, rectifier on hidden layers, identity output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Layer>,
}

/// Activations kept for backpropagation: `acts[0]` is the input,
/// `acts[i + 1]` the output of layer `i` after its nonlinearity.
pub struct ForwardCache {
    acts: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.acts.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

impl Mlp {
    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2, "network needs at least an input and an output size");
        Mlp {
            layers: sizes.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect(),
        }
    }

    /// Weights uniform in `±sqrt(6 / (fan_in + fan_out))`, biases zero.
    pub fn glorot<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        let mut net = Mlp::zeros(sizes);
        for layer in &mut net.layers {
            let limit = (6.0 / (layer.cols + layer.rows) as f64).sqrt();
            for w in &mut layer.weights {
                *w = rng.gen_range(-limit..limit);
            }
        }
        net
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].cols
    }

    pub fn output_size(&self) -> usize {
        self.layers.last().map(|l| l.rows).unwrap_or(0)
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn forward_cached(&self, input: &[f64]) -> ForwardCache {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(input.to_vec());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::with_capacity(layer.rows);
            layer.affine(&acts[i], &mut out);
            if i < last {
                for v in &mut out {
                    *v = v.max(0.0);
                }
            }
            acts.push(out);
        }
        ForwardCache { acts }
    }

    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        self.forward_cached(input).acts.pop().unwrap_or_default()
    }

    /// Accumulates `d loss / d params` into `grads` given `d loss / d output`.
    pub fn backward(&self, cache: &ForwardCache, grad_out: &[f64], grads: &mut Mlp) {
        let mut delta = grad_out.to_vec();
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let input = &cache.acts[i];
            let g = &mut grads.layers[i];
            for (r, d) in delta.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                g.bias[r] += d;
                for (gw, x) in g.weights[r * layer.cols..(r + 1) * layer.cols].iter_mut().zip(input) {
                    *gw += d * x;
                }
            }
            if i == 0 {
                break;
            }
            let mut prev = vec![0.0; layer.cols];
            for (r, d) in delta.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                for (p, w) in prev.iter_mut().zip(&layer.weights[r * layer.cols..(r + 1) * layer.cols]) {
                    *p += d * w;
                }
            }
            // rectifier derivative, from the post-activation value
            for (p, a) in prev.iter_mut().zip(input) {
                if *a <= 0.0 {
                    *p = 0.0;
                }
            }
            delta = prev;
        }
    }

    fn zeroed(&self) -> Mlp {
        Mlp {
            layers: self.layers.iter().map(|l| Layer::zeros(l.cols, l.rows)).collect(),
        }
    }

    fn sgd(&mut self, grads: &Mlp, lr: f64) {
        for (layer, g) in self.layers.iter_mut().zip(&grads.layers) {
            for (w, gw) in layer.weights.iter_mut().zip(&g.weights) {
                *w -= lr * gw;
            }
            for (b, gb) in layer.bias.iter_mut().zip(&g.bias) {
                *b -= lr * gb;
            }
        }
    }

    /// Flat view over all parameters, layer by layer, weights then bias.
    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(l.bias.iter()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(self).map_err(|e| Error::Parse {
            field: "<root>".into(),
            reason: e.to_string(),
        })?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let net: Mlp = serde_json::from_str(&text).map_err(|e| Error::Parse {
            field: "layers".into(),
            reason: e.to_string(),
        })?;
        for (i, l) in net.layers.iter().enumerate() {
            if l.weights.len() != l.rows * l.cols || l.bias.len() != l.rows {
                return Err(Error::Parse {
                    field: format!("layers[{i}]"),
                    reason: "weight or bias length does not match the layer shape".into(),
                });
            }
            if i > 0 && net.layers[i - 1].rows != l.cols {
                return Err(Error::Parse {
                    field: format!("layers[{i}].cols"),
                    reason: "does not match the previous layer's rows".into(),
                });
            }
        }
        if net.layers.is_empty() {
            return Err(Error::Parse {
                field: "layers".into(),
                reason: "no layers".into(),
            });
        }
        Ok(net)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub s: StateId,
    pub a: ActionId,
    pub r: f64,
    pub s_next: StateId,
    /// The step ended an episode: no bootstrapping from `s_next`.
    pub reset: bool,
}

/// FIFO experience store with uniform sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    entries: VecDeque<Transition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        ReplayBuffer {
            capacity,
            entries: VecDeque::with_capacity(capacity.min(1 << 16)),
        }
    }

    pub fn push(&mut self, t: Transition) {
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(t);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.entries.iter()
    }

    /// Uniform draw with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<Transition> {
        (0..n)
            .map(|_| self.entries[rng.gen_range(0..self.entries.len())])
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DqnParams {
    pub hidden: [usize; 2],
    pub learning_rate: f64,
    pub gamma: f64,
    pub tau: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Copy the online network into a frozen target every this many train
    /// steps; `None` bootstraps from the online network.
    pub target_sync: Option<usize>,
}

impl Default for DqnParams {
    fn default() -> Self {
        DqnParams {
            hidden: [76, 76],
            learning_rate: 0.1,
            gamma: 0.95,
            tau: 0.05,
            batch_size: 32,
            buffer_capacity: 10_000,
            target_sync: None,
        }
    }
}

impl DqnParams {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.contains(&0) {
            return Err(Error::param("dqn.hidden", "layer sizes must be positive"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::param("dqn.learning_rate", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::param("dqn.gamma", "must lie in [0, 1)"));
        }
        if !(self.tau > 0.0) {
            return Err(Error::param("dqn.tau", "must be positive"));
        }
        if self.batch_size == 0 || self.buffer_capacity < self.batch_size {
            return Err(Error::param("dqn.batch_size", "must be positive and fit in the buffer"));
        }
        if self.target_sync == Some(0) {
            return Err(Error::param("dqn.target_sync", "must be positive when set"));
        }
        Ok(())
    }
}

/// Result of one replay training step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrainOutcome {
    Trained { mean_loss: f64 },
    /// Fewer transitions stored than one batch.
    Skipped,
}

pub struct DqnAgent {
    params: DqnParams,
    num_states: usize,
    net: Mlp,
    target: Option<Mlp>,
    buffer: ReplayBuffer,
    train_steps: usize,
}

impl DqnAgent {
    pub fn new<R: Rng + ?Sized>(num_states: usize, num_actions: usize, params: DqnParams, rng: &mut R) -> Self {
        let sizes = [num_states, params.hidden[0], params.hidden[1], num_actions];
        let net = Mlp::glorot(&sizes, rng);
        Self::with_network(num_states, net, params)
    }

    pub fn with_network(num_states: usize, net: Mlp, params: DqnParams) -> Self {
        let target = params.target_sync.map(|_| net.clone());
        DqnAgent {
            params,
            num_states,
            net,
            target,
            buffer: ReplayBuffer::new(params.buffer_capacity),
            train_steps: 0,
        }
    }

    pub fn network(&self) -> &Mlp {
        &self.net
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn encode(&self, s: StateId) -> Vec<f64> {
        let mut x = vec![0.0; self.num_states];
        x[s] = 1.0;
        x
    }

    pub fn q_values(&self, s: StateId) -> Vec<f64> {
        self.net.forward(&self.encode(s))
    }

    /// Softmax action selection over the network's action values.
    pub fn act<R: Rng + ?Sized>(&self, s: StateId, rng: &mut R) -> Result<(ActionId, ProbDist)> {
        let dist = softmax(&self.q_values(s), self.params.tau)?;
        Ok((dist.sample(rng), dist))
    }

    pub fn remember(&mut self, t: Transition) {
        self.buffer.push(t);
    }

    /// One SGD step on `1/B * sum 1/2 (Q(s,a) - y)^2` over a uniform batch,
    /// with `y = r + gamma * max_a' Q(s', a')` (no bootstrap across resets).
    pub fn train_step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> TrainOutcome {
        let b = self.params.batch_size;
        if self.buffer.len() < b {
            return TrainOutcome::Skipped;
        }
        let batch = self.buffer.sample(b, rng);
        let mut grads = self.net.zeroed();
        let mut loss = 0.0;
        for t in &batch {
            let bootstrap = if t.reset {
                0.0
            } else {
                let next = self.target.as_ref().unwrap_or(&self.net).forward(&self.encode(t.s_next));
                next.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            };
            let y = t.r + self.params.gamma * bootstrap;
            let cache = self.net.forward_cached(&self.encode(t.s));
            let err = cache.output()[t.a] - y;
            loss += 0.5 * err * err;
            let mut grad_out = vec![0.0; self.net.output_size()];
            grad_out[t.a] = err / b as f64;
            self.net.backward(&cache, &grad_out, &mut grads);
        }
        self.net.sgd(&grads, self.params.learning_rate);
        self.train_steps += 1;
        if let (Some(period), Some(target)) = (self.params.target_sync, self.target.as_mut()) {
            if self.train_steps % period == 0 {
                *target = self.net.clone();
            }
        }
        TrainOutcome::Trained {
            mean_loss: loss / b as f64,
        }
    }
}

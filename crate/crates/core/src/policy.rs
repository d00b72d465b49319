//! Softmax, entropy and low-pass filtering over probability vectors.
//!
//! These are shared by both experts and by the meta-controller; all functions
//! are pure.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the total mass of a probability vector.
pub const PROB_TOL: f64 = 1e-9;

/// A discrete probability distribution (entries ≥ 0, summing to 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProbDist(Vec<f64>);

impl ProbDist {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        check_dist(&probs)?;
        Ok(ProbDist(probs))
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform distribution over zero outcomes");
        ProbDist(vec![1.0 / n as f64; n])
    }

    pub fn one_hot(n: usize, index: usize) -> Self {
        assert!(index < n, "one-hot index {index} out of range for {n}");
        let mut probs = vec![0.0; n];
        probs[index] = 1.0;
        ProbDist(probs)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn entropy_bits(&self) -> f64 {
        entropy_unchecked(&self.0)
    }

    /// Draws an index by inverting the cumulative distribution with one
    /// uniform variate.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (i, p) in self.0.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        // u landed in the rounding gap above the cumulative sum
        self.0
            .iter()
            .rposition(|&p| p > 0.0)
            .unwrap_or(self.0.len() - 1)
    }

    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }
}

impl TryFrom<Vec<f64>> for ProbDist {
    type Error = Error;

    fn try_from(probs: Vec<f64>) -> Result<Self> {
        ProbDist::new(probs)
    }
}

impl From<ProbDist> for Vec<f64> {
    fn from(dist: ProbDist) -> Self {
        dist.0
    }
}

fn check_dist(probs: &[f64]) -> Result<()> {
    if probs.is_empty() {
        return Err(Error::Input("empty probability vector".into()));
    }
    if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
        return Err(Error::Input(format!("probability entry {p} is not in [0, 1]")));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > PROB_TOL {
        return Err(Error::Input(format!("probabilities sum to {sum}, expected 1")));
    }
    Ok(())
}

/// Index of the largest value; the first one wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Boltzmann distribution `exp(v_i / tau) / sum_j exp(v_j / tau)`.
///
/// The maximum is subtracted before exponentiation so that small temperatures
/// (0.02 with values of order 1 gives exponents of 50 and more) cannot overflow.
pub fn softmax(values: &[f64], tau: f64) -> Result<ProbDist> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::param("tau", format!("must be positive, got {tau}")));
    }
    if values.is_empty() {
        return Err(Error::Input("softmax over an empty value vector".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("softmax input contains a non-finite value".into()));
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = values.iter().map(|v| ((v - max) / tau).exp()).collect();
    let total: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= total;
    }
    Ok(ProbDist(probs))
}

/// Shannon entropy in bits, with `0 log 0 = 0`. Validates the input.
pub fn entropy_bits(probs: &[f64]) -> Result<f64> {
    check_dist(probs)?;
    Ok(entropy_unchecked(probs))
}

fn entropy_unchecked(probs: &[f64]) -> f64 {
    let h: f64 = probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum();
    // rounding can push a one-hot entropy to -0.0 or a hair below zero
    h.max(0.0)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::param("alpha_f", format!("must lie in [0, 1], got {alpha}")));
    }
    Ok(())
}

/// Exponential low-pass filter `(1 - alpha) * old + alpha * new` applied
/// entry-wise. A convex combination of two distributions is a distribution.
pub fn low_pass(old: &ProbDist, new: &ProbDist, alpha: f64) -> Result<ProbDist> {
    check_alpha(alpha)?;
    if old.len() != new.len() {
        return Err(Error::Input(format!(
            "low-pass length mismatch: {} vs {}",
            old.len(),
            new.len()
        )));
    }
    let probs = old
        .0
        .iter()
        .zip(&new.0)
        .map(|(o, n)| (1.0 - alpha) * o + alpha * n)
        .collect();
    Ok(ProbDist(probs))
}

pub fn low_pass_scalar(old: f64, new: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok((1.0 - alpha) * old + alpha * new)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn softmax_of_equal_values_is_uniform() {
        let d = softmax(&[1.0; 8], 0.02).unwrap();
        for p in d.probs() {
            assert_abs_diff_eq!(*p, 0.125, epsilon = 1e-15);
        }
    }

    #[test]
    fn softmax_does_not_overflow_at_small_tau() {
        let d = softmax(&[1.0, 0.0], 0.02).unwrap();
        // 1 / (1 + e^50), evaluated independently of the implementation
        let tail = 1.0 / (1.0 + 50f64.exp());
        assert_abs_diff_eq!(tail, 1.928749847963918e-22, epsilon = 1e-34);
        assert_abs_diff_eq!(d.probs()[1], tail, epsilon = 1e-34);
        assert_abs_diff_eq!(d.probs()[0], 1.0, epsilon = 1e-15);

        let huge = softmax(&[1000.0, 0.0, -1000.0], 0.02).unwrap();
        assert!(huge.probs().iter().all(|p| p.is_finite()));
    }

    #[test]
    fn softmax_rejects_bad_input() {
        assert!(matches!(softmax(&[1.0], 0.0), Err(Error::Parameter { .. })));
        assert!(matches!(softmax(&[1.0], -1.0), Err(Error::Parameter { .. })));
        assert!(matches!(softmax(&[], 1.0), Err(Error::Input(_))));
        assert!(matches!(softmax(&[f64::NAN], 1.0), Err(Error::Input(_))));
    }

    #[test]
    fn entropy_reference_values() {
        assert_abs_diff_eq!(ProbDist::uniform(8).entropy_bits(), 3.0, epsilon = 1e-12);
        assert_eq!(ProbDist::one_hot(8, 3).entropy_bits(), 0.0);
        let half = [0.5, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        assert_abs_diff_eq!(entropy_bits(&half).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn entropy_rejects_unnormalized() {
        assert!(entropy_bits(&[0.5, 0.4]).is_err());
        assert!(entropy_bits(&[1.2, -0.2]).is_err());
    }

    #[test]
    fn low_pass_reference_values() {
        let out = low_pass(&ProbDist::uniform(8), &ProbDist::one_hot(8, 0), 0.6).unwrap();
        assert_abs_diff_eq!(out.probs()[0], 0.65, epsilon = 1e-12);
        for p in &out.probs()[1..] {
            assert_abs_diff_eq!(*p, 0.05, epsilon = 1e-12);
        }

        let a = ProbDist::new(vec![0.2, 0.3, 0.5]).unwrap();
        let b = ProbDist::new(vec![0.6, 0.3, 0.1]).unwrap();
        assert_eq!(low_pass(&a, &a, 0.37).unwrap(), a);
        assert_eq!(low_pass(&a, &b, 0.0).unwrap(), a);
        assert_eq!(low_pass(&a, &b, 1.0).unwrap(), b);
        assert_eq!(low_pass_scalar(2.0, 4.0, 0.5).unwrap(), 3.0);
    }

    #[test]
    fn low_pass_rejects_bad_arguments() {
        let a = ProbDist::uniform(3);
        let b = ProbDist::uniform(4);
        assert!(matches!(low_pass(&a, &a, 1.5), Err(Error::Parameter { .. })));
        assert!(matches!(low_pass(&a, &b, 0.5), Err(Error::Input(_))));
        assert!(low_pass_scalar(0.0, 1.0, -0.1).is_err());
    }

    #[test]
    fn sample_follows_distribution() {
        let d = ProbDist::new(vec![0.1, 0.0, 0.6, 0.3]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 20_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[d.sample(&mut rng)] += 1;
        }
        assert_eq!(counts[1], 0);
        for (c, p) in counts.iter().zip(d.probs()) {
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((*c as f64 / n as f64 - p).abs() <= 3.0 * se + 1e-12);
        }
    }

    fn values_strategy() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-5.0f64..5.0, 1..12)
    }

    proptest! {
        #[test]
        fn softmax_output_is_valid(values in values_strategy(), tau in 0.01f64..5.0) {
            let d = softmax(&values, tau).unwrap();
            let sum: f64 = d.probs().iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-9);
            prop_assert!(d.probs().iter().all(|p| (0.0..=1.0).contains(p)));
        }

        #[test]
        fn softmax_preserves_argmax(values in values_strategy(), tau in 0.01f64..5.0) {
            let d = softmax(&values, tau).unwrap();
            let top = values[d.argmax()];
            let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!(top, max);
        }

        #[test]
        fn softmax_shift_invariant(values in values_strategy(), tau in 0.05f64..5.0, c in -10.0f64..10.0) {
            let a = softmax(&values, tau).unwrap();
            let shifted: Vec<f64> = values.iter().map(|v| v + c).collect();
            let b = softmax(&shifted, tau).unwrap();
            for (x, y) in a.probs().iter().zip(b.probs()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn uniform_maximizes_entropy(raw in prop::collection::vec(0.0f64..1.0, 2..10)) {
            let total: f64 = raw.iter().sum();
            prop_assume!(total > 1e-6);
            let probs: Vec<f64> = raw.iter().map(|p| p / total).collect();
            let n = probs.len();
            let h = entropy_bits(&probs).unwrap();
            prop_assert!(h >= 0.0);
            prop_assert!(h <= (n as f64).log2() + 1e-12);
            prop_assert!((ProbDist::uniform(n).entropy_bits() - (n as f64).log2()).abs() < 1e-12);
        }

        #[test]
        fn low_pass_is_closed(a in prop::collection::vec(0.0f64..1.0, 5),
                              b in prop::collection::vec(0.0f64..1.0, 5),
                              alpha in 0.0f64..=1.0) {
            let norm = |v: Vec<f64>| {
                let s: f64 = v.iter().sum::<f64>() + 1e-3;
                v.iter().map(|x| (x + 2e-4) / s).collect::<Vec<_>>()
            };
            let pa = ProbDist::new(norm(a)).unwrap();
            let pb = ProbDist::new(norm(b)).unwrap();
            let out = low_pass(&pa, &pb, alpha).unwrap();
            prop_assert!(ProbDist::new(out.probs().to_vec()).is_ok());
        }
    }
}

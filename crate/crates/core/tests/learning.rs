//! Convergence of the model-free learner and exactness of the network
//! gradients.

mod common;

use common::*;
use mbmf_core::expert::MfParams;

#[test]
fn q_learning_matches_value_iteration_on_a_chain() {
    let params = MfParams::default();
    let oracle = chain_oracle(5, params.gamma);
    for seed in 0..5 {
        let q = train_mf_on_chain(5, params, 10_000, seed);
        let err = max_abs_diff(&q, &oracle);
        assert!(err < 0.05, "seed {seed}: max |q - q*| = {err}\nq = {q:?}\noracle = {oracle:?}");
    }
}

#[test]
fn backprop_matches_finite_differences() {
    let worst = gradient_check(&[38, 76, 76, 8], 10, 1e-5, 3);
    assert!(worst < 1e-4, "worst relative error {worst}");
}

#[test]
fn gradient_check_on_a_small_net() {
    let worst = gradient_check(&[4, 5, 3], 5, 1e-6, 9);
    assert!(worst < 1e-6, "worst relative error {worst}");
}

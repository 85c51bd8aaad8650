//! Shared fixtures for the criterion benches.

use narx_core::benchmarks::{gen_mimo_linear, Excitation};
use narx_core::data::normalize;
use narx_core::narx::OneStepProblem;
use narx_core::{Dataset, LagSpec, NarxNetwork};

/// Ground-truth lags of the `mimo_linear` benchmark.
pub fn mimo_truth() -> LagSpec {
    LagSpec::new(vec![1, 1], vec![1, 2, 0]).expect("valid lags")
}

/// Normalised `mimo_linear` data, 1% noise.
pub fn mimo_data(n: usize) -> Dataset {
    let raw = gen_mimo_linear(n, &Excitation::default(), 0.01, 0).expect("generator");
    normalize(&raw).0
}

/// Deterministic weights in `[-0.5, 0.5]`; the values only need to be
/// non-trivial.
pub fn weights(len: usize) -> Vec<f64> {
    (0..len).map(|i| ((i * 37 % 101) as f64 / 100.0) - 0.5).collect()
}

pub fn network(lags: LagSpec, hidden: usize) -> NarxNetwork {
    let w = weights(narx_core::narx::weight_count(&lags, hidden));
    NarxNetwork::decode_weights(&w, lags, hidden).expect("weights fit")
}

/// The one-step training problem on the first 75% of `n` samples.
pub fn training_problem(n: usize, hidden: usize) -> OneStepProblem {
    let d = mimo_data(n);
    let end = n * 3 / 4;
    OneStepProblem::new(&d, mimo_truth(), hidden, 0, end).expect("enough samples")
}

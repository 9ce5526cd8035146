//! Differentiable stochastic policies with score functions.
//!
//! Every policy exposes the score `ψ(s, a) = ∇_θ log π(a|s)` — the feature
//! vector of the compatible critics — plus a baseline feature map `φ(s)` used
//! for the state-value part of those critics. Scores are verified against
//! central finite differences of `log_prob` in the test suites.

mod features;
mod gaussian_beta;
mod gibbs;
mod tree;

pub use features::{fourier_features, LinearBasis};
pub use gaussian_beta::GaussianBetaPolicy;
pub use gibbs::{softmax, LinearGibbs, StatelessGibbs};
pub use tree::TreePolicy;

use crate::error::Result;
use ndarray::Array1;
use rand_chacha::ChaCha8Rng;

/// A parametric stochastic policy over states `S` and actions `A`.
pub trait Policy<S, A> {
    /// Draw an action from `π(·|s)`.
    fn sample(&self, state: &S, rng: &mut ChaCha8Rng) -> Result<A>;

    /// `log π(a|s)`.
    fn log_prob(&self, state: &S, action: &A) -> Result<f64>;

    /// Score function `∇_θ log π(a|s)`, aligned with [`Policy::params`].
    fn score(&self, state: &S, action: &A) -> Result<Array1<f64>>;

    /// State features `φ(s)` pairing with this policy's score in the
    /// compatible critic construction.
    fn baseline_features(&self, state: &S) -> Array1<f64>;

    fn n_params(&self) -> usize;

    fn params(&self) -> &Array1<f64>;

    fn params_mut(&mut self) -> &mut Array1<f64>;
}

/// Policies over a finite action set that can report the full distribution;
/// used by experiment drivers to log action probabilities.
pub trait DiscretePolicy<S>: Policy<S, usize> {
    fn probabilities(&self, state: &S) -> Result<Vec<f64>>;
}

//! Directly parameterised binary policy for the two-stage tree task, used to
//! evaluate objective landscapes over the full parameter square.

use super::{DiscretePolicy, Policy};
use crate::envs::tree::TreeState;
use crate::error::{Error, Result};
use ndarray::Array1;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Bernoulli choice at each of the two decision stages, with the success
/// probabilities themselves as the parameters: `θ[0]` is the probability of
/// branching right at the root, `θ[1]` the probability of branching up at
/// either mid-level state.
///
/// The score function `∂ log π / ∂θ` is `1/θ` or `-1/(1-θ)` in the matching
/// coordinate, so parameters must stay strictly inside `(0, 1)`.
#[derive(Clone, Debug)]
pub struct TreePolicy {
    theta: Array1<f64>,
}

impl TreePolicy {
    pub fn new(p_right: f64, p_up: f64) -> Result<Self> {
        let policy = Self {
            theta: ndarray::arr1(&[p_right, p_up]),
        };
        policy.check_interior()?;
        Ok(policy)
    }

    fn check_interior(&self) -> Result<()> {
        for &p in &self.theta {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::Precondition(format!(
                    "tree policy parameters must lie strictly in (0, 1), got {p}"
                )));
            }
        }
        Ok(())
    }

    /// Which parameter drives the decision at `state`, if any.
    fn stage(state: &TreeState) -> Option<usize> {
        match state {
            TreeState::Root => Some(0),
            TreeState::Left | TreeState::Right => Some(1),
            _ => None,
        }
    }
}

impl Policy<TreeState, usize> for TreePolicy {
    fn sample(&self, state: &TreeState, rng: &mut ChaCha8Rng) -> Result<usize> {
        self.check_interior()?;
        let stage = Self::stage(state).ok_or_else(|| {
            Error::Precondition(format!("no decision available at leaf state {state:?}"))
        })?;
        Ok(usize::from(rng.gen::<f64>() < self.theta[stage]))
    }

    fn log_prob(&self, state: &TreeState, action: &usize) -> Result<f64> {
        let probs = self.probabilities(state)?;
        probs
            .get(*action)
            .map(|p| p.ln())
            .ok_or(Error::Precondition(format!("action {action} out of range")))
    }

    fn score(&self, state: &TreeState, action: &usize) -> Result<Array1<f64>> {
        self.check_interior()?;
        let stage = Self::stage(state).ok_or_else(|| {
            Error::Precondition(format!("no decision available at leaf state {state:?}"))
        })?;
        let p = self.theta[stage];
        let mut grad = Array1::zeros(2);
        grad[stage] = match action {
            1 => 1.0 / p,
            0 => -1.0 / (1.0 - p),
            _ => return Err(Error::Precondition(format!("action {action} out of range"))),
        };
        Ok(grad)
    }

    fn baseline_features(&self, state: &TreeState) -> Array1<f64> {
        let mut onehot = Array1::zeros(7);
        onehot[state.index()] = 1.0;
        onehot
    }

    fn n_params(&self) -> usize {
        2
    }

    fn params(&self) -> &Array1<f64> {
        &self.theta
    }

    fn params_mut(&mut self) -> &mut Array1<f64> {
        &mut self.theta
    }
}

impl DiscretePolicy<TreeState> for TreePolicy {
    fn probabilities(&self, state: &TreeState) -> Result<Vec<f64>> {
        self.check_interior()?;
        let stage = Self::stage(state).ok_or_else(|| {
            Error::Precondition(format!("no decision available at leaf state {state:?}"))
        })?;
        let p = self.theta[stage];
        Ok(vec![1.0 - p, p])
    }
}

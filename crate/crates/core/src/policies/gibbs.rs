//! Gibbs (softmax) policies over finite action sets.

use super::{DiscretePolicy, Policy};
use crate::error::{Error, Result};
use crate::policies::features::LinearBasis;
use ndarray::Array1;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / z).collect()
}

fn sample_categorical(probs: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let draw: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if draw < acc {
            return i;
        }
    }
    probs.len() - 1
}

fn ensure_finite(params: &Array1<f64>) -> Result<()> {
    if params.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite("gibbs policy parameters".into()))
    }
}

/// Gibbs policy with one logit parameter per action and no state dependence
/// (the bandit policy).
#[derive(Clone, Debug)]
pub struct StatelessGibbs {
    theta: Array1<f64>,
}

impl StatelessGibbs {
    /// Uniform policy over `n_actions`.
    pub fn new(n_actions: usize) -> Result<Self> {
        if n_actions == 0 {
            return Err(Error::Precondition("policy needs at least one action".into()));
        }
        Ok(Self { theta: Array1::zeros(n_actions) })
    }

    pub fn n_actions(&self) -> usize {
        self.theta.len()
    }

    fn probs(&self) -> Result<Vec<f64>> {
        ensure_finite(&self.theta)?;
        Ok(softmax(self.theta.as_slice().unwrap()))
    }
}

impl Policy<(), usize> for StatelessGibbs {
    fn sample(&self, _state: &(), rng: &mut ChaCha8Rng) -> Result<usize> {
        Ok(sample_categorical(&self.probs()?, rng))
    }

    fn log_prob(&self, _state: &(), action: &usize) -> Result<f64> {
        let probs = self.probs()?;
        probs
            .get(*action)
            .map(|p| p.ln())
            .ok_or_else(|| Error::Precondition(format!("action {action} out of range")))
    }

    fn score(&self, _state: &(), action: &usize) -> Result<Array1<f64>> {
        let probs = self.probs()?;
        if *action >= probs.len() {
            return Err(Error::Precondition(format!("action {action} out of range")));
        }
        let mut score = Array1::from_vec(probs.iter().map(|&p| -p).collect());
        score[*action] += 1.0;
        Ok(score)
    }

    fn baseline_features(&self, _state: &()) -> Array1<f64> {
        Array1::ones(1)
    }

    fn n_params(&self) -> usize {
        self.theta.len()
    }

    fn params(&self) -> &Array1<f64> {
        &self.theta
    }

    fn params_mut(&mut self) -> &mut Array1<f64> {
        &mut self.theta
    }
}

impl DiscretePolicy<()> for StatelessGibbs {
    fn probabilities(&self, _state: &()) -> Result<Vec<f64>> {
        self.probs()
    }
}

/// Gibbs policy with per-action linear logits over `φ(s) = [1, s…]`.
///
/// Parameters are laid out in `n_actions` contiguous blocks of `φ` length;
/// the score of an action places `φ(s)` in its block minus the
/// probability-weighted average block, so scores sum to zero across actions.
#[derive(Clone, Debug)]
pub struct LinearGibbs {
    basis: LinearBasis,
    n_actions: usize,
    theta: Array1<f64>,
}

impl LinearGibbs {
    pub fn new(state_dim: usize, n_actions: usize) -> Result<Self> {
        if n_actions == 0 {
            return Err(Error::Precondition("policy needs at least one action".into()));
        }
        let basis = LinearBasis::new(state_dim);
        Ok(Self {
            basis,
            n_actions,
            theta: Array1::zeros(basis.dim() * n_actions),
        })
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    fn block(&self) -> usize {
        self.basis.dim()
    }

    fn logits(&self, phi: &Array1<f64>) -> Vec<f64> {
        (0..self.n_actions)
            .map(|a| {
                let start = a * self.block();
                self.theta
                    .slice(ndarray::s![start..start + self.block()])
                    .dot(phi)
            })
            .collect()
    }

    fn probs(&self, state: &[f64]) -> Result<(Vec<f64>, Array1<f64>)> {
        ensure_finite(&self.theta)?;
        let phi = self.basis.features(state);
        let probs = softmax(&self.logits(&phi));
        Ok((probs, phi))
    }
}

impl Policy<Vec<f64>, usize> for LinearGibbs {
    fn sample(&self, state: &Vec<f64>, rng: &mut ChaCha8Rng) -> Result<usize> {
        let (probs, _) = self.probs(state)?;
        Ok(sample_categorical(&probs, rng))
    }

    fn log_prob(&self, state: &Vec<f64>, action: &usize) -> Result<f64> {
        let (probs, _) = self.probs(state)?;
        probs
            .get(*action)
            .map(|p| p.ln())
            .ok_or_else(|| Error::Precondition(format!("action {action} out of range")))
    }

    fn score(&self, state: &Vec<f64>, action: &usize) -> Result<Array1<f64>> {
        let (probs, phi) = self.probs(state)?;
        if *action >= self.n_actions {
            return Err(Error::Precondition(format!("action {action} out of range")));
        }
        let block = self.block();
        let mut score = Array1::zeros(self.theta.len());
        for (b, &p) in probs.iter().enumerate() {
            let weight = if b == *action { 1.0 - p } else { -p };
            let start = b * block;
            for i in 0..block {
                score[start + i] = weight * phi[i];
            }
        }
        Ok(score)
    }

    fn baseline_features(&self, state: &Vec<f64>) -> Array1<f64> {
        self.basis.features(state)
    }

    fn n_params(&self) -> usize {
        self.theta.len()
    }

    fn params(&self) -> &Array1<f64> {
        &self.theta
    }

    fn params_mut(&mut self) -> &mut Array1<f64> {
        &mut self.theta
    }
}

impl DiscretePolicy<Vec<f64>> for LinearGibbs {
    fn probabilities(&self, state: &Vec<f64>) -> Result<Vec<f64>> {
        Ok(self.probs(state)?.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn softmax_is_uniform_at_zero_and_sums_to_one() {
        let p = softmax(&[0.0, 0.0, 0.0]);
        for &x in &p {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
        let q = softmax(&[500.0, -500.0, 3.0]);
        assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(q.iter().all(|&x| x.is_finite()));
    }

    #[test]
    fn stateless_score_is_onehot_minus_probabilities() {
        let policy = StatelessGibbs::new(3).unwrap();
        let score = policy.score(&(), &1).unwrap();
        let expect = [-1.0 / 3.0, 2.0 / 3.0, -1.0 / 3.0];
        for (got, want) in score.iter().zip(expect) {
            assert!((got - want).abs() < 1e-15);
        }
        // Scores sum to zero.
        assert!(score.sum().abs() < 1e-15);
    }

    #[test]
    fn single_action_policy_is_deterministic_with_zero_score() {
        let policy = StatelessGibbs::new(1).unwrap();
        assert_eq!(policy.probabilities(&()).unwrap(), vec![1.0]);
        assert_eq!(policy.score(&(), &0).unwrap().to_vec(), vec![0.0]);
    }

    #[test]
    fn non_finite_parameters_are_rejected() {
        let mut policy = StatelessGibbs::new(2).unwrap();
        policy.params_mut()[0] = f64::NAN;
        assert!(policy.probabilities(&()).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(policy.sample(&(), &mut rng).is_err());
    }

    #[test]
    fn linear_gibbs_scores_sum_to_zero_over_actions() {
        let mut policy = LinearGibbs::new(2, 3).unwrap();
        let state = vec![0.4, -0.7];
        for (i, v) in policy.params_mut().iter_mut().enumerate() {
            *v = (i as f64 * 0.37).sin();
        }
        let mut total: Array1<f64> = Array1::zeros(policy.n_params());
        let probs = policy.probabilities(&state).unwrap();
        for (a, &p) in probs.iter().enumerate() {
            total = total + policy.score(&state, &a).unwrap() * p;
        }
        assert!(total.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn sampling_frequencies_track_probabilities() {
        let mut policy = StatelessGibbs::new(3).unwrap();
        policy.params_mut().assign(&ndarray::array![0.0, 1.0, -1.0]);
        let probs = policy.probabilities(&()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 200_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            counts[policy.sample(&(), &mut rng).unwrap()] += 1;
        }
        for (c, p) in counts.iter().zip(&probs) {
            let freq = *c as f64 / n as f64;
            assert!((freq - p).abs() < 5e-3, "{freq} vs {p}");
        }
    }
}

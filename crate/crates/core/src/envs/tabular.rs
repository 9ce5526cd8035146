//! Randomly generated finite MDPs with a dynamic-programming evaluator, used
//! to cross-check temporal-difference learners against exact fixed points.

use crate::error::{Error, Result};
use crate::mdp::{ActionSpace, Environment, StartFrom, Step};
use crate::policies::{DiscretePolicy, Policy};
use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Continuing MDP with dense transition kernels and deterministic rewards
/// per state-action pair. Episodes never terminate; evaluation truncates.
#[derive(Clone, Debug)]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    /// `transitions[s][a][s']` = P(s' | s, a).
    transitions: Vec<Vec<Vec<f64>>>,
    /// `rewards[s][a]`.
    rewards: Vec<Vec<f64>>,
    state: usize,
}

impl TabularMdp {
    pub fn new(transitions: Vec<Vec<Vec<f64>>>, rewards: Vec<Vec<f64>>) -> Result<Self> {
        let n_states = transitions.len();
        if n_states == 0 || rewards.len() != n_states {
            return Err(Error::Precondition(
                "transition and reward tables must cover the same states".into(),
            ));
        }
        let n_actions = transitions[0].len();
        for s in 0..n_states {
            if transitions[s].len() != n_actions || rewards[s].len() != n_actions {
                return Err(Error::Precondition(
                    "every state must offer the same actions".into(),
                ));
            }
            for a in 0..n_actions {
                let row = &transitions[s][a];
                if row.len() != n_states {
                    return Err(Error::DimensionMismatch {
                        context: "transition row",
                        expected: n_states,
                        actual: row.len(),
                    });
                }
                let total: f64 = row.iter().sum();
                if row.iter().any(|&p| p < 0.0) || (total - 1.0).abs() > 1e-9 {
                    return Err(Error::Precondition(format!(
                        "transition row ({s}, {a}) is not a distribution (sum {total})"
                    )));
                }
            }
        }
        Ok(Self {
            n_states,
            n_actions,
            transitions,
            rewards,
            state: 0,
        })
    }

    /// Dense random instance: transition rows are normalized positive draws
    /// (full support, hence ergodic) and rewards are uniform on [-1, 1].
    pub fn random_dense(n_states: usize, n_actions: usize, rng: &mut ChaCha8Rng) -> Self {
        let transitions = (0..n_states)
            .map(|_| {
                (0..n_actions)
                    .map(|_| {
                        let raw: Vec<f64> =
                            (0..n_states).map(|_| rng.gen_range(0.05..1.0)).collect();
                        let total: f64 = raw.iter().sum();
                        raw.into_iter().map(|p| p / total).collect()
                    })
                    .collect()
            })
            .collect();
        let rewards = (0..n_states)
            .map(|_| (0..n_actions).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        Self::new(transitions, rewards).expect("generated tables are well-formed")
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn reward(&self, state: usize, action: usize) -> f64 {
        self.rewards[state][action]
    }

    /// Exact `Q^π` for the given policy and a reward table, by iterating the
    /// Bellman expectation operator to the fixed point.
    pub fn q_values_for_rewards(
        &self,
        policy: &[Vec<f64>],
        rewards: &[Vec<f64>],
        discount: f64,
        tol: f64,
    ) -> Result<Array2<f64>> {
        if !(0.0..1.0).contains(&discount) {
            return Err(Error::Precondition(format!(
                "evaluation requires a discount in [0, 1), got {discount}"
            )));
        }
        if policy.len() != self.n_states {
            return Err(Error::DimensionMismatch {
                context: "policy table",
                expected: self.n_states,
                actual: policy.len(),
            });
        }
        let mut q: Array2<f64> = Array2::zeros((self.n_states, self.n_actions));
        for sweep in 0..200_000 {
            let mut next: Array2<f64> = Array2::zeros((self.n_states, self.n_actions));
            let mut delta: f64 = 0.0;
            for s in 0..self.n_states {
                for a in 0..self.n_actions {
                    let mut value = rewards[s][a];
                    for s2 in 0..self.n_states {
                        let p = self.transitions[s][a][s2];
                        if p == 0.0 {
                            continue;
                        }
                        let v: f64 =
                            (0..self.n_actions).map(|a2| policy[s2][a2] * q[(s2, a2)]).sum();
                        value += discount * p * v;
                    }
                    delta = delta.max((value - q[(s, a)]).abs());
                    next[(s, a)] = value;
                }
            }
            q = next;
            if delta < tol {
                return Ok(q);
            }
            let _ = sweep;
        }
        Err(Error::Diverged(
            "policy evaluation did not reach its fixed point".into(),
        ))
    }

    /// Exact `Q^π` under the MDP's own rewards.
    pub fn q_values(&self, policy: &[Vec<f64>], discount: f64, tol: f64) -> Result<Array2<f64>> {
        self.q_values_for_rewards(policy, &self.rewards, discount, tol)
    }
}

impl Environment for TabularMdp {
    type State = usize;
    type Action = usize;

    fn reset(&mut self, rng: &mut ChaCha8Rng) -> usize {
        self.state = rng.gen_range(0..self.n_states);
        self.state
    }

    fn step(&mut self, action: &usize, rng: &mut ChaCha8Rng) -> Result<Step<usize>> {
        if *action >= self.n_actions {
            return Err(Error::Precondition(format!("action {action} out of range")));
        }
        let reward = self.rewards[self.state][*action];
        let row = &self.transitions[self.state][*action];
        let draw = rng.gen::<f64>();
        let mut cum = 0.0;
        let mut next = self.n_states - 1;
        for (s2, &p) in row.iter().enumerate() {
            cum += p;
            if draw < cum {
                next = s2;
                break;
            }
        }
        self.state = next;
        Ok(Step {
            state: next,
            reward,
            terminal: false,
        })
    }

    fn action_space(&self, _state: &usize) -> ActionSpace<usize> {
        ActionSpace::Discrete((0..self.n_actions).collect())
    }
}

impl StartFrom for TabularMdp {
    fn start_from(&mut self, state: &usize) -> Result<()> {
        if *state >= self.n_states {
            return Err(Error::Precondition(format!("state {state} out of range")));
        }
        self.state = *state;
        Ok(())
    }
}

/// Fixed stochastic reference policy over a finite MDP; it has no learnable
/// parameters and exists to drive on-policy evaluation runs.
#[derive(Clone, Debug)]
pub struct FixedTabularPolicy {
    probs: Vec<Vec<f64>>,
    empty: Array1<f64>,
}

impl FixedTabularPolicy {
    pub fn new(probs: Vec<Vec<f64>>) -> Result<Self> {
        for row in &probs {
            let total: f64 = row.iter().sum();
            if row.iter().any(|&p| p < 0.0) || (total - 1.0).abs() > 1e-9 {
                return Err(Error::Precondition(
                    "policy rows must be probability distributions".into(),
                ));
            }
        }
        Ok(Self {
            probs,
            empty: Array1::zeros(0),
        })
    }

    /// Uniform policy over `n_actions` in every state.
    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self::new(vec![vec![1.0 / n_actions as f64; n_actions]; n_states])
            .expect("uniform rows are distributions")
    }

    pub fn probs(&self) -> &[Vec<f64>] {
        &self.probs
    }
}

impl Policy<usize, usize> for FixedTabularPolicy {
    fn sample(&self, state: &usize, rng: &mut ChaCha8Rng) -> Result<usize> {
        let row = self
            .probs
            .get(*state)
            .ok_or_else(|| Error::Precondition(format!("state {state} out of range")))?;
        let draw = rng.gen::<f64>();
        let mut cum = 0.0;
        for (a, &p) in row.iter().enumerate() {
            cum += p;
            if draw < cum {
                return Ok(a);
            }
        }
        Ok(row.len() - 1)
    }

    fn log_prob(&self, state: &usize, action: &usize) -> Result<f64> {
        Ok(self.probabilities(state)?[*action].ln())
    }

    fn score(&self, _state: &usize, _action: &usize) -> Result<Array1<f64>> {
        Ok(Array1::zeros(0))
    }

    fn baseline_features(&self, state: &usize) -> Array1<f64> {
        let mut onehot = Array1::zeros(self.probs.len());
        onehot[*state] = 1.0;
        onehot
    }

    fn n_params(&self) -> usize {
        0
    }

    fn params(&self) -> &Array1<f64> {
        &self.empty
    }

    fn params_mut(&mut self) -> &mut Array1<f64> {
        &mut self.empty
    }
}

impl DiscretePolicy<usize> for FixedTabularPolicy {
    fn probabilities(&self, state: &usize) -> Result<Vec<f64>> {
        self.probs
            .get(*state)
            .cloned()
            .ok_or_else(|| Error::Precondition(format!("state {state} out of range")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::rollout_from;
    use rand::SeedableRng;

    #[test]
    fn generated_rows_are_distributions() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mdp = TabularMdp::random_dense(6, 3, &mut rng);
        for s in 0..6 {
            for a in 0..3 {
                let total: f64 = mdp.transitions[s][a].iter().sum();
                assert!((total - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_state_chain_has_geometric_value() {
        let mdp = TabularMdp::new(vec![vec![vec![1.0]]], vec![vec![1.0]]).unwrap();
        let q = mdp.q_values(&[vec![1.0]], 0.5, 1e-12).unwrap();
        assert!((q[(0, 0)] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn fixed_point_satisfies_the_bellman_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mdp = TabularMdp::random_dense(5, 2, &mut rng);
        let policy = FixedTabularPolicy::uniform(5, 2);
        let discount = 0.9;
        let q = mdp.q_values(policy.probs(), discount, 1e-12).unwrap();
        for s in 0..5 {
            for a in 0..2 {
                let mut rhs = mdp.reward(s, a);
                for s2 in 0..5 {
                    let v: f64 = (0..2).map(|a2| 0.5 * q[(s2, a2)]).sum();
                    rhs += discount * mdp.transitions[s][a][s2] * v;
                }
                assert!((q[(s, a)] - rhs).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn monte_carlo_returns_match_the_evaluator() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut mdp = TabularMdp::random_dense(4, 2, &mut rng);
        let policy = FixedTabularPolicy::uniform(4, 2);
        let discount = 0.8;
        let q = mdp.q_values(policy.probs(), discount, 1e-12).unwrap();
        let n = 4000;
        let mut mean = 0.0;
        for _ in 0..n {
            // Truncation at 150 steps leaves a bias below 0.8^150 ≈ 3e-15.
            let traj = rollout_from(&mut mdp, &policy, 0, 1, discount, 150, &mut rng).unwrap();
            mean += traj.total_return() / n as f64;
        }
        assert!(
            (mean - q[(0, 1)]).abs() < 0.05,
            "MC {mean} vs DP {}",
            q[(0, 1)]
        );
    }
}

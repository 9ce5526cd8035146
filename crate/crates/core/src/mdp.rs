//! Transitions, trajectories, the environment contract, and on-policy
//! rollouts.
//!
//! Environments are single-threaded state machines driven by an explicit
//! random source; parallelism happens one level up by running independent
//! instances (one per trial), each with its own seeded generator. Episode
//! *truncation* (hitting a step cap) is recorded distinctly from *termination*
//! (reaching an absorbing state): a truncated trajectory ends in a transition
//! with `terminal = false` and a bootstrap action attached, so critics can
//! bootstrap across the cut while true endings bootstrap to zero.

use crate::error::{Error, Result};
use crate::policies::Policy;
use rand_chacha::ChaCha8Rng;
use std::io::Write;

/// One environment interaction.
///
/// `next_action` is present exactly when the episode continues (including at
/// a truncation point, where it is the sampled-but-unexecuted bootstrap
/// action).
#[derive(Clone, Debug, PartialEq)]
pub struct Transition<S, A> {
    pub state: S,
    pub action: A,
    pub reward: f64,
    pub next_state: S,
    pub next_action: Option<A>,
    pub terminal: bool,
}

/// An ordered sequence of transitions from one episode, with the discount
/// used to summarise it.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<S, A> {
    pub transitions: Vec<Transition<S, A>>,
    pub discount: f64,
}

impl<S, A> Trajectory<S, A> {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// Whether the episode reached an absorbing state (as opposed to being
    /// truncated by a step cap).
    pub fn terminated(&self) -> bool {
        self.transitions.last().map_or(false, |t| t.terminal)
    }

    /// Discounted return of the whole episode.
    pub fn total_return(&self) -> f64 {
        let mut g = 0.0;
        let mut scale = 1.0;
        for t in &self.transitions {
            g += scale * t.reward;
            scale *= self.discount;
        }
        g
    }
}

/// Discounted return `Σ γᵏ r_{i+k}` from a transition index onward.
///
/// Errors if the index is out of range, or if the trajectory was truncated
/// under `discount ≥ 1` (the undiscounted tail is then undefined).
pub fn discounted_return<S, A>(trajectory: &Trajectory<S, A>, from_index: usize) -> Result<f64> {
    if from_index >= trajectory.len() {
        return Err(Error::Precondition(format!(
            "return from index {from_index} of a {}-step trajectory",
            trajectory.len()
        )));
    }
    if trajectory.discount >= 1.0 && !trajectory.terminated() {
        return Err(Error::Environment(
            "undiscounted return of a truncated trajectory is undefined".into(),
        ));
    }
    let mut g = 0.0;
    let mut scale = 1.0;
    for t in &trajectory.transitions[from_index..] {
        g += scale * t.reward;
        scale *= trajectory.discount;
    }
    Ok(g)
}

/// Result of one environment step.
#[derive(Clone, Debug)]
pub struct Step<S> {
    pub state: S,
    pub reward: f64,
    pub terminal: bool,
}

/// Admissible actions at a state.
#[derive(Clone, Debug)]
pub enum ActionSpace<A> {
    Discrete(Vec<A>),
    /// Component-wise box; bounds may be infinite where the environment clips
    /// internally.
    Continuous { low: Vec<f64>, high: Vec<f64> },
}

/// The environment contract: explicit reset, explicit random source, rewards
/// always finite, and no stepping past termination.
pub trait Environment {
    type State: Clone;
    type Action: Clone;

    /// Start a fresh episode and return the initial state.
    fn reset(&mut self, rng: &mut ChaCha8Rng) -> Self::State;

    /// Advance one step. Stepping a finished episode is a contract error.
    fn step(&mut self, action: &Self::Action, rng: &mut ChaCha8Rng) -> Result<Step<Self::State>>;

    /// Admissible actions at a state.
    fn action_space(&self, state: &Self::State) -> ActionSpace<Self::Action>;
}

/// Environments that can start an episode from an arbitrary state, used by
/// Monte-Carlo oracles that condition on a (state, action) pair.
pub trait StartFrom: Environment {
    fn start_from(&mut self, state: &Self::State) -> Result<()>;
}

/// Run one on-policy episode: sample the first action at the reset state,
/// then alternate steps and action samples until termination or `max_steps`.
pub fn rollout<E, P>(
    env: &mut E,
    policy: &P,
    discount: f64,
    max_steps: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Trajectory<E::State, E::Action>>
where
    E: Environment,
    P: Policy<E::State, E::Action>,
{
    let state = env.reset(rng);
    let action = policy.sample(&state, rng)?;
    continue_rollout(env, policy, state, action, discount, max_steps, rng)
}

/// Like [`rollout`], but begin at a caller-chosen state and force the first
/// action; requires [`StartFrom`] support.
pub fn rollout_from<E, P>(
    env: &mut E,
    policy: &P,
    state: E::State,
    action: E::Action,
    discount: f64,
    max_steps: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Trajectory<E::State, E::Action>>
where
    E: Environment + StartFrom,
    P: Policy<E::State, E::Action>,
{
    env.start_from(&state)?;
    continue_rollout(env, policy, state, action, discount, max_steps, rng)
}

fn continue_rollout<E, P>(
    env: &mut E,
    policy: &P,
    mut state: E::State,
    mut action: E::Action,
    discount: f64,
    max_steps: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Trajectory<E::State, E::Action>>
where
    E: Environment,
    P: Policy<E::State, E::Action>,
{
    if max_steps == 0 {
        return Err(Error::Precondition("rollout with max_steps = 0".into()));
    }
    let mut transitions = Vec::new();
    for _ in 0..max_steps {
        let step = env.step(&action, rng)?;
        if !step.reward.is_finite() {
            return Err(Error::Environment(format!(
                "environment produced non-finite reward {}",
                step.reward
            )));
        }
        if step.terminal {
            transitions.push(Transition {
                state,
                action,
                reward: step.reward,
                next_state: step.state,
                next_action: None,
                terminal: true,
            });
            return Ok(Trajectory { transitions, discount });
        }
        let next_action = policy.sample(&step.state, rng)?;
        transitions.push(Transition {
            state: state.clone(),
            action: action.clone(),
            reward: step.reward,
            next_state: step.state.clone(),
            next_action: Some(next_action.clone()),
            terminal: false,
        });
        state = step.state;
        action = next_action;
    }
    // Truncated: the final recorded transition keeps its bootstrap action.
    Ok(Trajectory { transitions, discount })
}

/// Flattening of states and actions into named numeric columns for CSV
/// debugging output.
pub trait Components {
    fn components(&self) -> Vec<f64>;
}

impl Components for () {
    fn components(&self) -> Vec<f64> {
        Vec::new()
    }
}

impl Components for usize {
    fn components(&self) -> Vec<f64> {
        vec![*self as f64]
    }
}

impl Components for f64 {
    fn components(&self) -> Vec<f64> {
        vec![*self]
    }
}

impl Components for [f64; 2] {
    fn components(&self) -> Vec<f64> {
        self.to_vec()
    }
}

impl Components for Vec<f64> {
    fn components(&self) -> Vec<f64> {
        self.clone()
    }
}

impl Components for (f64, f64) {
    fn components(&self) -> Vec<f64> {
        vec![self.0, self.1]
    }
}

/// Write trajectories as CSV, one row per transition:
/// `trial,step,state_*,action_*,reward,terminal`.
pub fn write_trajectories_csv<S, A, W>(out: &mut W, trajectories: &[Trajectory<S, A>]) -> Result<()>
where
    S: Components,
    A: Components,
    W: Write,
{
    let Some(first) = trajectories
        .iter()
        .find_map(|t| t.transitions.first())
    else {
        writeln!(out, "trial,step,reward,terminal")?;
        return Ok(());
    };
    let state_dim = first.state.components().len();
    let action_dim = first.action.components().len();
    let mut header = String::from("trial,step");
    for i in 0..state_dim {
        header.push_str(&format!(",state_{i}"));
    }
    for i in 0..action_dim {
        header.push_str(&format!(",action_{i}"));
    }
    header.push_str(",reward,terminal");
    writeln!(out, "{header}")?;
    for (trial, traj) in trajectories.iter().enumerate() {
        for (step, tr) in traj.transitions.iter().enumerate() {
            let mut row = format!("{trial},{step}");
            for c in tr.state.components() {
                row.push_str(&format!(",{c}"));
            }
            for c in tr.action.components() {
                row.push_str(&format!(",{c}"));
            }
            row.push_str(&format!(",{},{}", tr.reward, u8::from(tr.terminal)));
            writeln!(out, "{row}")?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_step_trajectory(discount: f64, terminal: bool) -> Trajectory<usize, usize> {
        Trajectory {
            transitions: vec![
                Transition {
                    state: 0,
                    action: 1,
                    reward: 1.0,
                    next_state: 1,
                    next_action: Some(0),
                    terminal: false,
                },
                Transition {
                    state: 1,
                    action: 0,
                    reward: -2.0,
                    next_state: 2,
                    next_action: if terminal { None } else { Some(1) },
                    terminal,
                },
            ],
            discount,
        }
    }

    #[test]
    fn discounted_return_sums_the_tail() {
        let traj = two_step_trajectory(0.5, true);
        assert_eq!(discounted_return(&traj, 0).unwrap(), 1.0 + 0.5 * -2.0);
        assert_eq!(discounted_return(&traj, 1).unwrap(), -2.0);
        assert!(discounted_return(&traj, 2).is_err());
    }

    #[test]
    fn undiscounted_return_of_truncated_trajectory_is_rejected() {
        let traj = two_step_trajectory(1.0, false);
        assert!(discounted_return(&traj, 0).is_err());
        let ok = two_step_trajectory(0.9, false);
        assert!(discounted_return(&ok, 0).is_ok());
    }

    #[test]
    fn truncation_is_distinct_from_termination() {
        let truncated = two_step_trajectory(1.0, false);
        assert!(!truncated.terminated());
        assert!(truncated.transitions.last().unwrap().next_action.is_some());
        let terminated = two_step_trajectory(1.0, true);
        assert!(terminated.terminated());
        assert!(terminated.transitions.last().unwrap().next_action.is_none());
    }

    #[test]
    fn trajectory_csv_has_documented_schema() {
        let traj = two_step_trajectory(1.0, true);
        let mut buf = Vec::new();
        write_trajectories_csv(&mut buf, &[traj]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "trial,step,state_0,action_0,reward,terminal"
        );
        assert_eq!(lines.next().unwrap(), "0,0,0,1,1,0");
        assert_eq!(lines.next().unwrap(), "0,1,1,0,-2,1");
    }
}

//! Two-stage binary decision tree with unit rewards on each edge and
//! closed-form return moments, small enough to study objective landscapes
//! exhaustively.

use crate::error::{Error, Result};
use crate::mdp::{ActionSpace, Components, Environment, StartFrom, Step};
use rand_chacha::ChaCha8Rng;

/// The seven nodes of the tree: a root, two mid-level branches, and four
/// terminal leaves.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TreeState {
    Root,
    Left,
    Right,
    LeftDown,
    LeftUp,
    RightDown,
    RightUp,
}

impl TreeState {
    /// Stable index in `0..7`, usable as a one-hot feature position.
    pub fn index(&self) -> usize {
        match self {
            TreeState::Root => 0,
            TreeState::Left => 1,
            TreeState::Right => 2,
            TreeState::LeftDown => 3,
            TreeState::LeftUp => 4,
            TreeState::RightDown => 5,
            TreeState::RightUp => 6,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.index() >= 3
    }
}

impl Components for TreeState {
    fn components(&self) -> Vec<f64> {
        vec![self.index() as f64]
    }
}

/// Deterministic transitions: action `1` moves right/up for reward `+1`,
/// action `0` moves left/down for reward `-1`. Episodes are exactly two
/// steps, so undiscounted returns take values in `{-2, 0, 0, 2}`.
#[derive(Clone, Debug, Default)]
pub struct TreeMdp {
    state: TreeState,
}

impl Default for TreeState {
    fn default() -> Self {
        TreeState::Root
    }
}

impl Environment for TreeMdp {
    type State = TreeState;
    type Action = usize;

    fn reset(&mut self, _rng: &mut ChaCha8Rng) -> TreeState {
        self.state = TreeState::Root;
        self.state
    }

    fn step(&mut self, action: &usize, _rng: &mut ChaCha8Rng) -> Result<Step<TreeState>> {
        if *action > 1 {
            return Err(Error::Precondition(format!(
                "tree actions are binary, got {action}"
            )));
        }
        let up = *action == 1;
        let next = match self.state {
            TreeState::Root => {
                if up {
                    TreeState::Right
                } else {
                    TreeState::Left
                }
            }
            TreeState::Left => {
                if up {
                    TreeState::LeftUp
                } else {
                    TreeState::LeftDown
                }
            }
            TreeState::Right => {
                if up {
                    TreeState::RightUp
                } else {
                    TreeState::RightDown
                }
            }
            leaf => {
                return Err(Error::Environment(format!(
                    "cannot step from terminal leaf {leaf:?}"
                )))
            }
        };
        self.state = next;
        Ok(Step {
            state: next,
            reward: if up { 1.0 } else { -1.0 },
            terminal: next.is_leaf(),
        })
    }

    fn action_space(&self, _state: &TreeState) -> ActionSpace<usize> {
        ActionSpace::Discrete(vec![0, 1])
    }
}

impl StartFrom for TreeMdp {
    fn start_from(&mut self, state: &TreeState) -> Result<()> {
        if state.is_leaf() {
            return Err(Error::Precondition(format!(
                "cannot start an episode at terminal leaf {state:?}"
            )));
        }
        self.state = *state;
        Ok(())
    }
}

/// Closed-form return statistics under the direct Bernoulli policy
/// `(θ₁, θ₂)` — probability of going right at the root and up at a branch.
#[derive(Clone, Copy, Debug)]
pub struct TreeMoments {
    pub mean: f64,
    pub second_moment: f64,
    pub variance: f64,
    /// First-order lower partial moment of the return at target 0,
    /// `E[(0 - G)₊] = 2(1-θ₁)(1-θ₂)`.
    pub lpm1_at_zero: f64,
}

/// Return moments under `(θ₁, θ₂)`. The four leaves have returns
/// `+2` (prob `θ₁θ₂`), `-2` (prob `(1-θ₁)(1-θ₂)`), and `0` otherwise.
pub fn tree_exact_moments(theta1: f64, theta2: f64) -> TreeMoments {
    let p_plus = theta1 * theta2;
    let p_minus = (1.0 - theta1) * (1.0 - theta2);
    let mean = 2.0 * p_plus - 2.0 * p_minus;
    let second_moment = 4.0 * (p_plus + p_minus);
    TreeMoments {
        mean,
        second_moment,
        variance: second_moment - mean * mean,
        lpm1_at_zero: 2.0 * p_minus,
    }
}

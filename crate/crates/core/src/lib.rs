//! Risk-sensitive reinforcement learning built around lower partial moments.
//!
//! The crate learns a temporal-difference upper bound on the lower partial
//! moment (LPM) of the return — the probability-weighted shortfall below a
//! target — and uses that bound as the constraint in a Lagrangian natural
//! actor-critic. Downside risk is measured where it hurts (below target)
//! instead of symmetrically, and the bound admits the same per-step updates
//! as an ordinary action-value function because it is one: the value function
//! of the transformed reward `g(r) = (τ_R − r)₊`.
//!
//! Layout:
//!
//! * [`moments`] — empirical partial moments, the reward transform, and the
//!   Monte-Carlo oracle for the LPM of the return.
//! * [`mdp`] — transitions, trajectories, the environment contract, rollouts.
//! * [`envs`] — the four experimental domains (two-stage tree, three-armed
//!   bandit, illiquid portfolio, consumption) plus tabular test MDPs.
//! * [`policies`] — differentiable policies with score functions and feature
//!   bases.
//! * [`prediction`] — compatible linear critics (SARSA(λ)) and target
//!   functions for the transformed reward.
//! * [`control`] — normalised natural policy updates, the Lagrange multiplier,
//!   and the constrained training loop.
//! * [`harness`] — experiment drivers, config files, CSV output, CLI.

pub mod control;
pub mod envs;
pub mod error;
pub mod harness;
pub mod mdp;
pub mod moments;
pub mod policies;
pub mod prediction;

pub use error::{Error, Result};

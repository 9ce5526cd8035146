//! Constrained natural actor-critic training.
//!
//! The policy ascends `J_R − λ·J_C` with the natural gradient realized as
//! the compatible critic weights: the update direction is `w_q − λ·w_ϱ`,
//! L2-normalised. The multiplier λ descends the Lagrangian on a slower
//! timescale, driven by a running estimate of the constraint at episode
//! starts, and is projected onto `λ ≥ 0`.

use crate::error::{Error, Result};
use crate::mdp::{rollout, Environment};
use crate::policies::Policy;
use crate::prediction::{
    lpm_critic_update, resolve_target, CompatibleLinearCritic, FeaturedStep, RewardEstimator,
    TargetFunction,
};
use ndarray::Array1;
use rand_chacha::ChaCha8Rng;
use std::collections::VecDeque;
use std::io::Write;
use std::time::Instant;

/// Lagrange multiplier with its adaptation rule.
#[derive(Clone, Copy, Debug)]
pub struct LagrangianState {
    lambda: f64,
    mode: LagrangeMode,
}

#[derive(Clone, Copy, Debug)]
enum LagrangeMode {
    /// Gradient descent on the Lagrangian: `λ ← max(0, λ + α·(Ĵ_C − ν))`.
    Adaptive { nu: f64, step_size: f64 },
    /// λ is held fixed (covers both λ ≡ 0 ablations and penalty objectives).
    Constant,
}

impl LagrangianState {
    pub fn adaptive(initial_lambda: f64, nu: f64, step_size: f64) -> Result<Self> {
        if initial_lambda < 0.0 || !initial_lambda.is_finite() {
            return Err(Error::Precondition(format!(
                "initial multiplier must be finite and non-negative, got {initial_lambda}"
            )));
        }
        if step_size <= 0.0 || !nu.is_finite() {
            return Err(Error::Precondition(format!(
                "adaptive multiplier needs a positive step size and finite threshold, \
                 got ({step_size}, {nu})"
            )));
        }
        Ok(Self {
            lambda: initial_lambda,
            mode: LagrangeMode::Adaptive { nu, step_size },
        })
    }

    pub fn constant(lambda: f64) -> Result<Self> {
        if lambda < 0.0 || !lambda.is_finite() {
            return Err(Error::Precondition(format!(
                "constant multiplier must be finite and non-negative, got {lambda}"
            )));
        }
        Ok(Self {
            lambda,
            mode: LagrangeMode::Constant,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Threshold ν when adapting, `None` for constant multipliers.
    pub fn nu(&self) -> Option<f64> {
        match self.mode {
            LagrangeMode::Adaptive { nu, .. } => Some(nu),
            LagrangeMode::Constant => None,
        }
    }

    /// One multiplier step from the current constraint estimate `Ĵ_C`.
    /// Constraint violations (`Ĵ_C > ν`) raise λ; slack lowers it, with the
    /// projection keeping `λ ≥ 0`. Constant mode is a no-op.
    pub fn update(&mut self, constraint_estimate: f64) {
        if let LagrangeMode::Adaptive { nu, step_size } = self.mode {
            self.lambda = (self.lambda + step_size * (constraint_estimate - nu)).max(0.0);
        }
    }
}

/// Normalized natural-gradient ascent step:
/// `θ += η·(w_q − λ·w_ϱ)/‖w_q − λ·w_ϱ‖₂`.
///
/// Returns whether an update was applied — directions with norm below
/// `1e-12` are skipped, since the normalized step is undefined at zero.
pub fn natural_policy_update(
    theta: &mut Array1<f64>,
    w_q: &Array1<f64>,
    w_rho: &Array1<f64>,
    lambda: f64,
    eta: f64,
) -> Result<bool> {
    if w_q.len() != theta.len() || w_rho.len() != theta.len() {
        return Err(Error::DimensionMismatch {
            context: "policy update direction",
            expected: theta.len(),
            actual: w_q.len().max(w_rho.len()),
        });
    }
    if !lambda.is_finite() || !eta.is_finite() || eta <= 0.0 {
        return Err(Error::Precondition(format!(
            "policy update needs finite λ and positive η, got ({lambda}, {eta})"
        )));
    }
    // λ = 0 takes the raw weights untouched so the unconstrained path is
    // arithmetically identical to a plain natural actor-critic.
    let direction = if lambda == 0.0 {
        w_q.clone()
    } else {
        w_q - &(w_rho * lambda)
    };
    let norm = direction.dot(&direction).sqrt();
    if !norm.is_finite() {
        return Err(Error::NonFinite("policy update direction".into()));
    }
    if norm < 1e-12 {
        return Ok(false);
    }
    theta.scaled_add(eta / norm, &direction);
    if !theta.iter().all(|x| x.is_finite()) {
        return Err(Error::Diverged("policy parameters left the finite range".into()));
    }
    Ok(true)
}

/// When the policy and multiplier update: every n-th episode boundary, or
/// every n-th environment step (mid-episode updates included).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UpdateCadence {
    Episodes(usize),
    Steps(usize),
}

/// Loop sizing and evaluation protocol for one training run.
#[derive(Clone, Copy, Debug)]
pub struct TrainingSchedule {
    pub discount: f64,
    pub cadence: UpdateCadence,
    /// Policy step size η.
    pub eta: f64,
    /// Episodes with critic and multiplier updates only, policy frozen.
    pub pretrain_episodes: usize,
    pub total_episodes: usize,
    pub max_steps_per_episode: usize,
    /// Evaluate every this many episodes (0 disables periodic evaluation).
    pub eval_every: usize,
    pub eval_rollouts: usize,
    /// Episode starts averaged into the multiplier's constraint estimate.
    pub constraint_window: usize,
    /// Save policy parameters every this many episodes (0 disables).
    pub snapshot_every: usize,
}

impl TrainingSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.discount) {
            return Err(Error::Precondition(format!(
                "discount must lie in [0, 1], got {}",
                self.discount
            )));
        }
        if self.eta <= 0.0 || !self.eta.is_finite() {
            return Err(Error::Precondition(format!(
                "policy step size must be positive, got {}",
                self.eta
            )));
        }
        let cadence_ok = match self.cadence {
            UpdateCadence::Episodes(n) | UpdateCadence::Steps(n) => n >= 1,
        };
        if !cadence_ok {
            return Err(Error::Precondition("update cadence must be at least 1".into()));
        }
        if self.total_episodes == 0 || self.max_steps_per_episode == 0 {
            return Err(Error::Precondition(
                "training needs at least one episode of at least one step".into(),
            ));
        }
        if self.constraint_window == 0 {
            return Err(Error::Precondition(
                "constraint window must hold at least one episode".into(),
            ));
        }
        if self.eval_every > 0 && self.eval_rollouts == 0 {
            return Err(Error::Precondition(
                "periodic evaluation needs at least one rollout".into(),
            ));
        }
        Ok(())
    }
}

/// One evaluation checkpoint. `constraint` is the empirical `J_C` measured
/// on the evaluation rollouts; `lambda_input` is the critic-side running
/// average most recently consumed by the multiplier update (NaN before the
/// first consumption), logged so the two estimates can be compared.
#[derive(Clone, Copy, Debug)]
pub struct EvalEntry {
    pub episode: usize,
    pub steps: u64,
    pub mean_return: f64,
    pub constraint: f64,
    pub lambda: f64,
    pub lambda_input: f64,
    pub wall_clock_s: f64,
}

/// Everything a training run leaves behind.
#[derive(Clone, Debug, Default)]
pub struct TrainingLog {
    pub entries: Vec<EvalEntry>,
    /// Discounted return of every training episode, in order.
    pub episode_returns: Vec<f64>,
    /// `(episode, θ)` at the snapshot cadence.
    pub snapshots: Vec<(usize, Array1<f64>)>,
    pub final_params: Array1<f64>,
    pub final_lambda: f64,
}

impl TrainingLog {
    /// Stream the evaluation entries as CSV with a fixed column order.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(
            out,
            "episode,steps,mean_return,constraint,lambda,wall_clock_s"
        )?;
        for e in &self.entries {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                e.episode, e.steps, e.mean_return, e.constraint, e.lambda, e.wall_clock_s
            )?;
        }
        Ok(())
    }
}

/// Evaluation result: the mean discounted return and, when a constraint
/// specification is supplied, the mean discounted sum of transformed
/// rewards along the same rollouts.
#[derive(Clone, Copy, Debug)]
pub struct Evaluation {
    pub mean_return: f64,
    pub constraint: f64,
}

/// How to measure the constraint during evaluation.
pub struct ConstraintSpec<'a, S, A> {
    pub target: &'a TargetFunction<S, A>,
    pub mean_est: Option<&'a dyn RewardEstimator<S, A>>,
    pub order: u32,
}

/// Roll out the policy without learning and average the discounted return;
/// with a [`ConstraintSpec`], also average `Σ γᵏ·((τ_R(sₖ,aₖ) − rₖ)₊)^m`
/// over the same rollouts. The random stream is consumed identically
/// whether or not the constraint is measured.
pub fn evaluate<E, P>(
    env: &mut E,
    policy: &P,
    constraint: Option<ConstraintSpec<'_, E::State, E::Action>>,
    discount: f64,
    rollouts: usize,
    max_steps: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Evaluation>
where
    E: Environment,
    P: Policy<E::State, E::Action>,
{
    if rollouts == 0 {
        return Err(Error::Precondition("evaluation needs at least one rollout".into()));
    }
    let mut mean_return = 0.0;
    let mut mean_constraint = 0.0;
    for _ in 0..rollouts {
        let traj = rollout(env, policy, discount, max_steps, rng)?;
        if !traj.terminated() && discount >= 1.0 {
            return Err(Error::Environment(format!(
                "evaluation rollout truncated at {max_steps} steps with discount 1"
            )));
        }
        mean_return += traj.total_return() / rollouts as f64;
        if let Some(spec) = &constraint {
            let mut scale = 1.0;
            let mut j_c = 0.0;
            for tr in &traj.transitions {
                let psi = policy.score(&tr.state, &tr.action)?;
                let phi = policy.baseline_features(&tr.state);
                let tau_r = resolve_target(
                    spec.target,
                    spec.mean_est,
                    &tr.state,
                    &tr.action,
                    &psi,
                    &phi,
                )?;
                j_c += scale * crate::moments::transform_reward(tr.reward, tau_r, spec.order);
                scale *= discount;
            }
            mean_constraint += j_c / rollouts as f64;
        }
    }
    Ok(Evaluation {
        mean_return,
        constraint: if constraint.is_some() {
            mean_constraint
        } else {
            f64::NAN
        },
    })
}

fn window_mean(window: &VecDeque<f64>) -> f64 {
    window.iter().sum::<f64>() / window.len() as f64
}

fn push_constraint_sample(window: &mut VecDeque<f64>, cap: usize, value: f64) {
    if window.len() == cap {
        window.pop_front();
    }
    window.push_back(value);
}

/// Critic- and multiplier-only warmup under a frozen policy (taken by
/// shared reference, so the parameters provably cannot move). The
/// multiplier keeps its cadence; constraint estimates, critic weights, and
/// λ all carry over into subsequent training.
#[allow(clippy::too_many_arguments)]
pub fn pretrain<E, P>(
    env: &mut E,
    policy: &P,
    q_critic: &mut CompatibleLinearCritic,
    lpm_critic: &mut CompatibleLinearCritic,
    target: &TargetFunction<E::State, E::Action>,
    mut mean_est: Option<&mut (dyn RewardEstimator<E::State, E::Action> + '_)>,
    order: u32,
    lagrange: &mut LagrangianState,
    schedule: &TrainingSchedule,
    rng: &mut ChaCha8Rng,
) -> Result<()>
where
    E: Environment,
    P: Policy<E::State, E::Action>,
{
    schedule.validate()?;
    let mut window: VecDeque<f64> = VecDeque::new();
    let mut global_steps: u64 = 0;
    for episode in 1..=schedule.pretrain_episodes {
        let mut state = env.reset(rng);
        let mut action = policy.sample(&state, rng)?;
        q_critic.reset_traces();
        lpm_critic.reset_traces();
        {
            let psi0 = policy.score(&state, &action)?;
            let phi0 = policy.baseline_features(&state);
            push_constraint_sample(
                &mut window,
                schedule.constraint_window,
                lpm_critic.estimate(&psi0, &phi0),
            );
        }
        for step_index in 1..=schedule.max_steps_per_episode {
            let step = env.step(&action, rng)?;
            global_steps += 1;
            let terminal = step.terminal;
            let next_state = step.state;
            let next_action = if terminal {
                None
            } else {
                Some(policy.sample(&next_state, rng)?)
            };
            let psi = policy.score(&state, &action)?;
            let phi = policy.baseline_features(&state);
            let next_feats = match &next_action {
                Some(a2) => Some((policy.score(&next_state, a2)?, policy.baseline_features(&next_state))),
                None => None,
            };
            let next_refs = next_feats.as_ref().map(|(p, f)| (p, f));
            q_critic.sarsa_update(step.reward, terminal, &psi, &phi, next_refs)?;
            let featured = FeaturedStep {
                state: &state,
                action: &action,
                reward: step.reward,
                terminal,
                psi: &psi,
                phi: &phi,
                next: next_refs,
            };
            lpm_critic_update(lpm_critic, &featured, order, target, mean_est.as_deref_mut())?;
            if let UpdateCadence::Steps(n) = schedule.cadence {
                if global_steps.is_multiple_of(n as u64) && !window.is_empty() {
                    lagrange.update(window_mean(&window));
                }
            }
            if terminal || step_index == schedule.max_steps_per_episode {
                break;
            }
            state = next_state;
            action = next_action.expect("continuation action exists");
        }
        if let UpdateCadence::Episodes(n) = schedule.cadence {
            if episode % n == 0 && !window.is_empty() {
                lagrange.update(window_mean(&window));
            }
        }
    }
    Ok(())
}

/// Full constrained training run: pretraining, per-step critic updates,
/// cadenced policy and multiplier updates, periodic evaluation, and
/// parameter snapshots. Fails fast with a divergence error if any learned
/// quantity leaves the finite range.
#[allow(clippy::too_many_arguments)]
pub fn train_constrained<E, P>(
    env: &mut E,
    policy: &mut P,
    q_critic: &mut CompatibleLinearCritic,
    lpm_critic: &mut CompatibleLinearCritic,
    target: &TargetFunction<E::State, E::Action>,
    mut mean_est: Option<&mut (dyn RewardEstimator<E::State, E::Action> + '_)>,
    order: u32,
    lagrange: &mut LagrangianState,
    schedule: &TrainingSchedule,
    rng: &mut ChaCha8Rng,
) -> Result<TrainingLog>
where
    E: Environment,
    P: Policy<E::State, E::Action>,
{
    schedule.validate()?;
    let clock = Instant::now();
    pretrain(
        env,
        policy,
        q_critic,
        lpm_critic,
        target,
        mean_est.as_deref_mut(),
        order,
        lagrange,
        schedule,
        rng,
    )?;

    let mut log = TrainingLog::default();
    let mut window: VecDeque<f64> = VecDeque::new();
    let mut last_lambda_input = f64::NAN;
    let mut global_steps: u64 = 0;

    for episode in 1..=schedule.total_episodes {
        let mut state = env.reset(rng);
        let mut action = policy.sample(&state, rng)?;
        q_critic.reset_traces();
        lpm_critic.reset_traces();
        {
            let psi0 = policy.score(&state, &action)?;
            let phi0 = policy.baseline_features(&state);
            push_constraint_sample(
                &mut window,
                schedule.constraint_window,
                lpm_critic.estimate(&psi0, &phi0),
            );
        }
        let mut episode_return = 0.0;
        let mut scale = 1.0;
        for step_index in 1..=schedule.max_steps_per_episode {
            let step = env.step(&action, rng)?;
            global_steps += 1;
            episode_return += scale * step.reward;
            scale *= schedule.discount;
            let terminal = step.terminal;
            let next_state = step.state;
            let next_action = if terminal {
                None
            } else {
                Some(policy.sample(&next_state, rng)?)
            };
            let psi = policy.score(&state, &action)?;
            let phi = policy.baseline_features(&state);
            let next_feats = match &next_action {
                Some(a2) => Some((policy.score(&next_state, a2)?, policy.baseline_features(&next_state))),
                None => None,
            };
            let next_refs = next_feats.as_ref().map(|(p, f)| (p, f));
            q_critic.sarsa_update(step.reward, terminal, &psi, &phi, next_refs)?;
            let featured = FeaturedStep {
                state: &state,
                action: &action,
                reward: step.reward,
                terminal,
                psi: &psi,
                phi: &phi,
                next: next_refs,
            };
            lpm_critic_update(lpm_critic, &featured, order, target, mean_est.as_deref_mut())?;
            if let UpdateCadence::Steps(n) = schedule.cadence {
                if global_steps.is_multiple_of(n as u64) {
                    natural_policy_update(
                        policy.params_mut(),
                        q_critic.w(),
                        lpm_critic.w(),
                        lagrange.lambda(),
                        schedule.eta,
                    )?;
                    if !window.is_empty() {
                        let estimate = window_mean(&window);
                        lagrange.update(estimate);
                        last_lambda_input = estimate;
                    }
                }
            }
            if terminal || step_index == schedule.max_steps_per_episode {
                break;
            }
            state = next_state;
            action = next_action.expect("continuation action exists");
        }
        log.episode_returns.push(episode_return);

        if let UpdateCadence::Episodes(n) = schedule.cadence {
            if episode % n == 0 {
                natural_policy_update(
                    policy.params_mut(),
                    q_critic.w(),
                    lpm_critic.w(),
                    lagrange.lambda(),
                    schedule.eta,
                )?;
                if !window.is_empty() {
                    let estimate = window_mean(&window);
                    lagrange.update(estimate);
                    last_lambda_input = estimate;
                }
            }
        }

        if schedule.snapshot_every > 0 && episode % schedule.snapshot_every == 0 {
            log.snapshots.push((episode, policy.params().clone()));
        }

        if schedule.eval_every > 0
            && (episode % schedule.eval_every == 0 || episode == schedule.total_episodes)
        {
            if !q_critic.params_finite() || !lpm_critic.params_finite() {
                return Err(Error::Diverged("critic weights left the finite range".into()));
            }
            let eval = evaluate(
                env,
                &*policy,
                Some(ConstraintSpec {
                    target,
                    mean_est: mean_est.as_deref().map(|m| m as &dyn RewardEstimator<_, _>),
                    order,
                }),
                schedule.discount,
                schedule.eval_rollouts,
                schedule.max_steps_per_episode,
                rng,
            )?;
            log.entries.push(EvalEntry {
                episode,
                steps: global_steps,
                mean_return: eval.mean_return,
                constraint: eval.constraint,
                lambda: lagrange.lambda(),
                lambda_input: last_lambda_input,
                wall_clock_s: clock.elapsed().as_secs_f64(),
            });
        }
    }
    log.final_params = policy.params().clone();
    log.final_lambda = lagrange.lambda();
    Ok(log)
}

/// Plain natural actor-critic: the same loop shape as
/// [`train_constrained`] with every constraint mechanism absent. Kept as an
/// independent code path so the reduction `λ ≡ 0 ⇒ identical behaviour` is
/// a meaningful regression check rather than a tautology.
pub fn train_nac<E, P>(
    env: &mut E,
    policy: &mut P,
    q_critic: &mut CompatibleLinearCritic,
    schedule: &TrainingSchedule,
    rng: &mut ChaCha8Rng,
) -> Result<TrainingLog>
where
    E: Environment,
    P: Policy<E::State, E::Action>,
{
    schedule.validate()?;
    let clock = Instant::now();

    // Warmup: critic updates only, parameters frozen.
    for _episode in 1..=schedule.pretrain_episodes {
        let mut state = env.reset(rng);
        let mut action = policy.sample(&state, rng)?;
        q_critic.reset_traces();
        for step_index in 1..=schedule.max_steps_per_episode {
            let step = env.step(&action, rng)?;
            let terminal = step.terminal;
            let next_state = step.state;
            let next_action = if terminal {
                None
            } else {
                Some(policy.sample(&next_state, rng)?)
            };
            let psi = policy.score(&state, &action)?;
            let phi = policy.baseline_features(&state);
            let next_feats = match &next_action {
                Some(a2) => Some((policy.score(&next_state, a2)?, policy.baseline_features(&next_state))),
                None => None,
            };
            let next_refs = next_feats.as_ref().map(|(p, f)| (p, f));
            q_critic.sarsa_update(step.reward, terminal, &psi, &phi, next_refs)?;
            if terminal || step_index == schedule.max_steps_per_episode {
                break;
            }
            state = next_state;
            action = next_action.expect("continuation action exists");
        }
    }

    let mut log = TrainingLog::default();
    let mut global_steps: u64 = 0;

    for episode in 1..=schedule.total_episodes {
        let mut state = env.reset(rng);
        let mut action = policy.sample(&state, rng)?;
        q_critic.reset_traces();
        let mut episode_return = 0.0;
        let mut scale = 1.0;
        for step_index in 1..=schedule.max_steps_per_episode {
            let step = env.step(&action, rng)?;
            global_steps += 1;
            episode_return += scale * step.reward;
            scale *= schedule.discount;
            let terminal = step.terminal;
            let next_state = step.state;
            let next_action = if terminal {
                None
            } else {
                Some(policy.sample(&next_state, rng)?)
            };
            let psi = policy.score(&state, &action)?;
            let phi = policy.baseline_features(&state);
            let next_feats = match &next_action {
                Some(a2) => Some((policy.score(&next_state, a2)?, policy.baseline_features(&next_state))),
                None => None,
            };
            let next_refs = next_feats.as_ref().map(|(p, f)| (p, f));
            q_critic.sarsa_update(step.reward, terminal, &psi, &phi, next_refs)?;
            if let UpdateCadence::Steps(n) = schedule.cadence {
                if global_steps.is_multiple_of(n as u64) {
                    natural_policy_update(
                        policy.params_mut(),
                        q_critic.w(),
                        q_critic.w(),
                        0.0,
                        schedule.eta,
                    )?;
                }
            }
            if terminal || step_index == schedule.max_steps_per_episode {
                break;
            }
            state = next_state;
            action = next_action.expect("continuation action exists");
        }
        log.episode_returns.push(episode_return);

        if let UpdateCadence::Episodes(n) = schedule.cadence {
            if episode % n == 0 {
                natural_policy_update(
                    policy.params_mut(),
                    q_critic.w(),
                    q_critic.w(),
                    0.0,
                    schedule.eta,
                )?;
            }
        }

        if schedule.snapshot_every > 0 && episode % schedule.snapshot_every == 0 {
            log.snapshots.push((episode, policy.params().clone()));
        }

        if schedule.eval_every > 0
            && (episode % schedule.eval_every == 0 || episode == schedule.total_episodes)
        {
            if !q_critic.params_finite() {
                return Err(Error::Diverged("critic weights left the finite range".into()));
            }
            let eval = evaluate(
                env,
                &*policy,
                None,
                schedule.discount,
                schedule.eval_rollouts,
                schedule.max_steps_per_episode,
                rng,
            )?;
            log.entries.push(EvalEntry {
                episode,
                steps: global_steps,
                mean_return: eval.mean_return,
                constraint: f64::NAN,
                lambda: 0.0,
                lambda_input: f64::NAN,
                wall_clock_s: clock.elapsed().as_secs_f64(),
            });
        }
    }
    log.final_params = policy.params().clone();
    log.final_lambda = 0.0;
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::bandit::{BanditParams, ThreeArmBandit};
    use crate::envs::tree::TreeMdp;
    use crate::policies::{StatelessGibbs, TreePolicy};
    use ndarray::arr1;
    use rand::SeedableRng;

    #[test]
    fn cancelled_directions_skip_the_update() {
        let mut theta = arr1(&[0.5, -0.5]);
        let w = arr1(&[1.0, 2.0]);
        let applied = natural_policy_update(&mut theta, &w, &w, 1.0, 0.1).unwrap();
        assert!(!applied);
        assert_eq!(theta, arr1(&[0.5, -0.5]));
    }

    #[test]
    fn unconstrained_updates_follow_the_normalized_value_weights() {
        let mut theta = arr1(&[0.0, 0.0]);
        let w_q = arr1(&[3.0, 4.0]);
        let w_rho = arr1(&[100.0, -100.0]);
        natural_policy_update(&mut theta, &w_q, &w_rho, 0.0, 0.5).unwrap();
        assert!((theta[0] - 0.3).abs() < 1e-15);
        assert!((theta[1] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn update_direction_is_scale_invariant() {
        let run = |scale: f64| {
            let mut theta = arr1(&[0.1, 0.2, 0.3]);
            let w_q = arr1(&[1.0 * scale, -2.0 * scale, 0.5 * scale]);
            let w_rho = arr1(&[0.4 * scale, 0.1 * scale, -0.3 * scale]);
            natural_policy_update(&mut theta, &w_q, &w_rho, 1.5, 0.05).unwrap();
            theta
        };
        let a = run(1.0);
        let b = run(7.0);
        for i in 0..3 {
            assert!((a[i] - b[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn multiplier_moves_with_the_constraint_and_stays_nonnegative() {
        let mut lag = LagrangianState::adaptive(0.5, 1.0, 0.1).unwrap();
        lag.update(1.0);
        assert_eq!(lag.lambda(), 0.5, "zero gradient at the threshold");
        lag.update(2.0);
        assert!((lag.lambda() - 0.6).abs() < 1e-15, "violation raises λ");
        let mut at_zero = LagrangianState::adaptive(0.0, 1.0, 0.1).unwrap();
        at_zero.update(0.0);
        assert_eq!(at_zero.lambda(), 0.0, "projection holds at the boundary");
        let mut fixed = LagrangianState::constant(2.0).unwrap();
        fixed.update(100.0);
        assert_eq!(fixed.lambda(), 2.0, "constant mode ignores estimates");
    }

    fn bandit_schedule(total: usize, pretrain: usize) -> TrainingSchedule {
        TrainingSchedule {
            discount: 1.0,
            cadence: UpdateCadence::Episodes(100),
            eta: 0.05,
            pretrain_episodes: pretrain,
            total_episodes: total,
            max_steps_per_episode: 1,
            eval_every: 0,
            eval_rollouts: 0,
            constraint_window: 100,
            snapshot_every: 0,
        }
    }

    #[test]
    fn pretraining_learns_arm_values_without_touching_the_policy() {
        // Light-tailed arms so a constant-step critic can average them to
        // the test tolerance; the default third arm is deliberately
        // heavy-tailed and would need far more pulls.
        let mut env = ThreeArmBandit::new(BanditParams {
            mean_a: 1.0,
            sd_a: 0.5,
            mean_b: 4.0,
            sd_b: 0.5,
            pareto_scale: 2.625,
            pareto_shape: 8.0,
        })
        .unwrap();
        let policy = StatelessGibbs::new(3).unwrap();
        let mut q = CompatibleLinearCritic::new(3, 1, 0.005, 0.0, 1.0).unwrap();
        let mut rho = CompatibleLinearCritic::new(3, 1, 0.005, 0.0, 1.0).unwrap();
        let target = TargetFunction::fixed_per_step(0.0).unwrap();
        let mut lag = LagrangianState::constant(0.0).unwrap();
        let mut schedule = bandit_schedule(1, 20_000);
        schedule.total_episodes = 1;
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        pretrain(
            &mut env, &policy, &mut q, &mut rho, &target, None, 1, &mut lag, &schedule, &mut rng,
        )
        .unwrap();
        use crate::policies::Policy;
        let phi = arr1(&[1.0]);
        for (arm, expected) in [(0usize, 1.0), (1, 4.0), (2, 3.0)] {
            let psi = policy.score(&(), &arm).unwrap();
            let got = q.estimate(&psi, &phi);
            assert!(
                (got - expected).abs() < 0.2,
                "arm {arm}: {got} vs {expected}"
            );
        }
    }

    #[test]
    fn zero_pretraining_is_a_no_op() {
        let mut env = ThreeArmBandit::default();
        let policy = StatelessGibbs::new(3).unwrap();
        let mut q = CompatibleLinearCritic::new(3, 1, 0.01, 0.0, 1.0).unwrap();
        let mut rho = CompatibleLinearCritic::new(3, 1, 0.01, 0.0, 1.0).unwrap();
        let target = TargetFunction::fixed_per_step(0.0).unwrap();
        let mut lag = LagrangianState::constant(0.0).unwrap();
        let schedule = bandit_schedule(1, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        pretrain(
            &mut env, &policy, &mut q, &mut rho, &target, None, 1, &mut lag, &schedule, &mut rng,
        )
        .unwrap();
        assert!(q.w().iter().all(|&x| x == 0.0));
        assert!(rho.w().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn constant_zero_multiplier_reduces_to_the_actor_critic() {
        let schedule = TrainingSchedule {
            discount: 1.0,
            cadence: UpdateCadence::Episodes(10),
            eta: 0.01,
            pretrain_episodes: 5,
            total_episodes: 200,
            max_steps_per_episode: 4,
            eval_every: 50,
            eval_rollouts: 20,
            constraint_window: 100,
            snapshot_every: 25,
        };

        let mut env = TreeMdp::default();
        let mut policy = TreePolicy::new(0.5, 0.5).unwrap();
        let mut q = CompatibleLinearCritic::new(2, 7, 0.05, 0.0, 1.0).unwrap();
        let mut rho = CompatibleLinearCritic::new(2, 7, 0.05, 0.0, 1.0).unwrap();
        let target = TargetFunction::fixed(0.0, 1.0).unwrap();
        let mut lag = LagrangianState::constant(0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let constrained = train_constrained(
            &mut env, &mut policy, &mut q, &mut rho, &target, None, 1, &mut lag, &schedule,
            &mut rng,
        )
        .unwrap();

        let mut env2 = TreeMdp::default();
        let mut policy2 = TreePolicy::new(0.5, 0.5).unwrap();
        let mut q2 = CompatibleLinearCritic::new(2, 7, 0.05, 0.0, 1.0).unwrap();
        let mut rng2 = ChaCha8Rng::seed_from_u64(99);
        let plain = train_nac(&mut env2, &mut policy2, &mut q2, &schedule, &mut rng2).unwrap();

        assert_eq!(constrained.episode_returns, plain.episode_returns);
        assert_eq!(constrained.final_params, plain.final_params);
        assert_eq!(constrained.snapshots.len(), plain.snapshots.len());
        for (a, b) in constrained.snapshots.iter().zip(plain.snapshots.iter()) {
            assert_eq!(a.0, b.0);
            assert_eq!(a.1, b.1);
        }
        for (a, b) in constrained.entries.iter().zip(plain.entries.iter()) {
            assert_eq!(a.mean_return.to_bits(), b.mean_return.to_bits());
            assert_eq!(a.steps, b.steps);
        }
    }

    #[test]
    fn adaptive_runs_keep_the_multiplier_nonnegative_and_fresh() {
        let schedule = TrainingSchedule {
            discount: 1.0,
            cadence: UpdateCadence::Episodes(5),
            eta: 0.02,
            pretrain_episodes: 50,
            total_episodes: 300,
            max_steps_per_episode: 4,
            eval_every: 100,
            eval_rollouts: 50,
            constraint_window: 100,
            snapshot_every: 0,
        };
        let mut env = TreeMdp::default();
        let mut policy = TreePolicy::new(0.5, 0.5).unwrap();
        let mut q = CompatibleLinearCritic::new(2, 7, 0.05, 0.0, 1.0).unwrap();
        let mut rho = CompatibleLinearCritic::new(2, 7, 0.05, 0.0, 1.0).unwrap();
        let target = TargetFunction::fixed(0.0, 1.0).unwrap();
        let mut lag = LagrangianState::adaptive(0.0, 0.3, 0.01).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let log = train_constrained(
            &mut env, &mut policy, &mut q, &mut rho, &target, None, 1, &mut lag, &schedule,
            &mut rng,
        )
        .unwrap();
        assert!(log.final_lambda >= 0.0);
        for entry in &log.entries {
            assert!(entry.lambda >= 0.0);
            assert!(entry.lambda_input.is_finite(), "multiplier input was consumed");
        }
    }

    #[test]
    fn training_log_csv_has_the_documented_header() {
        let log = TrainingLog {
            entries: vec![EvalEntry {
                episode: 10,
                steps: 40,
                mean_return: 1.5,
                constraint: 0.25,
                lambda: 0.1,
                lambda_input: 0.3,
                wall_clock_s: 0.5,
            }],
            ..TrainingLog::default()
        };
        let mut buf = Vec::new();
        log.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "episode,steps,mean_return,constraint,lambda,wall_clock_s"
        );
        assert_eq!(lines.next().unwrap(), "10,40,1.5,0.25,0.1,0.5");
    }
}

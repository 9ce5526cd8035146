//! Compatible linear TD critics and the target-function machinery.
//!
//! Two critics share one architecture: `estimate(s, a) = ψ(s,a)ᵀw + φ(s)ᵀv`
//! where `ψ` is the policy score. The value critic learns from raw rewards;
//! the downside critic learns from the transformed reward `((τ_R − r)₊)^m`,
//! which makes its value function an upper bound on the lower partial moment
//! of the return about the unrolled target. Because the estimate is linear
//! in the score, the critic weights `w` are themselves the natural-gradient
//! direction used by [`crate::control`].

use crate::error::{Error, Result};
use crate::moments::transform_reward;
use ndarray::Array1;
use std::collections::HashMap;
use std::fmt;
use std::hash::Hash;

/// Per-step reward target `τ_R(s, a)` whose discounted unroll defines the
/// return-level target of the downside bound.
pub enum TargetFunction<S, A> {
    /// Constant per-step target.
    Fixed { per_step: f64 },
    /// `τ_R(s, a)` is a learned running estimate of the mean reward at
    /// `(s, a)`, supplied to updates through a [`RewardEstimator`].
    Centralised,
    /// Caller-supplied map from (state, action) to the per-step target.
    Custom(Box<dyn Fn(&S, &A) -> f64 + Send + Sync>),
}

impl<S, A> TargetFunction<S, A> {
    /// Constant target expressed at the return level: the per-step value is
    /// `(1 − γ)·τ` so that its unroll over an unbounded horizon is `τ`.
    /// Under `γ = 1` this is identically zero.
    pub fn fixed(tau: f64, discount: f64) -> Result<Self> {
        if !tau.is_finite() || !(0.0..=1.0).contains(&discount) {
            return Err(Error::Precondition(format!(
                "fixed target needs a finite τ and a discount in [0, 1], got ({tau}, {discount})"
            )));
        }
        Ok(Self::Fixed {
            per_step: (1.0 - discount) * tau,
        })
    }

    /// Constant per-step target used directly, without return-level scaling.
    pub fn fixed_per_step(tau_r: f64) -> Result<Self> {
        if !tau_r.is_finite() {
            return Err(Error::Precondition(format!(
                "per-step target must be finite, got {tau_r}"
            )));
        }
        Ok(Self::Fixed { per_step: tau_r })
    }

    pub fn centralised() -> Self {
        Self::Centralised
    }

    pub fn custom(f: impl Fn(&S, &A) -> f64 + Send + Sync + 'static) -> Self {
        Self::Custom(Box::new(f))
    }

    /// Query the target without features or learned state. The centralised
    /// kind cannot answer (its estimate lives in a [`RewardEstimator`]);
    /// snapshot that estimator into a custom target for offline queries.
    pub fn peek(&self, state: &S, action: &A) -> Result<f64> {
        match self {
            Self::Fixed { per_step } => Ok(*per_step),
            Self::Custom(f) => {
                let tau_r = f(state, action);
                if !tau_r.is_finite() {
                    return Err(Error::NonFinite(format!(
                        "custom target returned {tau_r}"
                    )));
                }
                Ok(tau_r)
            }
            Self::Centralised => Err(Error::Precondition(
                "a centralised target has no standalone value; query its reward \
                 estimator or snapshot it into a custom target"
                    .into(),
            )),
        }
    }
}

impl<S, A> fmt::Debug for TargetFunction<S, A> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Fixed { per_step } => write!(f, "TargetFunction::Fixed({per_step})"),
            Self::Centralised => write!(f, "TargetFunction::Centralised"),
            Self::Custom(_) => write!(f, "TargetFunction::Custom(..)"),
        }
    }
}

/// Online estimator of the mean immediate reward `r(s, a)`, the moving
/// threshold used by centralised targets.
pub trait RewardEstimator<S, A> {
    /// Current estimate at `(s, a)` given the compatible features there.
    fn predict(&self, state: &S, action: &A, psi: &Array1<f64>, phi: &Array1<f64>) -> f64;

    /// Fold one observed raw reward into the estimate.
    fn observe(&mut self, state: &S, action: &A, psi: &Array1<f64>, phi: &Array1<f64>, reward: f64);

    /// Feature-free query, available only for keyed (discrete) estimators.
    fn predict_keyed(&self, state: &S, action: &A) -> Option<f64>;
}

/// Exact running mean per (state, action) key; the estimate for an unseen
/// pair is 0.
#[derive(Clone, Debug, Default)]
pub struct TabularMeanEstimator<S, A> {
    table: HashMap<(S, A), (u64, f64)>,
}

impl<S: Eq + Hash + Clone, A: Eq + Hash + Clone> TabularMeanEstimator<S, A> {
    pub fn new() -> Self {
        Self {
            table: HashMap::new(),
        }
    }

    pub fn mean(&self, state: &S, action: &A) -> f64 {
        self.table
            .get(&(state.clone(), action.clone()))
            .map_or(0.0, |&(_, mean)| mean)
    }
}

impl<S: Eq + Hash + Clone, A: Eq + Hash + Clone> RewardEstimator<S, A>
    for TabularMeanEstimator<S, A>
{
    fn predict(&self, state: &S, action: &A, _psi: &Array1<f64>, _phi: &Array1<f64>) -> f64 {
        self.mean(state, action)
    }

    fn observe(
        &mut self,
        state: &S,
        action: &A,
        _psi: &Array1<f64>,
        _phi: &Array1<f64>,
        reward: f64,
    ) {
        let entry = self
            .table
            .entry((state.clone(), action.clone()))
            .or_insert((0, 0.0));
        entry.0 += 1;
        entry.1 += (reward - entry.1) / entry.0 as f64;
    }

    fn predict_keyed(&self, state: &S, action: &A) -> Option<f64> {
        Some(self.mean(state, action))
    }
}

/// Least-mean-squares regression of the reward on the compatible feature
/// pair, for continuous state spaces where keyed storage is unavailable.
#[derive(Clone, Debug)]
pub struct LinearRewardEstimator {
    u_psi: Array1<f64>,
    u_phi: Array1<f64>,
    step_size: f64,
}

impl LinearRewardEstimator {
    pub fn new(psi_dim: usize, phi_dim: usize, step_size: f64) -> Result<Self> {
        if step_size <= 0.0 {
            return Err(Error::Precondition(format!(
                "estimator step size must be positive, got {step_size}"
            )));
        }
        Ok(Self {
            u_psi: Array1::zeros(psi_dim),
            u_phi: Array1::zeros(phi_dim),
            step_size,
        })
    }
}

impl<S, A> RewardEstimator<S, A> for LinearRewardEstimator {
    fn predict(&self, _state: &S, _action: &A, psi: &Array1<f64>, phi: &Array1<f64>) -> f64 {
        self.u_psi.dot(psi) + self.u_phi.dot(phi)
    }

    fn observe(&mut self, state: &S, action: &A, psi: &Array1<f64>, phi: &Array1<f64>, reward: f64) {
        let err = reward - RewardEstimator::<S, A>::predict(self, state, action, psi, phi);
        self.u_psi.scaled_add(self.step_size * err, psi);
        self.u_phi.scaled_add(self.step_size * err, phi);
    }

    fn predict_keyed(&self, _state: &S, _action: &A) -> Option<f64> {
        None
    }
}

/// Step-size rule for TD updates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepSchedule {
    /// Fixed rate for every update.
    Constant,
    /// The i-th coordinate's effective rate is `step_size / visits(i)`,
    /// counting updates in which that coordinate's eligibility is nonzero.
    /// With one-hot features and no traces, TD estimates become exact
    /// running means of their update targets; requires `trace_decay = 0`.
    PerCoordinateHarmonic,
}

/// Linear critic over the compatible pair `(ψ, φ)` with accumulating
/// eligibility traces: `estimate = ψᵀw + φᵀv`, and `∂estimate/∂w = ψ`, so a
/// converged `w` is usable directly as a natural-gradient direction.
#[derive(Clone, Debug)]
pub struct CompatibleLinearCritic {
    w: Array1<f64>,
    v: Array1<f64>,
    trace_w: Array1<f64>,
    trace_v: Array1<f64>,
    counts_w: Vec<u64>,
    counts_v: Vec<u64>,
    step_size: f64,
    trace_decay: f64,
    discount: f64,
    schedule: StepSchedule,
}

impl CompatibleLinearCritic {
    pub fn new(
        psi_dim: usize,
        phi_dim: usize,
        step_size: f64,
        trace_decay: f64,
        discount: f64,
    ) -> Result<Self> {
        if step_size <= 0.0 {
            return Err(Error::Precondition(format!(
                "critic step size must be positive, got {step_size}"
            )));
        }
        if !(0.0..=1.0).contains(&trace_decay) {
            return Err(Error::Precondition(format!(
                "trace decay must lie in [0, 1], got {trace_decay}"
            )));
        }
        if !(0.0..=1.0).contains(&discount) {
            return Err(Error::Precondition(format!(
                "discount must lie in [0, 1], got {discount}"
            )));
        }
        Ok(Self {
            w: Array1::zeros(psi_dim),
            v: Array1::zeros(phi_dim),
            trace_w: Array1::zeros(psi_dim),
            trace_v: Array1::zeros(phi_dim),
            counts_w: vec![0; psi_dim],
            counts_v: vec![0; phi_dim],
            step_size,
            trace_decay,
            discount,
            schedule: StepSchedule::Constant,
        })
    }

    /// Trace-free critic with per-coordinate harmonic step sizes: with
    /// one-hot features its estimates are exact running means, which is the
    /// right tool for tabular cross-checks against dynamic programming.
    pub fn tabular(psi_dim: usize, phi_dim: usize, discount: f64) -> Result<Self> {
        let mut critic = Self::new(psi_dim, phi_dim, 1.0, 0.0, discount)?;
        critic.schedule = StepSchedule::PerCoordinateHarmonic;
        Ok(critic)
    }

    /// Switch to per-coordinate harmonic step sizes (see [`StepSchedule`]).
    pub fn with_harmonic_steps(mut self) -> Result<Self> {
        if self.trace_decay != 0.0 {
            return Err(Error::Precondition(
                "per-coordinate harmonic steps require trace decay 0".into(),
            ));
        }
        self.schedule = StepSchedule::PerCoordinateHarmonic;
        Ok(self)
    }

    pub fn w(&self) -> &Array1<f64> {
        &self.w
    }

    pub fn v(&self) -> &Array1<f64> {
        &self.v
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn set_weights(&mut self, w: Array1<f64>, v: Array1<f64>) -> Result<()> {
        if w.len() != self.w.len() || v.len() != self.v.len() {
            return Err(Error::DimensionMismatch {
                context: "critic weight restore",
                expected: self.w.len() + self.v.len(),
                actual: w.len() + v.len(),
            });
        }
        self.w = w;
        self.v = v;
        Ok(())
    }

    /// `ψᵀw + φᵀv`.
    pub fn estimate(&self, psi: &Array1<f64>, phi: &Array1<f64>) -> f64 {
        debug_assert_eq!(psi.len(), self.w.len());
        debug_assert_eq!(phi.len(), self.v.len());
        self.w.dot(psi) + self.v.dot(phi)
    }

    /// Clear eligibility traces; call at every episode start.
    pub fn reset_traces(&mut self) {
        self.trace_w.fill(0.0);
        self.trace_v.fill(0.0);
    }

    pub fn params_finite(&self) -> bool {
        self.w.iter().chain(self.v.iter()).all(|x| x.is_finite())
    }

    fn check_dims(&self, psi: &Array1<f64>, phi: &Array1<f64>) -> Result<()> {
        if psi.len() != self.w.len() {
            return Err(Error::DimensionMismatch {
                context: "critic score block",
                expected: self.w.len(),
                actual: psi.len(),
            });
        }
        if phi.len() != self.v.len() {
            return Err(Error::DimensionMismatch {
                context: "critic baseline block",
                expected: self.v.len(),
                actual: phi.len(),
            });
        }
        Ok(())
    }

    /// One SARSA(λ) update. `next` carries the successor features `(ψ′, φ′)`
    /// and must be present exactly when the transition does not terminate
    /// (including truncation bootstraps). Returns the TD error
    /// `δ = r + γ·estimate(s′, a′)·(1 − terminal) − estimate(s, a)`.
    pub fn sarsa_update(
        &mut self,
        reward: f64,
        terminal: bool,
        psi: &Array1<f64>,
        phi: &Array1<f64>,
        next: Option<(&Array1<f64>, &Array1<f64>)>,
    ) -> Result<f64> {
        self.check_dims(psi, phi)?;
        let bootstrap = match (terminal, next) {
            (true, _) => 0.0,
            (false, Some((psi_next, phi_next))) => {
                self.check_dims(psi_next, phi_next)?;
                self.estimate(psi_next, phi_next)
            }
            (false, None) => {
                return Err(Error::Precondition(
                    "non-terminal update needs successor features to bootstrap".into(),
                ))
            }
        };
        let delta = reward + self.discount * bootstrap - self.estimate(psi, phi);
        if !delta.is_finite() {
            return Err(Error::NonFinite(format!("TD error {delta}")));
        }

        let decay = self.discount * self.trace_decay;
        self.trace_w.mapv_inplace(|e| e * decay);
        self.trace_w += psi;
        self.trace_v.mapv_inplace(|e| e * decay);
        self.trace_v += phi;

        match self.schedule {
            StepSchedule::Constant => {
                self.w.scaled_add(self.step_size * delta, &self.trace_w);
                self.v.scaled_add(self.step_size * delta, &self.trace_v);
            }
            StepSchedule::PerCoordinateHarmonic => {
                for i in 0..self.w.len() {
                    let e = self.trace_w[i];
                    if e != 0.0 {
                        self.counts_w[i] += 1;
                        self.w[i] += self.step_size / self.counts_w[i] as f64 * delta * e;
                    }
                }
                for i in 0..self.v.len() {
                    let e = self.trace_v[i];
                    if e != 0.0 {
                        self.counts_v[i] += 1;
                        self.v[i] += self.step_size / self.counts_v[i] as f64 * delta * e;
                    }
                }
            }
        }
        Ok(delta)
    }
}

/// One transition with its compatible features, ready for critic updates.
/// `next` holds `(ψ′, φ′)` when the episode continues.
pub struct FeaturedStep<'a, S, A> {
    pub state: &'a S,
    pub action: &'a A,
    pub reward: f64,
    pub terminal: bool,
    pub psi: &'a Array1<f64>,
    pub phi: &'a Array1<f64>,
    pub next: Option<(&'a Array1<f64>, &'a Array1<f64>)>,
}

/// Resolve the per-step target at `(s, a)`; centralised targets read the
/// reward estimator (which must then be supplied).
pub fn resolve_target<S, A>(
    target: &TargetFunction<S, A>,
    mean_est: Option<&dyn RewardEstimator<S, A>>,
    state: &S,
    action: &A,
    psi: &Array1<f64>,
    phi: &Array1<f64>,
) -> Result<f64> {
    match target {
        TargetFunction::Fixed { .. } | TargetFunction::Custom(_) => target.peek(state, action),
        TargetFunction::Centralised => {
            let est = mean_est.ok_or_else(|| {
                Error::Precondition("a centralised target needs a reward estimator".into())
            })?;
            Ok(est.predict(state, action, psi, phi))
        }
    }
}

/// Update the downside critic from one transition: resolve `τ_R(s, a)`,
/// transform the reward to `g = ((τ_R − r)₊)^m`, and run the ordinary SARSA
/// update on `g`. For centralised targets the reward estimator is updated
/// with the raw reward only after the transform is computed, so each update
/// measures the shortfall against the estimate excluding the current sample.
///
/// Orders `m ≥ 2` lose the subadditivity that justifies the recursion, so
/// they are accepted only on terminating single-step transitions.
pub fn lpm_critic_update<S, A>(
    critic: &mut CompatibleLinearCritic,
    step: &FeaturedStep<'_, S, A>,
    order: u32,
    target: &TargetFunction<S, A>,
    mut mean_est: Option<&mut (dyn RewardEstimator<S, A> + '_)>,
) -> Result<f64> {
    if order == 0 {
        return Err(Error::Precondition("transform order must be at least 1".into()));
    }
    if order >= 2 && !step.terminal {
        return Err(Error::Precondition(format!(
            "order-{order} transforms are limited to single-step episodes; \
             multi-step recursion is first-order only"
        )));
    }
    let tau_r = resolve_target(
        target,
        mean_est.as_deref(),
        step.state,
        step.action,
        step.psi,
        step.phi,
    )?;
    let g = transform_reward(step.reward, tau_r, order);
    let delta = critic.sarsa_update(g, step.terminal, step.psi, step.phi, step.next)?;
    if matches!(target, TargetFunction::Centralised) {
        if let Some(est) = mean_est.as_mut() {
            est.observe(step.state, step.action, step.psi, step.phi, step.reward);
        }
    }
    Ok(delta)
}

//! Empirical partial moments, the downside reward transform, and a
//! Monte-Carlo oracle for the lower partial moment of the return.
//!
//! The lower partial moment (LPM) of order `m` about a target `τ` is the
//! expectation of `((τ − X)₊)^m`: dispersion measured only below the target.
//! The upper partial moment mirrors it with `((X − τ)₊)^m`. First-order
//! partial moments are subadditive when the targets add, and the positive
//! part `(c − X)₊` never has more variance than `X` itself — both facts are
//! checkable on finite samples and underpin the TD bound learned in
//! [`crate::prediction`].

use crate::error::{Error, Result};
use crate::mdp::{rollout_from, Environment, StartFrom};
use crate::policies::Policy;
use crate::prediction::TargetFunction;
use rand_chacha::ChaCha8Rng;

/// Which tail of the distribution a partial moment measures.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// Deviations below the target: `((τ − x)₊)^m`.
    Lower,
    /// Deviations above the target: `((x − τ)₊)^m`.
    Upper,
}

/// Order, side and target of a partial moment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PartialMomentSpec {
    pub order: u32,
    pub side: Side,
    pub target: f64,
}

impl PartialMomentSpec {
    /// Build a spec, rejecting order 0 and non-finite targets.
    pub fn new(order: u32, side: Side, target: f64) -> Result<Self> {
        if order == 0 {
            return Err(Error::Precondition(
                "partial moment order must be at least 1".into(),
            ));
        }
        if !target.is_finite() {
            return Err(Error::Precondition(format!(
                "partial moment target must be finite, got {target}"
            )));
        }
        Ok(Self { order, side, target })
    }

    /// Lower-side spec of the given order.
    pub fn lower(order: u32, target: f64) -> Result<Self> {
        Self::new(order, Side::Lower, target)
    }

    /// Upper-side spec of the given order.
    pub fn upper(order: u32, target: f64) -> Result<Self> {
        Self::new(order, Side::Upper, target)
    }
}

fn positive_part(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

fn check_samples(samples: &[f64]) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::Precondition(
            "partial moment of an empty sample set".into(),
        ));
    }
    if let Some(bad) = samples.iter().find(|x| !x.is_finite()) {
        return Err(Error::Precondition(format!(
            "non-finite sample {bad} in partial moment input"
        )));
    }
    Ok(())
}

/// Mean of a non-empty slice.
pub fn sample_mean(samples: &[f64]) -> f64 {
    assert!(!samples.is_empty(), "mean of an empty sample set");
    samples.iter().sum::<f64>() / samples.len() as f64
}

/// Population variance (normalised by `n`, not `n − 1`) of a non-empty slice.
///
/// The population convention makes distribution-level identities exact on the
/// empirical measure, which is what the variance-bound check relies on.
pub fn population_variance(samples: &[f64]) -> f64 {
    let mu = sample_mean(samples);
    samples.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / samples.len() as f64
}

/// Empirical partial moment of a sample set.
///
/// Lower side: `mean(((τ − xᵢ)₊)^m)`; upper side: `mean(((xᵢ − τ)₊)^m)`.
/// Both are non-negative by construction. Errors on an empty or non-finite
/// sample set.
pub fn empirical_partial_moment(samples: &[f64], spec: &PartialMomentSpec) -> Result<f64> {
    check_samples(samples)?;
    let m = spec.order as i32;
    let total: f64 = samples
        .iter()
        .map(|&x| {
            let dev = match spec.side {
                Side::Lower => positive_part(spec.target - x),
                Side::Upper => positive_part(x - spec.target),
            };
            dev.powi(m)
        })
        .sum();
    Ok(total / samples.len() as f64)
}

/// Downside reward transform `g(r) = ((τ_R − r)₊)^m`.
///
/// Zero exactly when the reward meets its per-step target; strictly positive
/// below it. The transformed reward is fed to an ordinary SARSA critic to
/// learn the recursive LPM bound.
pub fn transform_reward(reward: f64, tau_r: f64, order: u32) -> f64 {
    assert!(order >= 1, "reward transform order must be at least 1");
    positive_part(tau_r - reward).powi(order as i32)
}

/// Check first-order subadditivity on paired samples:
/// `M₋[X+Y | τ_x+τ_y] ≤ M₋[X|τ_x] + M₋[Y|τ_y]`, and the upper-side mirror.
///
/// Only `order = 1` is supported — the pointwise inequality
/// `(a + b)₊ ≤ a₊ + b₊` that drives the proof fails for higher orders — so
/// any other order is a precondition error. Samples must be paired (equal
/// length, drawn jointly).
pub fn check_subadditivity(
    samples_x: &[f64],
    samples_y: &[f64],
    tau_x: f64,
    tau_y: f64,
    order: u32,
) -> Result<bool> {
    if order != 1 {
        return Err(Error::Precondition(format!(
            "subadditivity check is first-order only, got order {order}"
        )));
    }
    if samples_x.len() != samples_y.len() {
        return Err(Error::DimensionMismatch {
            context: "check_subadditivity paired samples",
            expected: samples_x.len(),
            actual: samples_y.len(),
        });
    }
    check_samples(samples_x)?;
    check_samples(samples_y)?;

    let joint: Vec<f64> = samples_x
        .iter()
        .zip(samples_y)
        .map(|(x, y)| x + y)
        .collect();
    let tau_sum = tau_x + tau_y;

    let mut ok = true;
    for side in [Side::Lower, Side::Upper] {
        let m_joint = empirical_partial_moment(&joint, &PartialMomentSpec::new(1, side, tau_sum)?)?;
        let m_x = empirical_partial_moment(samples_x, &PartialMomentSpec::new(1, side, tau_x)?)?;
        let m_y = empirical_partial_moment(samples_y, &PartialMomentSpec::new(1, side, tau_y)?)?;
        ok &= m_joint <= m_x + m_y + 1e-12 * (1.0 + m_x.abs() + m_y.abs());
    }
    Ok(ok)
}

/// Check the variance bound `Var[(c − X)₊] ≤ Var[X]` on a sample set, using
/// population variances so the inequality is exact on the empirical measure.
///
/// Holds for every constant `c` and every distribution; this checker exists
/// so that claim stays continuously verified against randomized inputs.
pub fn check_variance_bound(samples: &[f64], c: f64) -> bool {
    assert!(
        !samples.is_empty(),
        "variance bound check needs a non-empty sample set"
    );
    let clipped: Vec<f64> = samples.iter().map(|&x| positive_part(c - x)).collect();
    population_variance(&clipped) <= population_variance(samples) + 1e-12
}

/// Monte-Carlo oracle for the lower partial moment of the return from a
/// fixed start pair `(s₀, a₀)`.
///
/// Runs `n_rollouts` episodes that begin in `state` and execute `action`
/// first, then follow `policy`. Each rollout accumulates the return
/// `G = Σ γᵏ rₖ` alongside the unrolled per-step target `Σ γᵏ τ_R(sₖ, aₖ)`;
/// the per-rollout targets are averaged into the scalar return-level target
/// `τ̂`, and the estimate is `mean((τ̂ − Gᵢ)₊)`.
///
/// Under `discount = 1` a rollout that hits `max_steps` without terminating
/// is a runtime error (the undiscounted moment would be ill-defined).
#[allow(clippy::too_many_arguments)]
pub fn mc_lpm_of_return<E, P>(
    env: &mut E,
    policy: &P,
    state: &E::State,
    action: &E::Action,
    target: &TargetFunction<E::State, E::Action>,
    n_rollouts: usize,
    discount: f64,
    max_steps: usize,
    rng: &mut ChaCha8Rng,
) -> Result<McLpmEstimate>
where
    E: Environment + StartFrom,
    P: Policy<E::State, E::Action>,
{
    if n_rollouts == 0 {
        return Err(Error::Precondition(
            "mc_lpm_of_return needs at least one rollout".into(),
        ));
    }
    let mut returns = Vec::with_capacity(n_rollouts);
    let mut targets = Vec::with_capacity(n_rollouts);
    for _ in 0..n_rollouts {
        let traj = rollout_from(
            env,
            policy,
            state.clone(),
            action.clone(),
            discount,
            max_steps,
            rng,
        )?;
        if !traj.terminated() && discount >= 1.0 {
            return Err(Error::Environment(format!(
                "rollout truncated at {max_steps} steps with discount 1; \
                 the undiscounted return-level target is undefined"
            )));
        }
        let mut g = 0.0;
        let mut tau = 0.0;
        let mut scale = 1.0;
        for tr in &traj.transitions {
            g += scale * tr.reward;
            tau += scale * target.peek(&tr.state, &tr.action)?;
            scale *= discount;
        }
        returns.push(g);
        targets.push(tau);
    }
    let tau_hat = sample_mean(&targets);
    let deviations: Vec<f64> = returns.iter().map(|&g| positive_part(tau_hat - g)).collect();
    let estimate = sample_mean(&deviations);
    let se = (population_variance(&deviations) / n_rollouts as f64).sqrt();
    Ok(McLpmEstimate {
        estimate,
        standard_error: se,
        return_target: tau_hat,
    })
}

/// Result of [`mc_lpm_of_return`]: the estimate, its standard error, and the
/// unrolled return-level target the deviations were measured against.
#[derive(Clone, Copy, Debug)]
pub struct McLpmEstimate {
    pub estimate: f64,
    pub standard_error: f64,
    pub return_target: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::distributions::Distribution;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Normal, Pareto};

    // E[(−X)₊] for X ~ N(0,1): 1/√(2π).
    const NORMAL_LPM_AT_MEAN: f64 = 0.398_942_280_401_432_7;
    // Var[(X)₊] for X ~ N(0,1): 1/2 − 1/(2π).
    const NORMAL_CLIPPED_VARIANCE: f64 = 0.340_845_056_908_104_6;

    #[test]
    fn order_zero_is_rejected() {
        assert!(PartialMomentSpec::lower(0, 0.0).is_err());
    }

    #[test]
    fn non_finite_target_is_rejected() {
        assert!(PartialMomentSpec::lower(1, f64::INFINITY).is_err());
        assert!(PartialMomentSpec::lower(1, f64::NAN).is_err());
    }

    #[test]
    fn empty_and_non_finite_samples_are_rejected() {
        let spec = PartialMomentSpec::lower(1, 0.0).unwrap();
        assert!(empirical_partial_moment(&[], &spec).is_err());
        assert!(empirical_partial_moment(&[1.0, f64::NAN], &spec).is_err());
    }

    #[test]
    fn single_sample_moment_is_its_deviation() {
        let spec = PartialMomentSpec::lower(1, 2.0).unwrap();
        assert_eq!(empirical_partial_moment(&[0.5], &spec).unwrap(), 1.5);
        let spec2 = PartialMomentSpec::lower(2, 2.0).unwrap();
        assert_eq!(empirical_partial_moment(&[0.5], &spec2).unwrap(), 2.25);
    }

    #[test]
    fn target_below_all_samples_gives_zero_lower_moment() {
        let spec = PartialMomentSpec::lower(1, -10.0).unwrap();
        let xs = [0.0, 1.0, 5.0];
        assert_eq!(empirical_partial_moment(&xs, &spec).unwrap(), 0.0);
    }

    #[test]
    fn normal_lower_moment_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let n = 1_000_000;
        let xs: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
        let spec = PartialMomentSpec::lower(1, 0.0).unwrap();
        let est = empirical_partial_moment(&xs, &spec).unwrap();
        // 3 standard errors of the deviation sample.
        let se = (NORMAL_CLIPPED_VARIANCE / n as f64).sqrt();
        assert!(
            (est - NORMAL_LPM_AT_MEAN).abs() <= 3.0 * se,
            "estimate {est} vs {NORMAL_LPM_AT_MEAN} (3se = {})",
            3.0 * se
        );
    }

    #[test]
    fn pareto_lower_moment_at_scale_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pareto = Pareto::new(1.0, 1.5).unwrap();
        let xs: Vec<f64> = (0..10_000).map(|_| pareto.sample(&mut rng)).collect();
        let spec = PartialMomentSpec::lower(1, 1.0).unwrap();
        assert_eq!(empirical_partial_moment(&xs, &spec).unwrap(), 0.0);
    }

    #[test]
    fn lower_equals_upper_about_the_sample_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let normal = Normal::new(2.0, 3.0).unwrap();
        let xs: Vec<f64> = (0..5_000).map(|_| normal.sample(&mut rng)).collect();
        let mu = sample_mean(&xs);
        let lo = empirical_partial_moment(&xs, &PartialMomentSpec::lower(1, mu).unwrap()).unwrap();
        let hi = empirical_partial_moment(&xs, &PartialMomentSpec::upper(1, mu).unwrap()).unwrap();
        assert!((lo - hi).abs() <= 1e-12 * lo.max(1.0), "{lo} vs {hi}");
    }

    #[test]
    fn transform_reward_zero_iff_reward_meets_target() {
        assert_eq!(transform_reward(1.0, 1.0, 1), 0.0);
        assert_eq!(transform_reward(2.0, 1.0, 1), 0.0);
        assert_eq!(transform_reward(0.0, 1.0, 1), 1.0);
        assert_eq!(transform_reward(-1.0, 1.0, 2), 4.0);
    }

    #[test]
    fn subadditivity_rejects_higher_orders_and_mismatched_lengths() {
        let xs = [1.0, 2.0];
        let ys = [0.5, 0.25];
        assert!(check_subadditivity(&xs, &ys, 0.0, 0.0, 2).is_err());
        assert!(check_subadditivity(&xs, &ys[..1], 0.0, 0.0, 1).is_err());
    }

    #[test]
    fn variance_bound_on_clipped_normal_matches_closed_form() {
        // (0 − X)₊ for standard normal X has variance 1/2 − 1/(2π) < 1.
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let xs: Vec<f64> = (0..1_000_000).map(|_| normal.sample(&mut rng)).collect();
        let clipped: Vec<f64> = xs.iter().map(|&x| (-x).max(0.0)).collect();
        let v = population_variance(&clipped);
        assert!((v - NORMAL_CLIPPED_VARIANCE).abs() < 2e-3, "{v}");
        assert!(check_variance_bound(&xs, 0.0));
    }

    proptest! {
        #[test]
        fn prop_variance_bound_always_holds(
            xs in prop::collection::vec(-50.0f64..50.0, 1..256),
            c in -5.0f64..5.0,
        ) {
            prop_assert!(check_variance_bound(&xs, c));
        }

        #[test]
        fn prop_subadditivity_always_holds_first_order(
            pairs in prop::collection::vec((-20.0f64..20.0, -20.0f64..20.0), 1..128),
            tau_x in -5.0f64..5.0,
            tau_y in -5.0f64..5.0,
        ) {
            let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            prop_assert!(check_subadditivity(&xs, &ys, tau_x, tau_y, 1).unwrap());
        }

        #[test]
        fn prop_lower_moment_monotone_in_target(
            xs in prop::collection::vec(-20.0f64..20.0, 1..128),
            tau in -5.0f64..5.0,
            bump in 0.0f64..3.0,
        ) {
            let lo = empirical_partial_moment(&xs, &PartialMomentSpec::lower(1, tau).unwrap()).unwrap();
            let hi = empirical_partial_moment(&xs, &PartialMomentSpec::lower(1, tau + bump).unwrap()).unwrap();
            prop_assert!(hi >= lo);
        }

        #[test]
        fn prop_moments_are_non_negative(
            xs in prop::collection::vec(-20.0f64..20.0, 1..128),
            tau in -5.0f64..5.0,
            order in 1u32..4,
        ) {
            for side in [Side::Lower, Side::Upper] {
                let m = empirical_partial_moment(&xs, &PartialMomentSpec::new(order, side, tau).unwrap()).unwrap();
                prop_assert!(m >= 0.0);
            }
        }

        #[test]
        fn prop_transform_zero_iff_reward_at_or_above_target(
            r in -20.0f64..20.0,
            tau in -20.0f64..20.0,
            order in 1u32..4,
        ) {
            let g = transform_reward(r, tau, order);
            prop_assert!(g >= 0.0);
            prop_assert_eq!(g == 0.0, r >= tau);
        }
    }
}

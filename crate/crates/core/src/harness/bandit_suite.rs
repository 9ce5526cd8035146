//! Three-armed bandit suite: one risk-neutral and two shortfall-penalised
//! objectives trained side by side.
//!
//! Arm A is safe with a low mean, arm B has the highest mean but a heavy
//! loss tail, and arm C trades a little mean for a much lighter tail. The
//! risk-neutral objective should settle on B; both penalised objectives
//! should settle on C. The suite tracks the full selection-probability
//! trajectory averaged over independent trials.

use crate::control::{pretrain, train_constrained, LagrangianState};
use crate::envs::ThreeArmBandit;
use crate::error::{Error, Result};
use crate::harness::config::RunConfig;
use crate::harness::exec::{map_indexed, stream_rng};
use crate::policies::{softmax, StatelessGibbs};
use crate::prediction::{
    CompatibleLinearCritic, RewardEstimator, TabularMeanEstimator, TargetFunction,
};
use rand_chacha::ChaCha8Rng;
use std::io::Write;

/// The three training objectives, in output order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BanditObjective {
    /// Pure expected reward (multiplier pinned at 0).
    Mean,
    /// Expected reward minus twice the first-order shortfall below the
    /// arm's own mean reward (multiplier pinned at 2).
    ShortfallLinear,
    /// Expected reward minus the second-order shortfall below the arm's
    /// own mean reward (multiplier pinned at 1).
    ShortfallQuadratic,
}

impl BanditObjective {
    pub const ALL: [BanditObjective; 3] = [
        BanditObjective::Mean,
        BanditObjective::ShortfallLinear,
        BanditObjective::ShortfallQuadratic,
    ];

    pub fn label(self) -> &'static str {
        match self {
            BanditObjective::Mean => "mean",
            BanditObjective::ShortfallLinear => "lpm1_penalty",
            BanditObjective::ShortfallQuadratic => "lpm2_penalty",
        }
    }

    fn lambda(self) -> f64 {
        match self {
            BanditObjective::Mean => 0.0,
            BanditObjective::ShortfallLinear => 2.0,
            BanditObjective::ShortfallQuadratic => 1.0,
        }
    }

    fn order(self) -> u32 {
        match self {
            BanditObjective::ShortfallQuadratic => 2,
            _ => 1,
        }
    }
}

/// Trial-averaged selection probabilities at the snapshot cadence.
#[derive(Clone, Debug)]
pub struct BanditCurves {
    /// Episode (= pull) counts at which the policy was snapshotted.
    pub pulls: Vec<usize>,
    /// `probabilities[objective][pull_index][arm]`.
    pub probabilities: [Vec<[f64; 3]>; 3],
}

fn run_single(
    cfg: &RunConfig,
    objective: BanditObjective,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<[f64; 3]>> {
    let mut env = ThreeArmBandit::new(cfg.bandit_env)?;
    let mut policy = StatelessGibbs::new(3)?;
    let mut q_critic = CompatibleLinearCritic::new(
        3,
        1,
        cfg.critic.step_size,
        cfg.critic.trace_decay,
        cfg.critic.discount,
    )?;
    let mut lpm_critic = CompatibleLinearCritic::new(
        3,
        1,
        cfg.critic.step_size,
        cfg.critic.trace_decay,
        cfg.critic.discount,
    )?;
    let mut lagrange = LagrangianState::constant(objective.lambda())?;
    let schedule = cfg.to_schedule();

    let log = match objective {
        BanditObjective::Mean => {
            // No penalty is applied, so any target works; zero keeps the
            // shortfall critic meaningful without an estimator. Pretraining
            // mirrors the penalised runs so the shared pull axis means the
            // same thing for every curve.
            let target = TargetFunction::fixed_per_step(0.0)?;
            pretrain(
                &mut env,
                &policy,
                &mut q_critic,
                &mut lpm_critic,
                &target,
                None,
                objective.order(),
                &mut lagrange,
                &schedule,
                rng,
            )?;
            train_constrained(
                &mut env,
                &mut policy,
                &mut q_critic,
                &mut lpm_critic,
                &target,
                None,
                objective.order(),
                &mut lagrange,
                &schedule,
                rng,
            )?
        }
        _ => {
            let target = TargetFunction::centralised();
            let mut estimator: TabularMeanEstimator<(), usize> = TabularMeanEstimator::new();
            // Warm the critics under the uniform initial policy before any
            // policy update. The heavy-tailed arm pays out below its mean on
            // most pulls, so a cold value estimate understates it badly and
            // an aggressive first update can lock the policy onto the safe
            // arm before the estimate corrects itself.
            pretrain(
                &mut env,
                &policy,
                &mut q_critic,
                &mut lpm_critic,
                &target,
                Some(&mut estimator as &mut dyn RewardEstimator<(), usize>),
                objective.order(),
                &mut lagrange,
                &schedule,
                rng,
            )?;
            train_constrained(
                &mut env,
                &mut policy,
                &mut q_critic,
                &mut lpm_critic,
                &target,
                Some(&mut estimator as &mut dyn RewardEstimator<(), usize>),
                objective.order(),
                &mut lagrange,
                &schedule,
                rng,
            )?
        }
    };

    Ok(log
        .snapshots
        .iter()
        .map(|(_, theta)| {
            let p = softmax(theta.as_slice().expect("contiguous parameters"));
            [p[0], p[1], p[2]]
        })
        .collect())
}

/// Run all three objectives over `cfg.trials` independent trials and
/// average the probability curves. Stream `trial·3 + objective` keeps every
/// run independent and the output order-insensitive.
pub fn run_bandit_suite(cfg: &RunConfig) -> Result<BanditCurves> {
    if cfg.schedule.snapshot_every == 0 {
        return Err(Error::Config(
            "bandit curves need schedule.snapshot_every ≥ 1".into(),
        ));
    }
    let trials = cfg.trials;
    let per_trial = map_indexed(trials, |trial| -> Result<[Vec<[f64; 3]>; 3]> {
        let mut curves: [Vec<[f64; 3]>; 3] = Default::default();
        for (index, objective) in BanditObjective::ALL.into_iter().enumerate() {
            let mut rng = stream_rng(cfg.base_seed, (trial * 3 + index) as u64);
            curves[index] = run_single(cfg, objective, &mut rng)?;
        }
        Ok(curves)
    });

    // Pretraining consumes real pulls, so the reported axis starts after
    // the warm-up budget rather than pretending those samples were free.
    let pulls: Vec<usize> = (1..=cfg.schedule.total_episodes)
        .filter(|e| e % cfg.schedule.snapshot_every == 0)
        .map(|e| e + cfg.schedule.pretrain_episodes)
        .collect();
    let mut probabilities: [Vec<[f64; 3]>; 3] =
        std::array::from_fn(|_| vec![[0.0; 3]; pulls.len()]);

    // Accumulate in trial order so float summation is deterministic.
    for trial_result in per_trial {
        let curves = trial_result?;
        for (objective, curve) in curves.iter().enumerate() {
            if curve.len() != pulls.len() {
                return Err(Error::Environment(format!(
                    "snapshot count {} does not match the cadence-derived {}",
                    curve.len(),
                    pulls.len()
                )));
            }
            for (slot, probs) in probabilities[objective].iter_mut().zip(curve) {
                for arm in 0..3 {
                    slot[arm] += probs[arm];
                }
            }
        }
    }
    for curve in &mut probabilities {
        for slot in curve.iter_mut() {
            for p in slot.iter_mut() {
                *p /= trials as f64;
            }
        }
    }
    Ok(BanditCurves {
        pulls,
        probabilities,
    })
}

pub fn write_bandit_csv<W: Write>(curves: &BanditCurves, out: &mut W) -> Result<()> {
    writeln!(out, "objective,pulls,p_a,p_b,p_c")?;
    for (index, objective) in BanditObjective::ALL.into_iter().enumerate() {
        for (pull, probs) in curves.pulls.iter().zip(&curves.probabilities[index]) {
            writeln!(
                out,
                "{},{},{},{},{}",
                objective.label(),
                pull,
                probs[0],
                probs[1],
                probs[2]
            )?;
        }
    }
    Ok(())
}

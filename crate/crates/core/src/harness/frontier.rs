//! Risk–return frontier on the illiquid-portfolio domain.
//!
//! One policy is trained per constraint threshold ν and evaluated on a
//! large batch of fresh rollouts. Plotting mean return against the
//! centralised shortfall of the evaluation returns (and against the worst
//! observed return) traces how the constraint trades expected performance
//! for tail behaviour. Trials share random streams across ν values (common
//! random numbers), so threshold effects are not confounded by luck.

use crate::control::train_constrained;
use crate::envs::PortfolioEnv;
use crate::error::{Error, Result};
use crate::harness::config::{NuValue, RunConfig, TargetKind};
use crate::harness::exec::{map_indexed, stream_rng};
use crate::mdp::rollout;
use crate::moments::{empirical_partial_moment, PartialMomentSpec, Side};
use crate::policies::{LinearGibbs, Policy};
use crate::prediction::{
    CompatibleLinearCritic, LinearRewardEstimator, RewardEstimator, TargetFunction,
};
use rand_chacha::ChaCha8Rng;
use std::io::Write;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunStatus {
    Ok,
    /// Training left the finite range; the row is kept with NaN metrics so
    /// the sweep stays complete.
    Diverged,
}

impl RunStatus {
    pub fn label(self) -> &'static str {
        match self {
            RunStatus::Ok => "ok",
            RunStatus::Diverged => "diverged",
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct FrontierRow {
    pub nu: f64,
    pub seed: usize,
    pub mean_return: f64,
    /// First-order shortfall of the evaluation returns below their own
    /// mean (the centralised partial moment of the return sample).
    pub lpm: f64,
    pub min_return: f64,
    pub status: RunStatus,
}

fn run_one(cfg: &RunConfig, nu: f64, trial: usize, rng: &mut ChaCha8Rng) -> Result<FrontierRow> {
    let mut env = PortfolioEnv::new(cfg.portfolio_env)?;
    let obs_dim = cfg.portfolio_env.obs_dim();
    let mut policy = LinearGibbs::new(obs_dim, cfg.portfolio_env.max_order + 1)?;
    let psi_dim = policy.n_params();
    let phi_dim = obs_dim + 1; // linear basis [1, s…]
    let mut q_critic = CompatibleLinearCritic::new(
        psi_dim,
        phi_dim,
        cfg.critic.step_size,
        cfg.critic.trace_decay,
        cfg.critic.discount,
    )?;
    let mut lpm_critic = CompatibleLinearCritic::new(
        psi_dim,
        phi_dim,
        cfg.critic.step_size,
        cfg.critic.trace_decay,
        cfg.critic.discount,
    )?;
    let mut lagrange = cfg.lagrangian.with_nu(NuValue(nu)).to_state()?;
    let schedule = cfg.to_schedule();

    let trained = match cfg.target.kind {
        TargetKind::Centralised => {
            let target = TargetFunction::centralised();
            let mut estimator =
                LinearRewardEstimator::new(psi_dim, phi_dim, cfg.target.estimator_step)?;
            train_constrained(
                &mut env,
                &mut policy,
                &mut q_critic,
                &mut lpm_critic,
                &target,
                Some(&mut estimator as &mut dyn RewardEstimator<Vec<f64>, usize>),
                cfg.target.order,
                &mut lagrange,
                &schedule,
                rng,
            )
        }
        TargetKind::Fixed => {
            let target = TargetFunction::fixed(cfg.target.tau, cfg.critic.discount)?;
            train_constrained(
                &mut env,
                &mut policy,
                &mut q_critic,
                &mut lpm_critic,
                &target,
                None,
                cfg.target.order,
                &mut lagrange,
                &schedule,
                rng,
            )
        }
        TargetKind::Pacing => {
            return Err(Error::Config(
                "pacing targets apply to the consumption domain only".into(),
            ))
        }
    };

    match trained {
        Ok(_) => {}
        Err(Error::Diverged(_)) | Err(Error::NonFinite(_)) => {
            return Ok(FrontierRow {
                nu,
                seed: trial,
                mean_return: f64::NAN,
                lpm: f64::NAN,
                min_return: f64::NAN,
                status: RunStatus::Diverged,
            });
        }
        Err(other) => return Err(other),
    }

    let mut returns = Vec::with_capacity(cfg.eval.final_rollouts);
    for _ in 0..cfg.eval.final_rollouts {
        let traj = rollout(
            &mut env,
            &policy,
            cfg.critic.discount,
            cfg.schedule.max_steps_per_episode,
            rng,
        )?;
        returns.push(traj.total_return());
    }
    let mean_return = returns.iter().sum::<f64>() / returns.len() as f64;
    let lpm = empirical_partial_moment(
        &returns,
        &PartialMomentSpec::new(1, Side::Lower, mean_return)?,
    )?;
    let min_return = returns.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(FrontierRow {
        nu,
        seed: trial,
        mean_return,
        lpm,
        min_return,
        status: RunStatus::Ok,
    })
}

/// Sweep `sweep.nu_values × trials`. Rows are ordered by ν first, trial
/// second; trial `t` uses stream `t` for every ν.
pub fn run_frontier(cfg: &RunConfig) -> Result<Vec<FrontierRow>> {
    if cfg.eval.final_rollouts == 0 {
        return Err(Error::Config(
            "frontier evaluation needs eval.final_rollouts ≥ 1".into(),
        ));
    }
    let nus = cfg.sweep.nu_values.clone();
    let trials = cfg.trials;
    let results = map_indexed(nus.len() * trials, |index| {
        let nu = nus[index / trials].0;
        let trial = index % trials;
        let mut rng = stream_rng(cfg.base_seed, trial as u64);
        run_one(cfg, nu, trial, &mut rng)
    });
    results.into_iter().collect()
}

pub fn write_frontier_csv<W: Write>(rows: &[FrontierRow], out: &mut W) -> Result<()> {
    writeln!(out, "nu,seed,mean_return,lpm,min_return,status")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.nu,
            r.seed,
            r.mean_return,
            r.lpm,
            r.min_return,
            r.status.label()
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::Experiment;

    fn tiny_config() -> RunConfig {
        let mut cfg = RunConfig::defaults(Experiment::Portfolio);
        cfg.trials = 1;
        cfg.sweep.nu_values = vec![NuValue(0.0), NuValue(1.0)];
        cfg.schedule.pretrain_episodes = 5;
        cfg.schedule.total_episodes = 30;
        cfg.eval.final_rollouts = 200;
        cfg
    }

    #[test]
    fn sweep_emits_one_healthy_row_per_nu_and_trial() {
        let rows = run_frontier(&tiny_config()).unwrap();
        assert_eq!(rows.len(), 2);
        for row in &rows {
            assert_eq!(row.status, RunStatus::Ok);
            assert!(row.mean_return.is_finite());
            assert!(row.lpm >= 0.0);
            assert!(row.min_return <= row.mean_return);
        }
        assert_eq!(rows[0].nu, 0.0);
        assert_eq!(rows[1].nu, 1.0);
    }

    #[test]
    fn common_random_numbers_make_the_sweep_deterministic() {
        let cfg = tiny_config();
        let a = run_frontier(&cfg).unwrap();
        let b = run_frontier(&cfg).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.mean_return.to_bits(), y.mean_return.to_bits());
            assert_eq!(x.lpm.to_bits(), y.lpm.to_bits());
            assert_eq!(x.min_return.to_bits(), y.min_return.to_bits());
        }
    }

    #[test]
    fn csv_has_the_documented_columns() {
        let rows = vec![FrontierRow {
            nu: 0.4,
            seed: 2,
            mean_return: 0.25,
            lpm: 0.05,
            min_return: -0.75,
            status: RunStatus::Ok,
        }];
        let mut buf = Vec::new();
        write_frontier_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "nu,seed,mean_return,lpm,min_return,status\n0.4,2,0.25,0.05,-0.75,ok\n"
        );
    }
}

//! Consumption–investment learning curves across constraint thresholds.
//!
//! Each threshold ν gets its own training run per trial; the run logs
//! evaluated mean return `J_R` and constraint value `J_C` at a fixed
//! episode cadence. The constraint's per-step target is the pacing
//! benchmark `W_t·Δt·(T − t)` — the reward earned by consuming the current
//! wealth at a constant rate until the horizon — whose unrolled return
//! target is simply the current wealth. `ν = inf` runs the identical loop
//! with the multiplier pinned at zero.

use crate::control::{train_constrained, TrainingLog};
use crate::envs::ConsumptionEnv;
use crate::error::{Error, Result};
use crate::harness::config::{NuValue, RunConfig, TargetKind};
use crate::harness::exec::{map_indexed, stream_rng};
use crate::policies::GaussianBetaPolicy;
use crate::policies::Policy;
use crate::prediction::{CompatibleLinearCritic, TargetFunction};
use rand_chacha::ChaCha8Rng;
use std::io::Write;

#[derive(Clone, Copy, Debug)]
pub struct ConsumptionRow {
    pub nu: NuValue,
    pub seed: usize,
    pub episode: usize,
    pub j_r: f64,
    pub j_c: f64,
    pub j_r_smooth: f64,
    pub j_c_smooth: f64,
    pub lambda: f64,
}

/// Trailing moving average with a ramp-up: entry `k` averages the last
/// `min(window, k + 1)` values.
pub fn smoothed(values: &[f64], window: usize) -> Vec<f64> {
    assert!(window >= 1, "smoothing window must be at least 1");
    let mut out = Vec::with_capacity(values.len());
    let mut running = 0.0;
    for (k, &v) in values.iter().enumerate() {
        running += v;
        if k >= window {
            running -= values[k - window];
        }
        let span = window.min(k + 1) as f64;
        out.push(running / span);
    }
    out
}

fn pacing_target(cfg: &RunConfig) -> TargetFunction<[f64; 2], (f64, f64)> {
    let dt = cfg.consumption_env.dt;
    let total_time = cfg.consumption_env.total_time();
    TargetFunction::custom(move |state: &[f64; 2], _action| {
        let elapsed = state[0] * dt;
        state[1] * dt * (total_time - elapsed)
    })
}

fn run_one(
    cfg: &RunConfig,
    nu: NuValue,
    rng: &mut ChaCha8Rng,
) -> Result<TrainingLog> {
    let mut env = ConsumptionEnv::new(cfg.consumption_env)?;
    let mut policy = GaussianBetaPolicy::new(
        cfg.policy.fourier_order,
        cfg.consumption_env.horizon as f64,
        cfg.policy.w_scale,
    )?;
    let psi_dim = policy.n_params();
    let phi_dim = policy.n_features();
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
    let target = match cfg.target.kind {
        TargetKind::Pacing => pacing_target(cfg),
        TargetKind::Fixed => TargetFunction::fixed(cfg.target.tau, cfg.critic.discount)?,
        TargetKind::Centralised => {
            return Err(Error::Config(
                "consumption runs support pacing or fixed targets".into(),
            ))
        }
    };
    let mut lagrange = cfg.lagrangian.with_nu(nu).to_state()?;
    let schedule = cfg.to_schedule();
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

/// Sweep `sweep.nu_values × trials`, one row per evaluation checkpoint.
/// Trial `t` uses stream `t` for every ν (common random numbers).
pub fn run_consumption(cfg: &RunConfig) -> Result<Vec<ConsumptionRow>> {
    let nus = cfg.sweep.nu_values.clone();
    let trials = cfg.trials;
    let logs = map_indexed(nus.len() * trials, |index| {
        let nu = nus[index / trials];
        let trial = index % trials;
        let mut rng = stream_rng(cfg.base_seed, trial as u64);
        run_one(cfg, nu, &mut rng).map(|log| (nu, trial, log))
    });

    let mut rows = Vec::new();
    for entry in logs {
        let (nu, trial, log) = entry?;
        let j_r: Vec<f64> = log.entries.iter().map(|e| e.mean_return).collect();
        let j_c: Vec<f64> = log.entries.iter().map(|e| e.constraint).collect();
        let j_r_smooth = smoothed(&j_r, cfg.eval.smoothing_window);
        let j_c_smooth = smoothed(&j_c, cfg.eval.smoothing_window);
        for (k, eval) in log.entries.iter().enumerate() {
            rows.push(ConsumptionRow {
                nu,
                seed: trial,
                episode: eval.episode,
                j_r: eval.mean_return,
                j_c: eval.constraint,
                j_r_smooth: j_r_smooth[k],
                j_c_smooth: j_c_smooth[k],
                lambda: eval.lambda,
            });
        }
    }
    Ok(rows)
}

pub fn write_consumption_csv<W: Write>(rows: &[ConsumptionRow], out: &mut W) -> Result<()> {
    writeln!(
        out,
        "nu,seed,episode,j_r,j_c,j_r_smooth,j_c_smooth,lambda"
    )?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.nu.label(),
            r.seed,
            r.episode,
            r.j_r,
            r.j_c,
            r.j_r_smooth,
            r.j_c_smooth,
            r.lambda
        )?;
    }
    Ok(())
}

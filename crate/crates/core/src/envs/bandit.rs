//! Stateless three-armed bandit mixing light- and heavy-tailed payoffs:
//! two Gaussian arms and a Pareto arm whose mean exceeds one Gaussian's but
//! whose downside is bounded below by the scale parameter.

use crate::error::{Error, Result};
use crate::mdp::{ActionSpace, Environment, StartFrom, Step};
use rand::distributions::Distribution;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, Pareto};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct BanditParams {
    pub mean_a: f64,
    pub sd_a: f64,
    pub mean_b: f64,
    pub sd_b: f64,
    pub pareto_scale: f64,
    pub pareto_shape: f64,
}

impl Default for BanditParams {
    fn default() -> Self {
        Self {
            mean_a: 1.0,
            sd_a: 1.0,
            mean_b: 4.0,
            sd_b: 6.0,
            pareto_scale: 1.0,
            pareto_shape: 1.5,
        }
    }
}

impl BanditParams {
    /// Mean payoff of each arm (the Pareto mean is `shape·scale/(shape-1)`).
    pub fn arm_means(&self) -> [f64; 3] {
        [
            self.mean_a,
            self.mean_b,
            self.pareto_shape * self.pareto_scale / (self.pareto_shape - 1.0),
        ]
    }
}

/// Single-step episodes: pull one of three arms, observe the payoff, done.
#[derive(Clone, Debug)]
pub struct ThreeArmBandit {
    params: BanditParams,
}

impl ThreeArmBandit {
    pub fn new(params: BanditParams) -> Result<Self> {
        if params.sd_a <= 0.0 || params.sd_b <= 0.0 {
            return Err(Error::Precondition(
                "gaussian arm deviations must be positive".into(),
            ));
        }
        if params.pareto_scale <= 0.0 || params.pareto_shape <= 1.0 {
            return Err(Error::Precondition(
                "pareto arm needs positive scale and shape > 1 for a finite mean".into(),
            ));
        }
        Ok(Self { params })
    }

    pub fn params(&self) -> &BanditParams {
        &self.params
    }

    /// Draw one payoff from arm `0`, `1`, or `2`.
    pub fn draw_arm(&self, arm: usize, rng: &mut ChaCha8Rng) -> Result<f64> {
        let p = &self.params;
        match arm {
            0 => Ok(Normal::new(p.mean_a, p.sd_a).unwrap().sample(rng)),
            1 => Ok(Normal::new(p.mean_b, p.sd_b).unwrap().sample(rng)),
            2 => Ok(Pareto::new(p.pareto_scale, p.pareto_shape)
                .unwrap()
                .sample(rng)),
            _ => Err(Error::Precondition(format!("arm {arm} out of range"))),
        }
    }
}

impl Default for ThreeArmBandit {
    fn default() -> Self {
        Self::new(BanditParams::default()).unwrap()
    }
}

impl Environment for ThreeArmBandit {
    type State = ();
    type Action = usize;

    fn reset(&mut self, _rng: &mut ChaCha8Rng) -> Self::State {}

    fn step(&mut self, action: &usize, rng: &mut ChaCha8Rng) -> Result<Step<()>> {
        let reward = self.draw_arm(*action, rng)?;
        Ok(Step {
            state: (),
            reward,
            terminal: true,
        })
    }

    fn action_space(&self, _state: &()) -> ActionSpace<usize> {
        ActionSpace::Discrete(vec![0, 1, 2])
    }
}

impl StartFrom for ThreeArmBandit {
    fn start_from(&mut self, _state: &()) -> Result<()> {
        Ok(())
    }
}

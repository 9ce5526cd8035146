//! Consumption/investment task: each step the agent consumes a fraction of
//! wealth (the reward) and splits the remainder between a riskless holding
//! and a risky one that may default, wiping the episode.

use crate::error::{Error, Result};
use crate::mdp::{ActionSpace, Environment, StartFrom, Step};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Wealth at or below this level ends the episode.
pub const WEALTH_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConsumptionParams {
    /// Riskless drift per unit time.
    pub r_liquid: f64,
    /// Risky drift per unit time.
    pub mu_risky: f64,
    /// Risky volatility per square-root unit time.
    pub sigma_risky: f64,
    /// Wealth at the start of an episode.
    pub initial_wealth: f64,
    /// Time increment per step.
    pub dt: f64,
    /// Per-step probability that the risky holding is lost.
    pub p_default: f64,
    /// Episode length in steps.
    pub horizon: usize,
}

impl Default for ConsumptionParams {
    fn default() -> Self {
        Self {
            r_liquid: 0.05,
            mu_risky: 1.0,
            sigma_risky: 0.25,
            initial_wealth: 1.0,
            dt: 0.005,
            p_default: 0.0015,
            horizon: 200,
        }
    }
}

impl ConsumptionParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_default) {
            return Err(Error::Precondition(format!(
                "p_default must lie in [0, 1], got {}",
                self.p_default
            )));
        }
        if self.dt <= 0.0 || self.initial_wealth <= 0.0 || self.horizon == 0 {
            return Err(Error::Precondition(
                "dt, initial wealth, and horizon must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Total time spanned by an episode.
    pub fn total_time(&self) -> f64 {
        self.horizon as f64 * self.dt
    }
}

/// State is `[step index, wealth]`; the action is `(risky fraction,
/// consumption fraction)`. Consumption happens first and is the reward, so
/// it is deterministic given state and action; the split remainder then
/// evolves one increment. Unconsumed wealth at the horizon is lost.
#[derive(Clone, Debug)]
pub struct ConsumptionEnv {
    params: ConsumptionParams,
    t: usize,
    wealth: f64,
    clipped_fractions: u64,
}

impl ConsumptionEnv {
    pub fn new(params: ConsumptionParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            t: 0,
            wealth: params.initial_wealth,
            clipped_fractions: 0,
        })
    }

    pub fn params(&self) -> &ConsumptionParams {
        &self.params
    }

    /// How many risky-fraction actions were clipped into [0, 1] so far.
    pub fn clipped_fractions(&self) -> u64 {
        self.clipped_fractions
    }
}

impl Environment for ConsumptionEnv {
    type State = [f64; 2];
    type Action = (f64, f64);

    fn reset(&mut self, _rng: &mut ChaCha8Rng) -> [f64; 2] {
        self.t = 0;
        self.wealth = self.params.initial_wealth;
        [0.0, self.wealth]
    }

    fn step(&mut self, action: &(f64, f64), rng: &mut ChaCha8Rng) -> Result<Step<[f64; 2]>> {
        let p = self.params;
        if self.t >= p.horizon || self.wealth <= WEALTH_FLOOR {
            return Err(Error::Environment(
                "consumption episode already ended; call reset".into(),
            ));
        }
        let (raw_risky_fraction, consume_fraction) = *action;
        if !(0.0..=1.0).contains(&consume_fraction) {
            return Err(Error::Precondition(format!(
                "consumption fraction must lie in [0, 1], got {consume_fraction}"
            )));
        }
        if !raw_risky_fraction.is_finite() {
            return Err(Error::Precondition(format!(
                "risky fraction must be finite, got {raw_risky_fraction}"
            )));
        }
        // No leverage or shorting: the investment fraction is clipped.
        let risky_fraction = raw_risky_fraction.clamp(0.0, 1.0);
        if risky_fraction != raw_risky_fraction {
            self.clipped_fractions += 1;
        }

        let consumed = consume_fraction * self.wealth;
        let remainder = self.wealth - consumed;
        let risky = risky_fraction * remainder;
        let liquid = remainder - risky;

        // One uniform for the default event and one normal for the risky
        // return are drawn every step, keeping the stream layout fixed.
        let defaulted = rng.gen::<f64>() < p.p_default;
        let z: f64 = StandardNormal.sample(rng);

        self.t += 1;
        if defaulted {
            // The risky holding is lost and the liquid remainder is consumed
            // in its entirety.
            self.wealth = 0.0;
            return Ok(Step {
                state: [self.t as f64, 0.0],
                reward: consumed + liquid,
                terminal: true,
            });
        }

        let liquid_grown = liquid * (1.0 + p.r_liquid * p.dt);
        let risky_grown = risky * (1.0 + p.mu_risky * p.dt + p.sigma_risky * p.dt.sqrt() * z).max(0.0);
        self.wealth = liquid_grown + risky_grown;
        let terminal = self.t >= p.horizon || self.wealth <= WEALTH_FLOOR;
        Ok(Step {
            state: [self.t as f64, self.wealth],
            reward: consumed,
            terminal,
        })
    }

    fn action_space(&self, _state: &[f64; 2]) -> ActionSpace<(f64, f64)> {
        ActionSpace::Continuous {
            low: vec![0.0, 0.0],
            high: vec![1.0, 1.0],
        }
    }
}

impl StartFrom for ConsumptionEnv {
    fn start_from(&mut self, state: &[f64; 2]) -> Result<()> {
        let [t, wealth] = *state;
        if t < 0.0 || t.fract() != 0.0 || t as usize >= self.params.horizon {
            return Err(Error::Precondition(format!(
                "step index {t} must be a whole number inside the horizon"
            )));
        }
        if wealth <= WEALTH_FLOOR || !wealth.is_finite() {
            return Err(Error::Precondition(format!(
                "starting wealth {wealth} must be positive"
            )));
        }
        self.t = t as usize;
        self.wealth = wealth;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn consuming_everything_ends_the_episode_with_the_initial_wealth() {
        let mut env = ConsumptionEnv::new(ConsumptionParams::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        env.reset(&mut rng);
        let step = env.step(&(0.0, 1.0), &mut rng).unwrap();
        assert_eq!(step.reward, 1.0);
        assert!(step.terminal);
    }

    #[test]
    fn riskless_hoarding_compounds_deterministically() {
        let params = ConsumptionParams {
            p_default: 0.0,
            ..ConsumptionParams::default()
        };
        let mut env = ConsumptionEnv::new(params).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        env.reset(&mut rng);
        let mut total_reward = 0.0;
        let mut last = [0.0, 0.0];
        for _ in 0..200 {
            let step = env.step(&(0.0, 0.0), &mut rng).unwrap();
            total_reward += step.reward;
            last = step.state;
        }
        assert_eq!(total_reward, 0.0);
        let expected = (1.0 + 0.05 * 0.005_f64).powi(200);
        assert!((last[1] - expected).abs() < 1e-12, "{} vs {expected}", last[1]);
    }

    #[test]
    fn default_consumes_the_liquid_remainder() {
        let params = ConsumptionParams {
            p_default: 1.0,
            ..ConsumptionParams::default()
        };
        let mut env = ConsumptionEnv::new(params).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        env.reset(&mut rng);
        let step = env.step(&(0.25, 0.2), &mut rng).unwrap();
        // Consume 0.2, invest 0.25 of the remaining 0.8 → liquid 0.6 is
        // consumed on default, risky 0.2 is lost.
        assert!((step.reward - 0.8).abs() < 1e-15);
        assert!(step.terminal);
        assert_eq!(step.state[1], 0.0);
    }

    #[test]
    fn fractions_out_of_range_are_handled() {
        let mut env = ConsumptionEnv::new(ConsumptionParams::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        env.reset(&mut rng);
        assert!(env.step(&(0.5, 1.2), &mut rng).is_err());
        assert!(env.step(&(0.5, -0.1), &mut rng).is_err());
        let step = env.step(&(2.5, 0.0), &mut rng).unwrap();
        assert_eq!(env.clipped_fractions(), 1);
        assert!(step.state[1] > 0.0);
    }

    #[test]
    fn wealth_stays_nonnegative_under_random_play() {
        let mut env = ConsumptionEnv::new(ConsumptionParams::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            env.reset(&mut rng);
            loop {
                let a = (rng.gen::<f64>() * 2.0 - 0.5, rng.gen::<f64>());
                let step = env.step(&a, &mut rng).unwrap();
                assert!(step.state[1] >= 0.0);
                assert!(step.reward >= 0.0);
                if step.terminal {
                    break;
                }
            }
        }
    }

    #[test]
    fn horizon_discards_remaining_wealth() {
        let params = ConsumptionParams {
            p_default: 0.0,
            horizon: 3,
            ..ConsumptionParams::default()
        };
        let mut env = ConsumptionEnv::new(params).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        env.reset(&mut rng);
        let mut last_reward = f64::NAN;
        for _ in 0..3 {
            let step = env.step(&(0.0, 0.1), &mut rng).unwrap();
            last_reward = step.reward;
        }
        // The final step only pays the consumed fraction, not the leftover.
        assert!(last_reward < 0.11);
    }

    #[test]
    fn start_from_restores_time_and_wealth() {
        let mut env = ConsumptionEnv::new(ConsumptionParams::default()).unwrap();
        env.start_from(&[10.0, 0.5]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let step = env.step(&(0.0, 0.5), &mut rng).unwrap();
        assert!((step.reward - 0.25).abs() < 1e-15);
        assert_eq!(step.state[0], 11.0);
        assert!(env.start_from(&[200.0, 0.5]).is_err());
        assert!(env.start_from(&[5.0, 0.0]).is_err());
    }
}

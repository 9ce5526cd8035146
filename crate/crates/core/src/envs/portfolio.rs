//! Portfolio task with an illiquid asset: orders convert liquid wealth into
//! batches that mature after a fixed number of steps, accrue a regime-switching
//! rate, and may default at maturity. The per-step reward is the log-return of
//! the liquid holding.

use crate::error::{Error, Result};
use crate::mdp::{ActionSpace, Environment, Step};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct PortfolioParams {
    /// Gross per-step growth of the liquid holding.
    pub r_liquid: f64,
    /// Gross per-step accrual of illiquid batches in the high regime.
    pub r_illiquid_high: f64,
    /// Gross per-step accrual of illiquid batches in the low regime.
    pub r_illiquid_low: f64,
    /// Probability of switching low → high each step.
    pub p_up: f64,
    /// Probability of switching high → low each step.
    pub p_down: f64,
    /// Probability that a maturing batch is lost.
    pub p_default: f64,
    /// Largest order per step, in units.
    pub max_order: usize,
    /// Cost of one unit.
    pub unit_cost: f64,
    /// Steps from purchase to maturity.
    pub maturity: usize,
    /// Episode length in steps.
    pub horizon: usize,
    /// Liquid wealth at the start of an episode.
    pub initial_liquid: f64,
}

impl Default for PortfolioParams {
    fn default() -> Self {
        let max_order = 10;
        Self {
            r_liquid: 1.005,
            r_illiquid_high: 1.25,
            r_illiquid_low: 1.05,
            p_up: 0.1,
            p_down: 0.6,
            p_default: 0.1,
            max_order,
            unit_cost: 0.2 / max_order as f64,
            maturity: 4,
            horizon: 50,
            initial_liquid: 1.0,
        }
    }
}

impl PortfolioParams {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("p_up", self.p_up),
            ("p_down", self.p_down),
            ("p_default", self.p_default),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Precondition(format!(
                    "{name} must lie in [0, 1], got {p}"
                )));
            }
        }
        if self.unit_cost <= 0.0 || self.initial_liquid <= 0.0 {
            return Err(Error::Precondition(
                "unit cost and initial liquid wealth must be positive".into(),
            ));
        }
        if self.maturity == 0 || self.horizon == 0 {
            return Err(Error::Precondition(
                "maturity and horizon must be at least one step".into(),
            ));
        }
        Ok(())
    }

    /// Observation dimension: liquid, one bucket per remaining step to
    /// maturity, and the rate signal.
    pub fn obs_dim(&self) -> usize {
        self.maturity + 2
    }
}

#[derive(Clone, Copy, Debug)]
struct Batch {
    value: f64,
    remaining: usize,
}

/// Environment state is hidden inside the struct; observations are
/// `[liquid, bucket_1, …, bucket_N, rate - mean(past rates)]` where bucket
/// `k` holds the accrued value maturing in `k` steps.
#[derive(Clone, Debug)]
pub struct PortfolioEnv {
    params: PortfolioParams,
    liquid: f64,
    batches: Vec<Batch>,
    rate_is_high: bool,
    past_rate_sum: f64,
    past_rate_count: usize,
    t: usize,
    clipped_orders: u64,
}

impl PortfolioEnv {
    pub fn new(params: PortfolioParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            liquid: params.initial_liquid,
            batches: Vec::new(),
            rate_is_high: false,
            past_rate_sum: 0.0,
            past_rate_count: 0,
            t: 0,
            clipped_orders: 0,
        })
    }

    pub fn params(&self) -> &PortfolioParams {
        &self.params
    }

    /// How many orders were clipped for affordability so far.
    pub fn clipped_orders(&self) -> u64 {
        self.clipped_orders
    }

    fn current_rate(&self) -> f64 {
        if self.rate_is_high {
            self.params.r_illiquid_high
        } else {
            self.params.r_illiquid_low
        }
    }

    fn observe(&self) -> Vec<f64> {
        let mut obs = vec![0.0; self.params.obs_dim()];
        obs[0] = self.liquid;
        for batch in &self.batches {
            obs[batch.remaining] += batch.value;
        }
        // Mean of past rates defaults to the current rate at t = 0, making
        // the signal start at zero.
        let past_mean = if self.past_rate_count == 0 {
            self.current_rate()
        } else {
            self.past_rate_sum / self.past_rate_count as f64
        };
        obs[self.params.obs_dim() - 1] = self.current_rate() - past_mean;
        obs
    }

    /// Total marked wealth: liquid plus accrued illiquid values.
    pub fn total_wealth(&self) -> f64 {
        self.liquid + self.batches.iter().map(|b| b.value).sum::<f64>()
    }
}

impl Environment for PortfolioEnv {
    type State = Vec<f64>;
    type Action = usize;

    fn reset(&mut self, _rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.liquid = self.params.initial_liquid;
        self.batches.clear();
        self.rate_is_high = false;
        self.past_rate_sum = 0.0;
        self.past_rate_count = 0;
        self.t = 0;
        self.observe()
    }

    fn step(&mut self, action: &usize, rng: &mut ChaCha8Rng) -> Result<Step<Vec<f64>>> {
        if self.t >= self.params.horizon {
            return Err(Error::Environment(
                "portfolio episode already ended; call reset".into(),
            ));
        }
        if *action > self.params.max_order {
            return Err(Error::Precondition(format!(
                "order {action} exceeds the maximum of {}",
                self.params.max_order
            )));
        }
        let p = self.params;
        let liquid_before = self.liquid;

        // Clip to the largest order that leaves the liquid holding positive
        // (a zero holding would make the log-return undefined).
        let mut order = *action;
        while order > 0 && self.liquid - p.unit_cost * order as f64 <= 0.0 {
            order -= 1;
        }
        if order != *action {
            self.clipped_orders += 1;
        }
        let cost = p.unit_cost * order as f64;
        self.liquid -= cost;

        // Accrue live batches at the prevailing rate; any batch finishing its
        // last accrual matures now, defaulting or converting to liquid.
        let rate = self.current_rate();
        let mut matured = Vec::new();
        for batch in &mut self.batches {
            batch.value *= rate;
            batch.remaining -= 1;
            if batch.remaining == 0 {
                matured.push(batch.value);
            }
        }
        self.batches.retain(|b| b.remaining > 0);
        for value in matured {
            if !(rng.gen::<f64>() < p.p_default) {
                self.liquid += value;
            }
        }

        if order > 0 {
            self.batches.push(Batch {
                value: cost,
                remaining: p.maturity,
            });
        }
        self.liquid *= p.r_liquid;

        // Record the rate that prevailed this step, then draw the regime
        // switch for the next one.
        self.past_rate_sum += rate;
        self.past_rate_count += 1;
        let flip = rng.gen::<f64>();
        if self.rate_is_high {
            if flip < p.p_down {
                self.rate_is_high = false;
            }
        } else if flip < p.p_up {
            self.rate_is_high = true;
        }

        self.t += 1;
        Ok(Step {
            state: self.observe(),
            reward: (self.liquid / liquid_before).ln(),
            terminal: self.t >= p.horizon,
        })
    }

    fn action_space(&self, _state: &Vec<f64>) -> ActionSpace<usize> {
        ActionSpace::Discrete((0..=self.params.max_order).collect())
    }
}

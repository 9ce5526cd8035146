//! Product policy with a Gaussian head and a Beta head over a Fourier basis,
//! for the two-component continuous action (investment level, consumed
//! fraction).

use super::Policy;
use crate::error::{Error, Result};
use crate::policies::features::fourier_features;
use ndarray::Array1;
use rand::distributions::Distribution;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Normal};
use statrs::function::gamma::{digamma, ln_gamma};
use std::sync::atomic::{AtomicU64, Ordering};

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `N(μ̂(s), σ̂(s)) × Beta(α̂(s), β̂(s))` with all four heads linear in a
/// fully-coupled Fourier basis of the normalised state.
///
/// Head link functions keep the distribution well-defined for every θ:
/// `σ̂ = softplus(·)` floored at `min_sigma`, and `α̂, β̂ = 1 + softplus(·)`
/// with the softplus floored just above zero so the concentrations stay
/// strictly above 1 (bounded Beta density) even when the preactivation is
/// so negative that softplus underflows. At θ = 0 the heads are
/// `μ̂ = 0, σ̂ = ln 2, α̂ = β̂ = 1 + ln 2`.
///
/// States are `[step index, wealth]`; they are normalised to the unit square
/// as `t / t_max` and `w / w_scale` (clipped, with clips counted) before the
/// Fourier projection.
#[derive(Debug)]
pub struct GaussianBetaPolicy {
    order: u32,
    t_max: f64,
    w_scale: f64,
    min_sigma: f64,
    n_features: usize,
    theta: Array1<f64>,
    clip_events: AtomicU64,
}

impl Clone for GaussianBetaPolicy {
    fn clone(&self) -> Self {
        Self {
            order: self.order,
            t_max: self.t_max,
            w_scale: self.w_scale,
            min_sigma: self.min_sigma,
            n_features: self.n_features,
            theta: self.theta.clone(),
            clip_events: AtomicU64::new(self.clip_events.load(Ordering::Relaxed)),
        }
    }
}

/// The four distribution heads evaluated at one state.
#[derive(Clone, Copy, Debug)]
pub struct Heads {
    pub mu: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl GaussianBetaPolicy {
    pub fn new(order: u32, t_max: f64, w_scale: f64) -> Result<Self> {
        if t_max <= 0.0 || w_scale <= 0.0 {
            return Err(Error::Precondition(
                "state normalisation scales must be positive".into(),
            ));
        }
        let n_features = (order as usize + 1).pow(2);
        Ok(Self {
            order,
            t_max,
            w_scale,
            min_sigma: 1e-3,
            n_features,
            theta: Array1::zeros(4 * n_features),
            clip_events: AtomicU64::new(0),
        })
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// How many state components were clipped into `[0, 1]` so far.
    pub fn clip_events(&self) -> u64 {
        self.clip_events.load(Ordering::Relaxed)
    }

    fn features(&self, state: &[f64; 2]) -> Array1<f64> {
        let t = state[0] / self.t_max;
        let w = state[1] / self.w_scale;
        if !(0.0..=1.0).contains(&t) || !(0.0..=1.0).contains(&w) {
            self.clip_events.fetch_add(1, Ordering::Relaxed);
        }
        fourier_features(&[t.clamp(0.0, 1.0), w.clamp(0.0, 1.0)], self.order)
    }

    fn block(&self, index: usize) -> ndarray::ArrayView1<'_, f64> {
        let n = self.n_features;
        self.theta.slice(ndarray::s![index * n..(index + 1) * n])
    }

    /// Raw head pre-activations `(z_μ, z_σ, z_α, z_β)`.
    fn preactivations(&self, f: &Array1<f64>) -> Result<[f64; 4]> {
        if !self.theta.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite("gaussian-beta policy parameters".into()));
        }
        Ok([
            self.block(0).dot(f),
            self.block(1).dot(f),
            self.block(2).dot(f),
            self.block(3).dot(f),
        ])
    }

    /// Distribution heads at a state.
    pub fn heads(&self, state: &[f64; 2]) -> Result<Heads> {
        let f = self.features(state);
        let [z_mu, z_sigma, z_alpha, z_beta] = self.preactivations(&f)?;
        const MIN_CONCENTRATION: f64 = 1e-6;
        Ok(Heads {
            mu: z_mu,
            sigma: softplus(z_sigma).max(self.min_sigma),
            alpha: 1.0 + softplus(z_alpha).max(MIN_CONCENTRATION),
            beta: 1.0 + softplus(z_beta).max(MIN_CONCENTRATION),
        })
    }
}

impl Policy<[f64; 2], (f64, f64)> for GaussianBetaPolicy {
    fn sample(&self, state: &[f64; 2], rng: &mut ChaCha8Rng) -> Result<(f64, f64)> {
        let h = self.heads(state)?;
        let gauss = Normal::new(h.mu, h.sigma)
            .map_err(|e| Error::NonFinite(format!("gaussian head: {e}")))?;
        let beta = Beta::new(h.alpha, h.beta)
            .map_err(|e| Error::NonFinite(format!("beta head: {e}")))?;
        Ok((gauss.sample(rng), beta.sample(rng)))
    }

    fn log_prob(&self, state: &[f64; 2], action: &(f64, f64)) -> Result<f64> {
        let h = self.heads(state)?;
        let (a1, a2) = *action;
        let a2 = a2.clamp(1e-12, 1.0 - 1e-12);
        let z = (a1 - h.mu) / h.sigma;
        let log_gauss = -0.5 * z * z - h.sigma.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln();
        let log_beta = (h.alpha - 1.0) * a2.ln() + (h.beta - 1.0) * (1.0 - a2).ln()
            - (ln_gamma(h.alpha) + ln_gamma(h.beta) - ln_gamma(h.alpha + h.beta));
        Ok(log_gauss + log_beta)
    }

    fn score(&self, state: &[f64; 2], action: &(f64, f64)) -> Result<Array1<f64>> {
        let f = self.features(state);
        let [_, z_sigma, z_alpha, z_beta] = self.preactivations(&f)?;
        let h = self.heads(state)?;
        let (a1, a2) = *action;
        let a2 = a2.clamp(1e-12, 1.0 - 1e-12);

        let d_mu = (a1 - h.mu) / (h.sigma * h.sigma);
        // Zero gradient while the σ floor is active (the head is flat there).
        let d_sigma = if softplus(z_sigma) > self.min_sigma {
            let dv = (a1 - h.mu) * (a1 - h.mu) / h.sigma.powi(3) - 1.0 / h.sigma;
            dv * sigmoid(z_sigma)
        } else {
            0.0
        };
        let psi_ab = digamma(h.alpha + h.beta);
        let d_alpha = (a2.ln() - digamma(h.alpha) + psi_ab) * sigmoid(z_alpha);
        let d_beta = ((1.0 - a2).ln() - digamma(h.beta) + psi_ab) * sigmoid(z_beta);

        let n = self.n_features;
        let mut score = Array1::zeros(4 * n);
        for (i, &fi) in f.iter().enumerate() {
            score[i] = d_mu * fi;
            score[n + i] = d_sigma * fi;
            score[2 * n + i] = d_alpha * fi;
            score[3 * n + i] = d_beta * fi;
        }
        Ok(score)
    }

    fn baseline_features(&self, state: &[f64; 2]) -> Array1<f64> {
        self.features(state)
    }

    fn n_params(&self) -> usize {
        self.theta.len()
    }

    fn params(&self) -> &Array1<f64> {
        &self.theta
    }

    fn params_mut(&mut self) -> &mut Array1<f64> {
        &mut self.theta
    }
}

//! Isotropic 2-D Gaussian action head `N(μ, σ²I)`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

pub type Action = [f64; 2];

pub fn sample_action<R: Rng + ?Sized>(mu: Action, sigma: f64, rng: &mut R) -> Action {
    let z0: f64 = rng.sample(StandardNormal);
    let z1: f64 = rng.sample(StandardNormal);
    [mu[0] + sigma * z0, mu[1] + sigma * z1]
}

pub fn log_prob(mu: Action, sigma: f64, a: Action) -> f64 {
    let d0 = a[0] - mu[0];
    let d1 = a[1] - mu[1];
    -(d0 * d0 + d1 * d1) / (2.0 * sigma * sigma) - 2.0 * sigma.ln() - (2.0 * PI).ln()
}

/// `∂ log p / ∂μ`.
pub fn log_prob_grad_mu(mu: Action, sigma: f64, a: Action) -> Action {
    let s2 = sigma * sigma;
    [(a[0] - mu[0]) / s2, (a[1] - mu[1]) / s2]
}

/// `KL(N(μ₁, σ₁²I) ‖ N(μ₂, σ₂²I))` in two dimensions.
pub fn kl_diag_gauss(mu1: Action, sigma1: f64, mu2: Action, sigma2: f64) -> f64 {
    let mut kl = 0.0;
    for k in 0..2 {
        let dm = mu1[k] - mu2[k];
        kl += (sigma2 / sigma1).ln() + (sigma1 * sigma1 + dm * dm) / (2.0 * sigma2 * sigma2) - 0.5;
    }
    kl
}

/// Exploration noise: linear from `start` to `end` over `decay_iters`
/// iterations, then held at `end`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_iters: u64,
}

impl Default for SigmaSchedule {
    fn default() -> Self {
        Self {
            start: 0.5,
            end: 0.05,
            decay_iters: 100,
        }
    }
}

impl SigmaSchedule {
    pub fn sigma(&self, iter: u64) -> f64 {
        if iter >= self.decay_iters || self.decay_iters == 0 {
            return self.end;
        }
        let frac = iter as f64 / self.decay_iters as f64;
        self.start + (self.end - self.start) * frac
    }

    /// σ used for evaluation and deployment.
    pub fn eval_sigma(&self) -> f64 {
        self.end
    }
}

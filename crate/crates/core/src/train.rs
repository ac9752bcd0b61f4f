//! The role-playing training loop: collect a batch, estimate advantages,
//! take a trust-region policy step, refit the value network, advance σ.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::checkpoint::Checkpoint;
use crate::episode::{collect_batch, EpisodeBatch, SimConfig};
use crate::error::{Error, Result};
use crate::policy::{PolicyParams, PolicyShape, SigmaSchedule, ValueParams};
use crate::trpo::{compute_gae, fit_value, state_inputs, trpo_update, PolicyBatch, TrpoConfig, UpdateStats, ValueFitStats};
use crate::world::{EnvironmentSpec, TerminationCause};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub sim: SimConfig,
    pub trpo: TrpoConfig,
    pub sigma: SigmaSchedule,
    pub batch_steps: usize,
    pub policy_features: Vec<usize>,
    pub policy_lstm: usize,
    pub value_hidden: Vec<usize>,
    pub value_scale: f64,
    /// Gain of the mean head at initialization.
    pub head_gain: f64,
    pub seed: u64,
    pub workers: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            sim: SimConfig::default(),
            trpo: TrpoConfig::default(),
            sigma: SigmaSchedule::default(),
            batch_steps: 50_000,
            policy_features: vec![256, 64],
            policy_lstm: 64,
            value_hidden: vec![256, 64, 16],
            value_scale: 1e4,
            head_gain: 0.01,
            seed: 0,
            workers: 1,
        }
    }
}

impl TrainConfig {
    pub fn policy_shape(&self) -> PolicyShape {
        PolicyShape::new(self.sim.state_dim(), self.policy_features.clone(), self.policy_lstm)
    }

    fn stream(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        rng
    }

    /// Fresh networks at iteration 0.
    pub fn initial_checkpoint(&self) -> Checkpoint {
        let mut rng = self.stream(0);
        let policy = PolicyParams::init(self.policy_shape(), self.head_gain, &mut rng);
        let value = ValueParams::init(self.sim.state_dim(), self.value_hidden.clone(), self.value_scale, &mut rng);
        Checkpoint {
            iteration: 0,
            sigma: self.sigma,
            policy,
            value,
        }
    }

    /// Seed of the rollout batch for `iteration`, so resumed runs replay the
    /// same random streams as uninterrupted ones.
    pub fn batch_seed(&self, iteration: u64) -> u64 {
        self.stream(iteration + 1).random()
    }
}

/// One line of the metrics log.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationMetrics {
    pub iter: u64,
    pub sigma: f64,
    pub epsilon: f64,
    pub mean_return: f64,
    pub mean_discounted_return: f64,
    pub mean_episode_len: f64,
    pub rate_rg: f64,
    pub rate_hc: f64,
    pub rate_hp: f64,
    pub rate_ho: f64,
    pub rate_lc: f64,
    pub mean_kl: f64,
    pub surrogate_improvement: f64,
}

impl IterationMetrics {
    pub const HEADER: &'static str = "iter,sigma,epsilon,mean_return,mean_discounted_return,mean_episode_len,rate_RG,rate_HC,rate_HP,rate_HO,rate_LC,mean_kl,surrogate_improvement";

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.iter,
            self.sigma,
            self.epsilon,
            self.mean_return,
            self.mean_discounted_return,
            self.mean_episode_len,
            self.rate_rg,
            self.rate_hc,
            self.rate_hp,
            self.rate_ho,
            self.rate_lc,
            self.mean_kl,
            self.surrogate_improvement
        )
    }
}

/// Metrics plus optimizer diagnostics of one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationReport {
    pub metrics: IterationMetrics,
    pub update: UpdateStats,
    pub value_fit: ValueFitStats,
}

/// Fraction of episodes ending in `cause`.
pub fn cause_rate(batch: &EpisodeBatch, cause: TerminationCause) -> f64 {
    if batch.is_empty() {
        return 0.0;
    }
    batch.episodes.iter().filter(|e| e.cause == cause).count() as f64 / batch.len() as f64
}

/// Runs one training iteration in place and reports its metrics.
pub fn train_iteration(envs: &[EnvironmentSpec], state: &mut Checkpoint, cfg: &TrainConfig) -> Result<IterationReport> {
    let iter = state.iteration;
    let sigma = state.sigma.sigma(iter);
    let scaling = cfg.sim.input_scaling();
    let batch = collect_batch(
        envs,
        &state.policy,
        sigma,
        &cfg.sim,
        cfg.batch_steps,
        cfg.batch_seed(iter),
        cfg.workers,
    )?;
    let mut adv = compute_gae(&batch, &state.value, &scaling, &cfg.trpo, cfg.workers);
    if !adv.is_finite() {
        return Err(Error::Numeric(format!("non-finite advantages at iteration {iter}")));
    }
    let returns = adv.flat_returns();
    if cfg.trpo.normalize_advantages {
        adv.normalize();
    }
    let (policy, stats) = {
        let pb = PolicyBatch::new(&state.policy, &batch, &scaling, sigma, &adv, cfg.workers)?;
        trpo_update(&pb, &cfg.trpo)?
    };
    let inputs = state_inputs(&batch, &scaling).concat();
    let (value, value_fit) = fit_value(&state.value, &inputs, &returns, &cfg.trpo, cfg.workers);

    let n = batch.len() as f64;
    let metrics = IterationMetrics {
        iter,
        sigma,
        epsilon: stats.kl_radius,
        mean_return: batch.episodes.iter().map(|e| e.total_reward()).sum::<f64>() / n,
        mean_discounted_return: batch.episodes.iter().map(|e| e.discounted_return(cfg.trpo.gamma)).sum::<f64>() / n,
        mean_episode_len: batch.total_steps as f64 / n,
        rate_rg: cause_rate(&batch, TerminationCause::GoalReached),
        rate_hc: cause_rate(&batch, TerminationCause::HitCompanion),
        rate_hp: cause_rate(&batch, TerminationCause::HitPedestrian),
        rate_ho: cause_rate(&batch, TerminationCause::HitObstacle),
        rate_lc: cause_rate(&batch, TerminationCause::Stray),
        mean_kl: stats.kl,
        surrogate_improvement: stats.improvement(),
    };
    state.policy = policy;
    state.value = value;
    state.iteration += 1;
    Ok(IterationReport {
        metrics,
        update: stats,
        value_fit,
    })
}

/// Runs `iterations` more iterations, calling `after` with the updated state
/// and that iteration's report.
pub fn train_loop<F>(
    envs: &[EnvironmentSpec],
    state: &mut Checkpoint,
    cfg: &TrainConfig,
    iterations: u64,
    mut after: F,
) -> Result<Vec<IterationMetrics>>
where
    F: FnMut(&Checkpoint, &IterationReport) -> Result<()>,
{
    let mut log = Vec::new();
    for _ in 0..iterations {
        let r = train_iteration(envs, state, cfg)?;
        after(state, &r)?;
        log.push(r.metrics);
    }
    Ok(log)
}

//! Partially-observable trust-region update: advantages and returns over true
//! states, constrained value regression, and a natural-gradient policy step
//! whose ratios and recurrent states are evaluated over observations.

use std::borrow::Cow;

use crate::episode::EpisodeBatch;
use crate::error::{Error, Result};
use crate::par;
use crate::policy::{kl_diag_gauss, log_prob, log_prob_grad_mu, Action, InputScaling, PolicyParams, SequenceTrace, ValueParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrpoConfig {
    pub gamma: f64,
    pub lambda: f64,
    /// KL radius is `kl_coeff / σ`.
    pub kl_coeff: f64,
    /// Value-regression displacement bound ε₁.
    pub value_eps: f64,
    pub cg_iters: usize,
    pub cg_damping: f64,
    pub cg_tol: f64,
    pub max_backtracks: usize,
    pub value_passes: usize,
    /// Initial value step, in units of the network's unscaled output.
    pub value_step: f64,
    pub normalize_advantages: bool,
}

impl Default for TrpoConfig {
    fn default() -> Self {
        Self {
            gamma: 0.995,
            lambda: 0.96,
            kl_coeff: 0.01,
            value_eps: 0.1,
            cg_iters: 10,
            cg_damping: 0.1,
            cg_tol: 1e-10,
            max_backtracks: 10,
            value_passes: 5,
            value_step: 1.0,
            normalize_advantages: true,
        }
    }
}

impl TrpoConfig {
    pub fn kl_radius(&self, sigma: f64) -> f64 {
        self.kl_coeff / sigma
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad("lambda must lie in [0, 1]");
        }
        if !(self.kl_coeff > 0.0) || !(self.value_eps > 0.0) {
            return bad("kl_coeff and value_eps must be positive");
        }
        if !(self.cg_damping >= 0.0) || !(self.cg_tol >= 0.0) || !(self.value_step > 0.0) {
            return bad("cg_damping, cg_tol must be non-negative and value_step positive");
        }
        if self.cg_iters == 0 {
            return bad("cg_iters must be at least 1");
        }
        Ok(())
    }
}

/// `Σ_l γ^l r_{i+l}` for every `i`.
pub fn discounted_returns(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for i in (0..rewards.len()).rev() {
        acc = rewards[i] + gamma * acc;
        out[i] = acc;
    }
    out
}

/// GAE by backward recursion. `values` has one more entry than `rewards`:
/// the last is the bootstrap value after the final step.
pub fn gae(rewards: &[f64], values: &[f64], gamma: f64, lambda: f64) -> Vec<f64> {
    assert_eq!(values.len(), rewards.len() + 1);
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for i in (0..rewards.len()).rev() {
        let delta = rewards[i] + gamma * values[i + 1] - values[i];
        acc = delta + gamma * lambda * acc;
        out[i] = acc;
    }
    out
}

/// Per-episode advantages and empirical return targets, aligned with a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct AdvantageSet {
    pub advantages: Vec<Vec<f64>>,
    pub returns: Vec<Vec<f64>>,
}

impl AdvantageSet {
    pub fn steps(&self) -> usize {
        self.advantages.iter().map(Vec::len).sum()
    }

    pub fn flat_returns(&self) -> Vec<f64> {
        self.returns.concat()
    }

    /// Shifts and scales to zero mean and unit variance over the batch.
    /// A constant set becomes all zeros.
    pub fn normalize(&mut self) {
        let n = self.steps() as f64;
        if n == 0.0 {
            return;
        }
        let mean = self.advantages.iter().flatten().sum::<f64>() / n;
        let var = self.advantages.iter().flatten().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        for a in self.advantages.iter_mut().flatten() {
            *a = if std > 1e-12 { (*a - mean) / std } else { 0.0 };
        }
    }

    pub fn is_finite(&self) -> bool {
        self.advantages.iter().chain(&self.returns).flatten().all(|x| x.is_finite())
    }
}

/// Network inputs of every true state `s_0 … s_{T-1}` per episode, flattened.
pub fn state_inputs(batch: &EpisodeBatch, scaling: &InputScaling) -> Vec<Vec<f64>> {
    batch
        .episodes
        .iter()
        .map(|ep| {
            let mut v = Vec::new();
            for t in &ep.transitions {
                scaling.apply_into(&t.state, &mut v);
            }
            v
        })
        .collect()
}

/// Advantages from `V̂` over true states. Terminal episodes end with `V̂ = 0`;
/// truncated ones bootstrap from `V̂(s_T)`.
pub fn compute_gae(
    batch: &EpisodeBatch,
    value: &ValueParams,
    scaling: &InputScaling,
    cfg: &TrpoConfig,
    workers: usize,
) -> AdvantageSet {
    let d = value.input();
    let per_episode = par::map(batch.len(), workers, |k| {
        let ep = &batch.episodes[k];
        let mut x = Vec::with_capacity(d);
        let mut values: Vec<f64> = ep
            .transitions
            .iter()
            .map(|t| {
                x.clear();
                scaling.apply_into(&t.state, &mut x);
                value.forward(&x)
            })
            .collect();
        let bootstrap = if ep.truncated {
            x.clear();
            scaling.apply_into(&ep.final_state, &mut x);
            value.forward(&x)
        } else {
            0.0
        };
        values.push(bootstrap);
        let rewards: Vec<f64> = ep.transitions.iter().map(|t| t.reward).collect();
        (
            gae(&rewards, &values, cfg.gamma, cfg.lambda),
            discounted_returns(&rewards, cfg.gamma),
        )
    });
    let (advantages, returns) = per_episode.into_iter().unzip();
    AdvantageSet { advantages, returns }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOutcome {
    pub iterations: usize,
    /// `‖b − Ax‖ / ‖b‖` as tracked by the recursion.
    pub relative_residual: f64,
}

/// Solves `A x = b` for symmetric positive-definite `A` given as a product.
pub fn conjugate_gradient<F>(mut apply: F, b: &[f64], iters: usize, tol: f64) -> Result<(Vec<f64>, CgOutcome)>
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    let n = b.len();
    let mut x = vec![0.0; n];
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        return Ok((
            x,
            CgOutcome {
                iterations: 0,
                relative_residual: 0.0,
            },
        ));
    }
    let mut r = b.to_vec();
    let mut p = b.to_vec();
    let mut rs = dot(&r, &r);
    let mut done = 0;
    for k in 0..iters {
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if !(pap.is_finite() && pap > 0.0) {
            return Err(Error::Numeric(format!(
                "conjugate gradient: curvature pᵀAp = {pap} at iteration {k}"
            )));
        }
        let alpha = rs / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rs_new = dot(&r, &r);
        done = k + 1;
        if !rs_new.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("conjugate gradient diverged at iteration {k}")));
        }
        if rs_new.sqrt() <= tol * b_norm {
            rs = rs_new;
            break;
        }
        let beta = rs_new / rs;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rs = rs_new;
    }
    Ok((
        x,
        CgOutcome {
            iterations: done,
            relative_residual: rs.sqrt() / b_norm,
        },
    ))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct EpisodeData {
    inputs: Vec<f64>,
    actions: Vec<Action>,
    old_log_prob: Vec<f64>,
    trace: SequenceTrace,
    advantages: Vec<f64>,
}

/// A batch prepared for policy optimization around `θ_old`: observation
/// sequences, sampled actions, advantages and the cached θ_old forward pass.
pub struct PolicyBatch<'a> {
    policy: &'a PolicyParams,
    sigma: f64,
    workers: usize,
    episodes: Vec<EpisodeData>,
    steps: usize,
}

impl<'a> PolicyBatch<'a> {
    pub fn new(
        policy: &'a PolicyParams,
        batch: &EpisodeBatch,
        scaling: &InputScaling,
        sigma: f64,
        advantages: &AdvantageSet,
        workers: usize,
    ) -> Result<Self> {
        if advantages.advantages.len() != batch.len() {
            return Err(Error::Config("advantages do not match the batch".into()));
        }
        let parts = batch
            .episodes
            .iter()
            .zip(&advantages.advantages)
            .map(|(ep, adv)| {
                let mut inputs = Vec::new();
                for t in &ep.transitions {
                    scaling.apply_into(&t.observation, &mut inputs);
                }
                let actions = ep.transitions.iter().map(|t| t.action).collect();
                (inputs, actions, adv.clone())
            })
            .collect();
        Self::from_parts(policy, sigma, parts, workers)
    }

    /// Builds from raw `(inputs T×D, actions, advantages)` per episode.
    pub fn from_parts(
        policy: &'a PolicyParams,
        sigma: f64,
        parts: Vec<(Vec<f64>, Vec<Action>, Vec<f64>)>,
        workers: usize,
    ) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::Config(format!("sigma must be positive, got {sigma}")));
        }
        let d = policy.shape().input;
        for (inputs, actions, adv) in &parts {
            if inputs.len() != actions.len() * d || adv.len() != actions.len() {
                return Err(Error::Config("episode inputs, actions and advantages disagree in length".into()));
            }
        }
        let traces = par::map(parts.len(), workers, |k| policy.forward_sequence(&parts[k].0));
        let episodes: Vec<EpisodeData> = parts
            .into_iter()
            .zip(traces)
            .map(|((inputs, actions, advantages), trace)| {
                let old_log_prob = trace.mu.iter().zip(&actions).map(|(m, a)| log_prob(*m, sigma, *a)).collect();
                EpisodeData {
                    inputs,
                    actions,
                    old_log_prob,
                    trace,
                    advantages,
                }
            })
            .collect();
        let steps = episodes.iter().map(|e| e.actions.len()).sum();
        Ok(Self {
            policy,
            sigma,
            workers,
            episodes,
            steps,
        })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn policy(&self) -> &PolicyParams {
        self.policy
    }

    fn trace<'t>(&'t self, theta: &PolicyParams, k: usize) -> Cow<'t, SequenceTrace> {
        if std::ptr::eq(theta, self.policy) || theta.flat() == self.policy.flat() {
            Cow::Borrowed(&self.episodes[k].trace)
        } else {
            Cow::Owned(theta.forward_sequence(&self.episodes[k].inputs))
        }
    }

    fn ratio(&self, k: usize, t: usize, mu: Action) -> f64 {
        let e = &self.episodes[k];
        let lr = log_prob(mu, self.sigma, e.actions[t]) - e.old_log_prob[t];
        lr.clamp(-20.0, 20.0).exp()
    }

    /// Mean importance-weighted advantage.
    pub fn surrogate(&self, theta: &PolicyParams) -> f64 {
        let total = par::sum(self.episodes.len(), self.workers, |k| {
            let tr = self.trace(theta, k);
            let e = &self.episodes[k];
            tr.mu
                .iter()
                .enumerate()
                .map(|(t, mu)| self.ratio(k, t, *mu) * e.advantages[t])
                .sum()
        });
        total / self.steps as f64
    }

    pub fn surrogate_grad(&self, theta: &PolicyParams) -> Vec<f64> {
        let n = self.steps as f64;
        par::sum_vec(self.episodes.len(), theta.num_params(), self.workers, |k, g| {
            let tr = self.trace(theta, k);
            let e = &self.episodes[k];
            let dmu: Vec<Action> = tr
                .mu
                .iter()
                .enumerate()
                .map(|(t, mu)| {
                    let raw = log_prob(*mu, self.sigma, e.actions[t]) - e.old_log_prob[t];
                    // the clamp is flat outside its range
                    let w = if raw.abs() < 20.0 { raw.exp() * e.advantages[t] / n } else { 0.0 };
                    let gl = log_prob_grad_mu(*mu, self.sigma, e.actions[t]);
                    [w * gl[0], w * gl[1]]
                })
                .collect();
            theta.backward(&tr, &dmu, g);
        })
    }

    /// `Σ log P_θ(a|o)` over the batch.
    pub fn log_prob_sum(&self, theta: &PolicyParams) -> f64 {
        par::sum(self.episodes.len(), self.workers, |k| {
            let tr = self.trace(theta, k);
            let e = &self.episodes[k];
            tr.mu.iter().zip(&e.actions).map(|(m, a)| log_prob(*m, self.sigma, *a)).sum()
        })
    }

    pub fn log_prob_sum_grad(&self, theta: &PolicyParams) -> Vec<f64> {
        par::sum_vec(self.episodes.len(), theta.num_params(), self.workers, |k, g| {
            let tr = self.trace(theta, k);
            let e = &self.episodes[k];
            let dmu: Vec<Action> = tr
                .mu
                .iter()
                .zip(&e.actions)
                .map(|(m, a)| log_prob_grad_mu(*m, self.sigma, *a))
                .collect();
            theta.backward(&tr, &dmu, g);
        })
    }

    /// Mean per-step KL from the θ_old policy to `theta`.
    pub fn mean_kl(&self, theta: &PolicyParams) -> f64 {
        let total = par::sum(self.episodes.len(), self.workers, |k| {
            let tr = self.trace(theta, k);
            let old = &self.episodes[k].trace;
            old.mu
                .iter()
                .zip(&tr.mu)
                .map(|(a, b)| kl_diag_gauss(*a, self.sigma, *b, self.sigma))
                .sum()
        });
        total / self.steps as f64
    }

    pub fn mean_kl_grad(&self, theta: &PolicyParams) -> Vec<f64> {
        let c = 1.0 / (self.sigma * self.sigma * self.steps as f64);
        par::sum_vec(self.episodes.len(), theta.num_params(), self.workers, |k, g| {
            let tr = self.trace(theta, k);
            let old = &self.episodes[k].trace;
            let dmu: Vec<Action> = old
                .mu
                .iter()
                .zip(&tr.mu)
                .map(|(a, b)| [c * (b[0] - a[0]), c * (b[1] - a[1])])
                .collect();
            theta.backward(&tr, &dmu, g);
        })
    }

    /// `(H + damping·I) v` with `H` the Hessian of the mean KL at θ_old.
    pub fn fvp(&self, v: &[f64], damping: f64) -> Vec<f64> {
        let c = 1.0 / (self.sigma * self.sigma * self.steps as f64);
        let mut out = par::sum_vec(self.episodes.len(), v.len(), self.workers, |k, g| {
            let tr = &self.episodes[k].trace;
            let jv = self.policy.jvp(tr, v);
            let dmu: Vec<Action> = jv.iter().map(|j| [c * j[0], c * j[1]]).collect();
            self.policy.backward(tr, &dmu, g);
        });
        for (o, x) in out.iter_mut().zip(v) {
            *o += damping * x;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpdateStats {
    pub accepted: bool,
    pub kl_radius: f64,
    /// Mean KL of the accepted step, 0 when rejected.
    pub kl: f64,
    pub surrogate_before: f64,
    pub surrogate_after: f64,
    pub grad_norm: f64,
    pub cg: Option<CgOutcome>,
    /// Fraction of the full step taken, 0 when rejected.
    pub step_fraction: f64,
}

impl UpdateStats {
    pub fn improvement(&self) -> f64 {
        self.surrogate_after - self.surrogate_before
    }
}

/// One natural-gradient step with KL-bounded backtracking. A rejected step
/// returns an exact copy of θ_old.
pub fn trpo_update(batch: &PolicyBatch<'_>, cfg: &TrpoConfig) -> Result<(PolicyParams, UpdateStats)> {
    let old = batch.policy();
    let eps = cfg.kl_radius(batch.sigma());
    let l_old = batch.surrogate(old);
    let g = batch.surrogate_grad(old);
    let grad_norm = dot(&g, &g).sqrt();
    let mut stats = UpdateStats {
        accepted: false,
        kl_radius: eps,
        kl: 0.0,
        surrogate_before: l_old,
        surrogate_after: l_old,
        grad_norm,
        cg: None,
        step_fraction: 0.0,
    };
    if !grad_norm.is_finite() {
        return Err(Error::Numeric("policy gradient is not finite".into()));
    }
    if grad_norm < 1e-12 {
        return Ok((old.clone(), stats));
    }
    let (dir, cg) = conjugate_gradient(|v| batch.fvp(v, cfg.cg_damping), &g, cfg.cg_iters, cfg.cg_tol)?;
    stats.cg = Some(cg);
    let shs = dot(&dir, &batch.fvp(&dir, cfg.cg_damping));
    if !(shs.is_finite() && shs > 0.0) {
        return Ok((old.clone(), stats));
    }
    let beta = (2.0 * eps / shs).sqrt();
    let mut frac = 1.0;
    for _ in 0..=cfg.max_backtracks {
        let theta: Vec<f64> = old.flat().iter().zip(&dir).map(|(t, d)| t + frac * beta * d).collect();
        let cand = old.with_flat(theta);
        let kl = batch.mean_kl(&cand);
        let l_new = batch.surrogate(&cand);
        if kl.is_finite() && l_new.is_finite() && kl <= eps && l_new > l_old {
            stats.accepted = true;
            stats.kl = kl;
            stats.surrogate_after = l_new;
            stats.step_fraction = frac;
            return Ok((cand, stats));
        }
        frac *= 0.5;
    }
    Ok((old.clone(), stats))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueFitStats {
    pub loss_before: f64,
    pub loss_after: f64,
    pub accepted_passes: usize,
    /// Displacement measure of the final parameters against the old ones.
    pub displacement: f64,
    pub aborted: bool,
}

fn value_outputs(value: &ValueParams, inputs: &[f64], workers: usize) -> Vec<f64> {
    let d = value.input();
    par::map(inputs.len() / d, workers, |i| value.forward(&inputs[i * d..(i + 1) * d]))
}

fn mse(outputs: &[f64], targets: &[f64]) -> f64 {
    outputs.iter().zip(targets).map(|(v, r)| (v - r) * (v - r)).sum::<f64>() / targets.len() as f64
}

/// Gradient descent on the mean squared error to the empirical returns.
/// Each pass halves its step until the loss does not increase and the mean
/// output displacement over `2 J(ζ_old)` stays within `value_eps`.
pub fn fit_value(
    value: &ValueParams,
    inputs: &[f64],
    targets: &[f64],
    cfg: &TrpoConfig,
    workers: usize,
) -> (ValueParams, ValueFitStats) {
    let d = value.input();
    let n = targets.len();
    assert_eq!(inputs.len(), n * d);
    let old_out = value_outputs(value, inputs, workers);
    let j_old = mse(&old_out, targets);
    let mut stats = ValueFitStats {
        loss_before: j_old,
        loss_after: j_old,
        accepted_passes: 0,
        displacement: 0.0,
        aborted: false,
    };
    if n == 0 || j_old == 0.0 {
        return (value.clone(), stats);
    }
    if !j_old.is_finite() {
        stats.aborted = true;
        return (value.clone(), stats);
    }
    let displacement = |out: &[f64]| {
        out.iter().zip(&old_out).map(|(a, b)| (a - b).abs()).sum::<f64>() / n as f64 / (2.0 * j_old)
    };
    let scale2 = value.output_scale() * value.output_scale();
    let mut cur = value.clone();
    let mut j_cur = j_old;
    let mut cur_out = old_out.clone();
    for _ in 0..cfg.value_passes {
        let grad = par::sum_vec(n, cur.num_params(), workers, |i, g| {
            let x = &inputs[i * d..(i + 1) * d];
            let dout = 2.0 * (cur_out[i] - targets[i]) / n as f64;
            cur.backward(x, dout, g);
        });
        if grad.iter().any(|x| !x.is_finite()) {
            stats.aborted = true;
            return (value.clone(), stats);
        }
        if grad.iter().all(|x| *x == 0.0) {
            break;
        }
        let mut step = cfg.value_step / scale2;
        let mut accepted = None;
        for _ in 0..30 {
            let zeta: Vec<f64> = cur.flat().iter().zip(&grad).map(|(z, g)| z - step * g).collect();
            let cand = ValueParams::from_flat(cur.input(), cur.hidden().to_vec(), cur.output_scale(), zeta)
                .expect("same layout");
            let out = value_outputs(&cand, inputs, workers);
            let j = mse(&out, targets);
            if j.is_finite() && j <= j_cur && displacement(&out) <= cfg.value_eps {
                accepted = Some((cand, out, j));
                break;
            }
            step *= 0.5;
        }
        match accepted {
            Some((cand, out, j)) => {
                cur = cand;
                cur_out = out;
                j_cur = j;
                stats.accepted_passes += 1;
            }
            None => break,
        }
    }
    stats.loss_after = j_cur;
    stats.displacement = displacement(&cur_out);
    (cur, stats)
}

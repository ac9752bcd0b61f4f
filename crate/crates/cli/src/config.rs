//! Flat `key = value` run configuration.
//!
//! Every key has a default; files and `--set` overrides may only name known
//! keys. Scene lists are comma-separated manifest paths, resolved against the
//! directory of the file that names them.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use rpl_core::episode::SimConfig;
use rpl_core::policy::SigmaSchedule;
use rpl_core::rvo::RvoConfig;
use rpl_core::train::TrainConfig;
use rpl_core::trpo::TrpoConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub train_scenes: Vec<PathBuf>,
    pub eval_scenes: Vec<PathBuf>,
    pub train: TrainConfig,
    pub rvo: RvoConfig,
    /// When false, a seed is drawn from the OS if none was given.
    pub deterministic: bool,
    pub seed_given: bool,
    /// Target iteration count of `train`.
    pub iterations: u64,
    pub checkpoint_every: u64,
    pub eval_trials: usize,
    /// Net displacement below which `ingest` flags a trajectory as a wanderer.
    pub wanderer_threshold: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            train_scenes: Vec::new(),
            eval_scenes: Vec::new(),
            train: TrainConfig::default(),
            rvo: RvoConfig::default(),
            deterministic: true,
            seed_given: false,
            iterations: 1200,
            checkpoint_every: 10,
            eval_trials: 300,
            wanderer_threshold: 1.0,
        }
    }
}

pub const KEYS: &[&str] = &[
    "train_scenes",
    "eval_scenes",
    "seed",
    "workers",
    "deterministic",
    "iterations",
    "checkpoint_every",
    "eval_trials",
    "wanderer_threshold",
    "batch_steps",
    "max_steps",
    "n_ped",
    "scn_probability",
    "dt",
    "companion_min_gap",
    "synthetic_companion_distance",
    "goal_range",
    "max_translational",
    "max_rotational",
    "ped_fov_min_angle",
    "ped_fov_max_angle",
    "ped_range",
    "obs_fov_min_angle",
    "obs_fov_max_angle",
    "obs_range",
    "noise_ped",
    "noise_com",
    "noise_obs",
    "front_half_width",
    "obstacle_radius",
    "goal_threshold",
    "pedestrian_threshold",
    "companion_threshold",
    "obstacle_threshold",
    "stray_threshold",
    "gamma",
    "lambda",
    "kl_coeff",
    "value_eps",
    "cg_iters",
    "cg_damping",
    "cg_tol",
    "max_backtracks",
    "value_passes",
    "value_step",
    "normalize_advantages",
    "sigma_start",
    "sigma_end",
    "sigma_decay_iters",
    "policy_features",
    "policy_lstm",
    "value_hidden",
    "value_scale",
    "head_gain",
    "rvo_candidates",
    "rvo_time_horizon",
    "rvo_ttc_weight",
    "rvo_robot_radius",
    "rvo_ped_radius",
    "rvo_companion_radius",
    "rvo_heading_gain",
];

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| anyhow!("{key}: cannot parse {v:?}"))
}

fn list(key: &str, v: &str) -> Result<Vec<usize>> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| num(key, s)).collect()
}

fn paths(v: &str, base: &Path) -> Vec<PathBuf> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| base.join(s))
        .collect()
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(", ")
}

impl RunConfig {
    /// Reads a config file on top of the defaults.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text, path)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str, path: &Path) -> Result<()> {
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("{}:{}: expected key = value", path.display(), n + 1))?;
            self.set(k.trim(), v.trim(), base)
                .with_context(|| format!("{}:{}", path.display(), n + 1))?;
        }
        Ok(())
    }

    /// Applies a `key=value` override; relative paths resolve against `base`.
    pub fn set_pair(&mut self, pair: &str, base: &Path) -> Result<()> {
        let (k, v) = pair.split_once('=').ok_or_else(|| anyhow!("override {pair:?} is not key=value"))?;
        self.set(k.trim(), v.trim(), base)
    }

    pub fn set(&mut self, key: &str, v: &str, base: &Path) -> Result<()> {
        let t = &mut self.train;
        let s = &mut t.sim;
        match key {
            "train_scenes" => self.train_scenes = paths(v, base),
            "eval_scenes" => self.eval_scenes = paths(v, base),
            "seed" => {
                t.seed = num(key, v)?;
                self.seed_given = true;
            }
            "workers" => t.workers = num(key, v)?,
            "deterministic" => self.deterministic = num(key, v)?,
            "iterations" => self.iterations = num(key, v)?,
            "checkpoint_every" => self.checkpoint_every = num(key, v)?,
            "eval_trials" => self.eval_trials = num(key, v)?,
            "wanderer_threshold" => self.wanderer_threshold = num(key, v)?,
            "batch_steps" => t.batch_steps = num(key, v)?,
            "max_steps" => s.max_steps = num(key, v)?,
            "n_ped" => s.n_ped = num(key, v)?,
            "scn_probability" => s.scn_probability = num(key, v)?,
            "dt" => s.dt = num(key, v)?,
            "companion_min_gap" => s.companion_min_gap = num(key, v)?,
            "synthetic_companion_distance" => s.synthetic_companion_distance = num(key, v)?,
            "goal_range" => s.goal_range = num(key, v)?,
            "max_translational" => s.limits.max_translational = num(key, v)?,
            "max_rotational" => s.limits.max_rotational = num(key, v)?,
            "ped_fov_min_angle" => s.sensor.ped_fov.min_angle = num(key, v)?,
            "ped_fov_max_angle" => s.sensor.ped_fov.max_angle = num(key, v)?,
            "ped_range" => s.sensor.ped_fov.range = num(key, v)?,
            "obs_fov_min_angle" => s.sensor.obs_fov.min_angle = num(key, v)?,
            "obs_fov_max_angle" => s.sensor.obs_fov.max_angle = num(key, v)?,
            "obs_range" => s.sensor.obs_fov.range = num(key, v)?,
            "noise_ped" => s.sensor.noise_ped = num(key, v)?,
            "noise_com" => s.sensor.noise_com = num(key, v)?,
            "noise_obs" => s.sensor.noise_obs = num(key, v)?,
            "front_half_width" => s.sensor.front_half_width = num(key, v)?,
            "obstacle_radius" => s.sensor.obstacle_radius = num(key, v)?,
            "goal_threshold" => s.thresholds.goal = num(key, v)?,
            "pedestrian_threshold" => s.thresholds.pedestrian = num(key, v)?,
            "companion_threshold" => s.thresholds.companion = num(key, v)?,
            "obstacle_threshold" => s.thresholds.obstacle = num(key, v)?,
            "stray_threshold" => s.thresholds.stray = num(key, v)?,
            "gamma" => t.trpo.gamma = num(key, v)?,
            "lambda" => t.trpo.lambda = num(key, v)?,
            "kl_coeff" => t.trpo.kl_coeff = num(key, v)?,
            "value_eps" => t.trpo.value_eps = num(key, v)?,
            "cg_iters" => t.trpo.cg_iters = num(key, v)?,
            "cg_damping" => t.trpo.cg_damping = num(key, v)?,
            "cg_tol" => t.trpo.cg_tol = num(key, v)?,
            "max_backtracks" => t.trpo.max_backtracks = num(key, v)?,
            "value_passes" => t.trpo.value_passes = num(key, v)?,
            "value_step" => t.trpo.value_step = num(key, v)?,
            "normalize_advantages" => t.trpo.normalize_advantages = num(key, v)?,
            "sigma_start" => t.sigma.start = num(key, v)?,
            "sigma_end" => t.sigma.end = num(key, v)?,
            "sigma_decay_iters" => t.sigma.decay_iters = num(key, v)?,
            "policy_features" => t.policy_features = list(key, v)?,
            "policy_lstm" => t.policy_lstm = num(key, v)?,
            "value_hidden" => t.value_hidden = list(key, v)?,
            "value_scale" => t.value_scale = num(key, v)?,
            "head_gain" => t.head_gain = num(key, v)?,
            "rvo_candidates" => self.rvo.candidates = num(key, v)?,
            "rvo_time_horizon" => self.rvo.time_horizon = num(key, v)?,
            "rvo_ttc_weight" => self.rvo.ttc_weight = num(key, v)?,
            "rvo_robot_radius" => self.rvo.robot_radius = num(key, v)?,
            "rvo_ped_radius" => self.rvo.ped_radius = num(key, v)?,
            "rvo_companion_radius" => self.rvo.companion_radius = num(key, v)?,
            "rvo_heading_gain" => self.rvo.heading_gain = num(key, v)?,
            other => bail!("unknown config key {other:?}"),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.train;
        let s = &t.sim;
        let check = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(anyhow!("invalid config: {msg}")) };
        let pos = |x: f64| x.is_finite() && x > 0.0;
        let nonneg = |x: f64| x.is_finite() && x >= 0.0;
        check(t.workers >= 1 && t.workers <= 1024, "workers must be in 1..=1024")?;
        check(self.checkpoint_every >= 1, "checkpoint_every must be ≥ 1")?;
        check(self.eval_trials >= 1, "eval_trials must be ≥ 1")?;
        check(nonneg(self.wanderer_threshold), "wanderer_threshold must be ≥ 0")?;
        check(t.batch_steps >= 1, "batch_steps must be ≥ 1")?;
        check(s.max_steps >= 1, "max_steps must be ≥ 1")?;
        check(s.n_ped <= 64, "n_ped must be ≤ 64")?;
        check((0.0..=1.0).contains(&s.scn_probability), "scn_probability must be in [0, 1]")?;
        check(pos(s.dt) && s.dt <= 1.0, "dt must be in (0, 1]")?;
        check(nonneg(s.companion_min_gap), "companion_min_gap must be ≥ 0")?;
        check(pos(s.synthetic_companion_distance), "synthetic_companion_distance must be > 0")?;
        check(pos(s.goal_range), "goal_range must be > 0")?;
        check(pos(s.limits.max_translational), "max_translational must be > 0")?;
        check(pos(s.limits.max_rotational), "max_rotational must be > 0")?;
        for (name, f) in [("ped", &s.sensor.ped_fov), ("obs", &s.sensor.obs_fov)] {
            let pi = std::f64::consts::PI;
            check(
                f.min_angle >= -pi && f.max_angle <= pi && f.min_angle < f.max_angle,
                &format!("{name} field of view must satisfy -π ≤ min < max ≤ π"),
            )?;
            check(pos(f.range), &format!("{name}_range must be > 0"))?;
        }
        let sensor = &s.sensor;
        check(
            [sensor.noise_ped, sensor.noise_com, sensor.noise_obs].iter().all(|&x| nonneg(x)),
            "noise coefficients must be ≥ 0",
        )?;
        check(pos(sensor.front_half_width), "front_half_width must be > 0")?;
        check(pos(sensor.obstacle_radius), "obstacle_radius must be > 0")?;
        let th = &s.thresholds;
        check(
            [th.goal, th.pedestrian, th.companion, th.obstacle].iter().all(|&x| nonneg(x)),
            "termination thresholds must be ≥ 0",
        )?;
        check(th.stray > th.companion, "stray_threshold must exceed companion_threshold")?;
        t.trpo.validate()?;
        check(pos(t.sigma.start) && pos(t.sigma.end), "sigma_start and sigma_end must be > 0")?;
        check(
            !t.policy_features.is_empty() && t.policy_features.iter().all(|&w| w >= 1),
            "policy_features needs at least one positive width",
        )?;
        check(t.policy_lstm >= 1, "policy_lstm must be ≥ 1")?;
        check(t.value_hidden.iter().all(|&w| w >= 1), "value_hidden widths must be positive")?;
        check(pos(t.value_scale), "value_scale must be > 0")?;
        check(pos(t.head_gain), "head_gain must be > 0")?;
        check(pos(self.rvo.heading_gain), "rvo_heading_gain must be > 0")?;
        self.rvo.validate()?;
        Ok(())
    }

    pub fn sim(&self) -> &SimConfig {
        &self.train.sim
    }

    pub fn sigma(&self) -> SigmaSchedule {
        self.train.sigma
    }

    pub fn trpo(&self) -> &TrpoConfig {
        &self.train.trpo
    }

    /// Fills in an entropy-drawn seed when allowed and none was given.
    pub fn resolve_seed(&mut self) {
        if !self.deterministic && !self.seed_given {
            self.train.seed = rand::random();
            self.seed_given = true;
        }
    }

    /// Every key with its current value, in [`KEYS`] order.
    pub fn render(&self) -> String {
        let t = &self.train;
        let s = &t.sim;
        let shown = |ps: &[PathBuf]| ps.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", ");
        let values: Vec<String> = vec![
            shown(&self.train_scenes),
            shown(&self.eval_scenes),
            t.seed.to_string(),
            t.workers.to_string(),
            self.deterministic.to_string(),
            self.iterations.to_string(),
            self.checkpoint_every.to_string(),
            self.eval_trials.to_string(),
            self.wanderer_threshold.to_string(),
            t.batch_steps.to_string(),
            s.max_steps.to_string(),
            s.n_ped.to_string(),
            s.scn_probability.to_string(),
            s.dt.to_string(),
            s.companion_min_gap.to_string(),
            s.synthetic_companion_distance.to_string(),
            s.goal_range.to_string(),
            s.limits.max_translational.to_string(),
            s.limits.max_rotational.to_string(),
            s.sensor.ped_fov.min_angle.to_string(),
            s.sensor.ped_fov.max_angle.to_string(),
            s.sensor.ped_fov.range.to_string(),
            s.sensor.obs_fov.min_angle.to_string(),
            s.sensor.obs_fov.max_angle.to_string(),
            s.sensor.obs_fov.range.to_string(),
            s.sensor.noise_ped.to_string(),
            s.sensor.noise_com.to_string(),
            s.sensor.noise_obs.to_string(),
            s.sensor.front_half_width.to_string(),
            s.sensor.obstacle_radius.to_string(),
            s.thresholds.goal.to_string(),
            s.thresholds.pedestrian.to_string(),
            s.thresholds.companion.to_string(),
            s.thresholds.obstacle.to_string(),
            s.thresholds.stray.to_string(),
            t.trpo.gamma.to_string(),
            t.trpo.lambda.to_string(),
            t.trpo.kl_coeff.to_string(),
            t.trpo.value_eps.to_string(),
            t.trpo.cg_iters.to_string(),
            t.trpo.cg_damping.to_string(),
            t.trpo.cg_tol.to_string(),
            t.trpo.max_backtracks.to_string(),
            t.trpo.value_passes.to_string(),
            t.trpo.value_step.to_string(),
            t.trpo.normalize_advantages.to_string(),
            t.sigma.start.to_string(),
            t.sigma.end.to_string(),
            t.sigma.decay_iters.to_string(),
            join(&t.policy_features),
            t.policy_lstm.to_string(),
            join(&t.value_hidden),
            t.value_scale.to_string(),
            t.head_gain.to_string(),
            self.rvo.candidates.to_string(),
            self.rvo.time_horizon.to_string(),
            self.rvo.ttc_weight.to_string(),
            self.rvo.robot_radius.to_string(),
            self.rvo.ped_radius.to_string(),
            self.rvo.companion_radius.to_string(),
            self.rvo.heading_gain.to_string(),
        ];
        debug_assert_eq!(values.len(), KEYS.len());
        KEYS.iter()
            .zip(values)
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

use std::fmt::Write as _;
use std::fs::{File, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use rpl_core::checkpoint::Checkpoint;
use rpl_core::episode::{episode_rng, run_episode, run_many, sample_scenario, Episode, Mode};
use rpl_core::export;
use rpl_core::fsio::write_atomic;
use rpl_core::report::RateReport;
use rpl_core::rvo::rvo_rollout;
use rpl_core::train::{train_iteration, IterationMetrics};
use rpl_core::world::{load_trajectories, EnvironmentSpec, OccupancyGrid, SceneManifest};

use crate::config::RunConfig;

pub const METRICS_FILE: &str = "metrics.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const CONFIG_FILE: &str = "config.txt";
pub const LOCK_FILE: &str = ".lock";

/// Which controller drives the robot.
#[derive(Debug, Clone)]
pub enum Planner {
    Policy(PathBuf),
    Rvo,
}

impl Planner {
    pub fn label(&self) -> &'static str {
        match self {
            Planner::Policy(_) => "policy",
            Planner::Rvo => "rvo",
        }
    }
}

pub struct IngestArgs<'a> {
    pub name: &'a str,
    pub trajectories: &'a Path,
    pub map: &'a Path,
    pub map_meta: &'a Path,
    pub out: &'a Path,
    pub wanderer_threshold: f64,
}

fn manifest_path(p: &Path, manifest_dir: &Path) -> Result<PathBuf> {
    let abs = std::fs::canonicalize(p).with_context(|| format!("resolving {}", p.display()))?;
    let dir = std::fs::canonicalize(manifest_dir).with_context(|| format!("resolving {}", manifest_dir.display()))?;
    Ok(abs.strip_prefix(&dir).map(Path::to_path_buf).unwrap_or(abs))
}

/// Validates a trajectory file against its map and writes a scene manifest.
pub fn ingest(args: &IngestArgs) -> Result<String> {
    let trajectories = load_trajectories(args.trajectories)?;
    let grid = OccupancyGrid::load_pgm(args.map, args.map_meta)?;
    let wanderers: Vec<_> = trajectories
        .iter()
        .filter(|t| t.net_displacement() < args.wanderer_threshold)
        .map(|t| t.id)
        .collect();
    let env = EnvironmentSpec::with_exclusions(args.name, trajectories, grid, &wanderers)?;
    if env.trajectories.is_empty() {
        bail!("{} contains no trajectories", args.trajectories.display());
    }
    let dir = match args.out.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let manifest = SceneManifest {
        name: args.name.to_string(),
        trajectories: manifest_path(args.trajectories, dir)?,
        map: manifest_path(args.map, dir)?,
        map_meta: manifest_path(args.map_meta, dir)?,
        excluded: wanderers.clone(),
    };
    write_atomic(args.out, manifest.render().as_bytes())?;

    let dt = 0.1;
    let durations: Vec<f64> = env.trajectories.iter().map(|t| t.duration_secs(dt)).collect();
    let mean = durations.iter().sum::<f64>() / durations.len() as f64;
    let min = durations.iter().copied().fold(f64::INFINITY, f64::min);
    let max = durations.iter().copied().fold(0.0, f64::max);
    let mut out = String::new();
    writeln!(out, "scene: {}", env.name)?;
    writeln!(out, "trajectories: {}", env.trajectories.len())?;
    writeln!(out, "duration_s: min {min:.1} mean {mean:.1} max {max:.1}")?;
    let ids: Vec<String> = wanderers.iter().map(|i| i.to_string()).collect();
    writeln!(out, "wanderers: {} [{}]", wanderers.len(), ids.join(", "))?;
    writeln!(out, "companion_candidates: {}", env.companion_candidates.len())?;
    writeln!(out, "manifest: {}", args.out.display())?;
    Ok(out)
}

pub fn load_scenes(paths: &[PathBuf]) -> Result<Vec<EnvironmentSpec>> {
    paths
        .iter()
        .map(|p| EnvironmentSpec::load(p).with_context(|| format!("loading scene {}", p.display())))
        .collect()
}

/// Held-out scenes when configured, otherwise the training scenes.
fn eval_scenes(cfg: &RunConfig) -> Result<Vec<EnvironmentSpec>> {
    let list = if cfg.eval_scenes.is_empty() {
        &cfg.train_scenes
    } else {
        &cfg.eval_scenes
    };
    if list.is_empty() {
        bail!("no scenes configured (set train_scenes or eval_scenes)");
    }
    load_scenes(list)
}

/// Exclusive hold on a run directory, released on drop.
struct RunLock(PathBuf);

impl RunLock {
    fn acquire(dir: &Path) -> Result<Self> {
        let path = dir.join(LOCK_FILE);
        let mut f = OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
            .map_err(|e| match e.kind() {
                std::io::ErrorKind::AlreadyExists => {
                    anyhow!("{} is locked by another run (remove {} if stale)", dir.display(), path.display())
                }
                _ => anyhow!("creating {}: {e}", path.display()),
            })?;
        writeln!(f, "{}", std::process::id())?;
        Ok(Self(path))
    }
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.0);
    }
}

/// Keeps the header and the lines of iterations before `upto`, so a resumed
/// log matches an uninterrupted one.
fn trim_metrics(path: &Path, upto: u64) -> Result<()> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == IterationMetrics::HEADER => {}
        _ => bail!("{} is not a metrics log", path.display()),
    }
    let mut kept = format!("{}\n", IterationMetrics::HEADER);
    for line in lines {
        let iter: u64 = line
            .split(',')
            .next()
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| anyhow!("{}: malformed line {line:?}", path.display()))?;
        if iter < upto {
            kept.push_str(line);
            kept.push('\n');
        }
    }
    write_atomic(path, kept.as_bytes())?;
    Ok(())
}

/// Trains into `out_dir` until `cfg.iterations` iterations are complete.
pub fn train(cfg: &RunConfig, out_dir: &Path, resume: bool) -> Result<String> {
    cfg.validate()?;
    if cfg.train_scenes.is_empty() {
        bail!("train_scenes is empty");
    }
    let envs = load_scenes(&cfg.train_scenes)?;
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let _lock = RunLock::acquire(out_dir)?;
    let ckpt_path = out_dir.join(CHECKPOINT_FILE);
    let log_path = out_dir.join(METRICS_FILE);
    let tc = &cfg.train;

    let mut state = if ckpt_path.exists() {
        if !resume {
            bail!("{} already holds a run; pass --resume to continue it", out_dir.display());
        }
        let c = Checkpoint::load(&ckpt_path)?;
        c.validate_shapes(&tc.policy_shape(), &tc.value_hidden)?;
        if c.sigma != tc.sigma {
            bail!("checkpoint σ schedule {:?} differs from the configured one", c.sigma);
        }
        c
    } else {
        tc.initial_checkpoint()
    };
    if log_path.exists() && state.iteration > 0 {
        trim_metrics(&log_path, state.iteration)?;
    } else {
        write_atomic(&log_path, format!("{}\n", IterationMetrics::HEADER).as_bytes())?;
    }
    write_atomic(&out_dir.join(CONFIG_FILE), cfg.render().as_bytes())?;

    let mut log = OpenOptions::new()
        .append(true)
        .open(&log_path)
        .with_context(|| format!("opening {}", log_path.display()))?;
    let start = state.iteration;
    while state.iteration < cfg.iterations {
        let report = match train_iteration(&envs, &mut state, tc) {
            Ok(r) => r,
            Err(e) => {
                state.save(&ckpt_path)?;
                return Err(anyhow!(e).context(format!("iteration {} failed; state saved", state.iteration)));
            }
        };
        writeln!(log, "{}", report.metrics.csv_line())?;
        log.flush()?;
        if state.iteration % cfg.checkpoint_every == 0 {
            state.save(&ckpt_path)?;
        }
    }
    log.sync_all()?;
    state.save(&ckpt_path)?;
    Ok(format!(
        "trained iterations {start}..{} into {}\n",
        state.iteration,
        out_dir.display()
    ))
}

fn load_policy(cfg: &RunConfig, path: &Path) -> Result<Checkpoint> {
    let c = Checkpoint::load(path)?;
    if c.policy.shape().input != cfg.sim().state_dim() {
        bail!(
            "checkpoint expects {} inputs but n_ped = {} gives {}",
            c.policy.shape().input,
            cfg.sim().n_ped,
            cfg.sim().state_dim()
        );
    }
    Ok(c)
}

/// Runs `trials` episodes in `mode` with episode `j` seeded by `(base, j)`.
fn battery(
    cfg: &RunConfig,
    envs: &[EnvironmentSpec],
    planner: &Planner,
    mode: Mode,
    trials: usize,
    base: u64,
) -> Result<Vec<Episode>> {
    let sim = cfg.sim();
    let workers = cfg.train.workers;
    match planner {
        Planner::Policy(path) => {
            let c = load_policy(cfg, path)?;
            let sigma = c.sigma.eval_sigma();
            Ok(run_many(trials, workers, |j| {
                let mut rng = episode_rng(base, j);
                let s = sample_scenario(envs, sim, Some(mode), &mut rng)?;
                run_episode(envs, &s, &c.policy, sigma, sim, &mut rng)
            })?)
        }
        Planner::Rvo => Ok(run_many(trials, workers, |j| {
            let mut rng = episode_rng(base, j);
            let s = sample_scenario(envs, sim, Some(mode), &mut rng)?;
            rvo_rollout(envs, &s, sim, &cfg.rvo, &mut rng)
        })?),
    }
}

fn mode_seed(seed: u64, mode: Mode) -> u64 {
    match mode {
        Mode::Scn => seed,
        Mode::NonScn => seed ^ 0x9e37_79b9_7f4a_7c15,
    }
}

/// Terminal-rate tables, one header and row per mode.
pub fn eval(cfg: &RunConfig, planner: &Planner, modes: &[Mode], trials: usize) -> Result<String> {
    cfg.validate()?;
    if trials == 0 {
        bail!("trials must be ≥ 1");
    }
    let envs = eval_scenes(cfg)?;
    let mut out = String::new();
    for &mode in modes {
        let eps = battery(cfg, &envs, planner, mode, trials, mode_seed(cfg.train.seed, mode))?;
        let r = RateReport::from_episodes(mode, &eps);
        writeln!(out, "{}", r.header())?;
        writeln!(out, "{}", r.row(planner.label()))?;
    }
    Ok(out)
}

/// Writes `episodes` rollouts to `out` in the episode export format.
pub fn rollout(cfg: &RunConfig, planner: &Planner, mode: Option<Mode>, episodes: usize, out: &Path) -> Result<String> {
    cfg.validate()?;
    if episodes == 0 {
        bail!("episodes must be ≥ 1");
    }
    let envs = eval_scenes(cfg)?;
    let eps = match mode {
        Some(m) => battery(cfg, &envs, planner, m, episodes, mode_seed(cfg.train.seed, m))?,
        None => {
            let sim = cfg.sim();
            let c = match planner {
                Planner::Policy(p) => Some(load_policy(cfg, p)?),
                Planner::Rvo => None,
            };
            run_many(episodes, cfg.train.workers, |j| {
                let mut rng = episode_rng(cfg.train.seed, j);
                let s = sample_scenario(&envs, sim, None, &mut rng)?;
                match &c {
                    Some(c) => run_episode(&envs, &s, &c.policy, c.sigma.eval_sigma(), sim, &mut rng),
                    None => rvo_rollout(&envs, &s, sim, &cfg.rvo, &mut rng),
                }
            })?
        }
    };
    let pairs: Vec<(u64, &Episode)> = eps.iter().enumerate().map(|(j, e)| (j as u64, e)).collect();
    write_atomic(out, export::render(&pairs, cfg.sim().n_ped).as_bytes())?;
    let steps: usize = eps.iter().map(|e| e.trace.len()).sum();
    Ok(format!("wrote {} episodes ({steps} rows) to {}\n", eps.len(), out.display()))
}

/// Mean minimum pedestrian distance and mean maximum companion distance.
pub fn metrics(files: &[PathBuf]) -> Result<String> {
    if files.is_empty() {
        bail!("no episode files given");
    }
    let mut all = Vec::new();
    for f in files {
        all.extend(export::load(f)?);
    }
    let m = export::proximity_metrics(&all)?;
    let mut out = String::new();
    writeln!(out, "episodes: {}", m.episodes)?;
    match m.mean_min_pedestrian {
        Some(d) => writeln!(out, "D_ped: {d:.4} ({} episodes with pedestrians)", m.episodes_with_pedestrians)?,
        None => writeln!(out, "D_ped: n/a (no pedestrians)")?,
    }
    writeln!(out, "D_com: {:.4}", m.mean_max_companion)?;
    Ok(out)
}

pub fn inspect_checkpoint(path: &Path) -> Result<String> {
    let mut bytes = Vec::new();
    std::io::Read::read_to_end(
        &mut File::open(path).with_context(|| format!("opening {}", path.display()))?,
        &mut bytes,
    )?;
    let (iteration, sigma, tensors) = Checkpoint::inspect(&bytes)?;
    let mut out = String::new();
    writeln!(out, "iteration: {iteration}")?;
    writeln!(
        out,
        "sigma: start {} end {} decay_iters {} (current {})",
        sigma.start,
        sigma.end,
        sigma.decay_iters,
        sigma.sigma(iteration)
    )?;
    let mut total = 0;
    for t in &tensors {
        let n: usize = t.shape.iter().product();
        total += n;
        let dims: Vec<String> = t.shape.iter().map(|d| d.to_string()).collect();
        writeln!(out, "{} [{}] {n}", t.name, dims.join("x"))?;
    }
    writeln!(out, "parameters: {total}")?;
    Ok(out)
}

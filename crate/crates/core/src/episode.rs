//! Role-playing rollouts: scenario sampling from recorded scenes, the
//! replay simulator, single-episode execution and batch collection.

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geom::{relative_polar, step_pose, Pose2D, Vec2, VelocityCommand, VelocityLimits};
use crate::policy::{log_prob, sample_action, Action, InputScaling, PolicyParams};
use crate::world::{
    check_termination, compute_p_obs, compute_p_ped, observe_com, observe_obs, observe_peds, EnvironmentSpec,
    Observation, PedestrianId, PolarPair, RewardModel, SensorModel, TerminationCause, TerminationThresholds,
    WorldState,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Real companion replayed ahead of the robot.
    Scn,
    /// Synthesized companion at a fixed offset toward the goal.
    NonScn,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Scn => "scn",
            Mode::NonScn => "nonscn",
        }
    }
}

/// Simulation constants shared by every rollout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub limits: VelocityLimits,
    pub sensor: SensorModel,
    pub thresholds: TerminationThresholds,
    pub rewards: RewardModel,
    pub n_ped: usize,
    pub max_steps: usize,
    pub scn_probability: f64,
    /// Minimum initial robot–companion gap in SCN mode.
    pub companion_min_gap: f64,
    /// Range of the synthesized companion in non-SCN mode.
    pub synthetic_companion_distance: f64,
    /// Divisor for the goal distance in network inputs.
    pub goal_range: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.1,
            limits: VelocityLimits::default(),
            sensor: SensorModel::default(),
            thresholds: TerminationThresholds::default(),
            rewards: RewardModel::default(),
            n_ped: 3,
            max_steps: 1000,
            scn_probability: 0.5,
            companion_min_gap: 0.6,
            synthetic_companion_distance: 0.8,
            goal_range: 10.0,
        }
    }
}

impl SimConfig {
    pub fn input_scaling(&self) -> InputScaling {
        InputScaling {
            goal_range: self.goal_range,
            ped_range: self.sensor.ped_fov.range,
            companion_range: self.sensor.ped_fov.range,
            obstacle_range: self.sensor.obs_fov.range,
            limits: self.limits,
        }
    }

    pub fn state_dim(&self) -> usize {
        crate::world::state_dim(self.n_ped)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub env_index: usize,
    /// The played trajectory `k`.
    pub trajectory: PedestrianId,
    pub start: Vec2,
    pub goal: Vec2,
    pub heading: f64,
    pub mode: Mode,
    /// Index into the played trajectory where the companion starts (SCN only).
    pub companion_start: Option<usize>,
    /// Global frame of the robot's first step.
    pub start_frame: i64,
    pub pedestrians: Vec<PedestrianId>,
}

impl Scenario {
    /// Builds the scenario for playing trajectory `k` of `env` in `mode`.
    /// SCN falls back to non-SCN when the track never gets `min_gap` away
    /// from its start.
    pub fn for_trajectory(
        envs: &[EnvironmentSpec],
        env_index: usize,
        trajectory: PedestrianId,
        mode: Mode,
        min_gap: f64,
    ) -> Result<Self> {
        let env = envs
            .get(env_index)
            .ok_or_else(|| Error::Config(format!("no environment #{env_index}")))?;
        let track = env
            .trajectory(trajectory)
            .ok_or_else(|| Error::Config(format!("{} has no trajectory {trajectory}", env.name)))?;
        let start = track.first();
        let goal = track.last();
        let heading = (goal - start).angle();
        let (mode, companion_start) = match mode {
            Mode::Scn => match track.positions.iter().position(|p| p.distance(start) >= min_gap) {
                Some(t0) => (Mode::Scn, Some(t0)),
                None => (Mode::NonScn, None),
            },
            Mode::NonScn => (Mode::NonScn, None),
        };
        let pedestrians = env
            .trajectories
            .iter()
            .map(|t| t.id)
            .filter(|&id| id != trajectory)
            .collect();
        Ok(Self {
            env_index,
            trajectory,
            start,
            goal,
            heading,
            mode,
            companion_start,
            start_frame: track.start_frame,
            pedestrians,
        })
    }

    pub fn initial_pose(&self) -> Pose2D {
        Pose2D::new(self.start.x, self.start.y, self.heading)
    }
}

/// Uniform environment (among those with candidates), uniform candidate
/// trajectory, SCN with `cfg.scn_probability` unless `force_mode` is given.
pub fn sample_scenario<R: Rng + ?Sized>(
    envs: &[EnvironmentSpec],
    cfg: &SimConfig,
    force_mode: Option<Mode>,
    rng: &mut R,
) -> Result<Scenario> {
    let eligible: Vec<usize> = envs
        .iter()
        .enumerate()
        .filter(|(_, e)| !e.companion_candidates.is_empty())
        .map(|(i, _)| i)
        .collect();
    if eligible.is_empty() {
        return Err(Error::Config("no environment has a companion candidate trajectory".into()));
    }
    let env_index = eligible[rng.random_range(0..eligible.len())];
    let candidates = &envs[env_index].companion_candidates;
    let trajectory = candidates[rng.random_range(0..candidates.len())];
    let scn = rng.random_bool(cfg.scn_probability.clamp(0.0, 1.0));
    let mode = force_mode.unwrap_or(if scn { Mode::Scn } else { Mode::NonScn });
    Scenario::for_trajectory(envs, env_index, trajectory, mode, cfg.companion_min_gap)
}

/// Everything the simulator knows about one instant.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub state: WorldState,
    /// World positions behind `state.peds` (dummies included).
    pub ped_positions: Vec<Vec2>,
    /// Real pedestrians present in the scene.
    pub all_peds: Vec<Vec2>,
    pub companion: Vec2,
    pub obstacle_points: Vec<Vec2>,
}

/// Replays a scene around a robot driven by an external controller.
pub struct Simulator<'a> {
    env: &'a EnvironmentSpec,
    scenario: &'a Scenario,
    cfg: &'a SimConfig,
    pose: Pose2D,
    last_cmd: VelocityCommand,
    t: usize,
}

impl<'a> Simulator<'a> {
    pub fn new(envs: &'a [EnvironmentSpec], scenario: &'a Scenario, cfg: &'a SimConfig) -> Self {
        Self {
            env: &envs[scenario.env_index],
            scenario,
            cfg,
            pose: scenario.initial_pose(),
            last_cmd: VelocityCommand::default(),
            t: 0,
        }
    }

    pub fn pose(&self) -> Pose2D {
        self.pose
    }

    pub fn time_step(&self) -> usize {
        self.t
    }

    pub fn environment(&self) -> &EnvironmentSpec {
        self.env
    }

    pub fn companion_active(&self) -> bool {
        self.scenario.mode == Mode::Scn
    }

    fn frame(&self) -> i64 {
        self.scenario.start_frame + self.t as i64
    }

    /// Positions of replayed pedestrians at the current step.
    pub fn pedestrian_positions(&self) -> Vec<Vec2> {
        self.pedestrians().into_iter().map(|(_, p)| p).collect()
    }

    /// Replayed pedestrians present at the current step, with their ids.
    pub fn pedestrians(&self) -> Vec<(PedestrianId, Vec2)> {
        let f = self.frame();
        self.scenario
            .pedestrians
            .iter()
            .filter_map(|id| self.env.trajectory(*id))
            .filter_map(|t| t.at_frame(f).map(|p| (t.id, p)))
            .collect()
    }

    pub fn scenario(&self) -> &Scenario {
        self.scenario
    }

    pub fn config(&self) -> &SimConfig {
        self.cfg
    }

    /// Real companion position (SCN) at the current step.
    pub fn companion_position(&self) -> Option<Vec2> {
        let t0 = self.scenario.companion_start?;
        let track = self.env.trajectory(self.scenario.trajectory)?;
        Some(track.at_index(t0 + self.t))
    }

    pub fn snapshot(&self) -> Snapshot {
        let cfg = self.cfg;
        let pose = &self.pose;
        let (gd, gphi) = relative_polar(pose, self.scenario.goal);
        let all_peds = self.pedestrian_positions();
        let dummy = self.env.occupancy.farthest_corner(pose.position());
        let (peds, ped_positions) = compute_p_ped(pose, &all_peds, cfg.n_ped, dummy);
        let (companion_pair, companion) = match self.companion_position() {
            Some(c) => {
                let (d, phi) = relative_polar(pose, c);
                (PolarPair::new(d, phi), c)
            }
            None => {
                let d = cfg.synthetic_companion_distance;
                let pos = pose.position() + Vec2::from_polar(d, pose.heading + gphi);
                (PolarPair::new(d, gphi), pos)
            }
        };
        let obstacle_points = self
            .env
            .occupancy
            .obstacle_points_near(pose, cfg.sensor.obstacle_radius);
        let obstacles = compute_p_obs(
            pose,
            &obstacle_points,
            cfg.sensor.front_half_width,
            cfg.sensor.obstacle_radius,
        );
        Snapshot {
            state: WorldState {
                goal: PolarPair::new(gd, gphi),
                action: self.last_cmd,
                peds,
                companion: companion_pair,
                obstacles,
            },
            ped_positions,
            all_peds,
            companion,
            obstacle_points,
        }
    }

    /// Sensor view of `snap`. The synthesized companion is observed exactly.
    pub fn observe<R: Rng + ?Sized>(&self, snap: &Snapshot, rng: &mut R) -> Observation {
        let sensor = &self.cfg.sensor;
        let s = &snap.state;
        let companion = if self.companion_active() {
            observe_com(s.companion, sensor, rng)
        } else {
            s.companion
        };
        Observation {
            goal: s.goal,
            action: s.action,
            peds: observe_peds(&s.peds, sensor, rng),
            companion,
            obstacles: observe_obs(&self.pose, &snap.obstacle_points, sensor, rng),
        }
    }

    /// Executes a (clamped) command for one step, advances the replay, and
    /// reports the termination cause of the resulting true state.
    pub fn advance(&mut self, cmd: VelocityCommand) -> (Snapshot, TerminationCause) {
        let cmd = self.cfg.limits.clamp(cmd);
        self.pose = step_pose(self.pose, cmd, self.cfg.dt);
        self.last_cmd = cmd;
        self.t += 1;
        let snap = self.snapshot();
        let cause = check_termination(&snap.state, &self.cfg.thresholds, self.companion_active());
        (snap, cause)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub observation: Observation,
    pub state: WorldState,
    /// Sampled (unclamped) action; the density is evaluated here.
    pub action: Action,
    pub executed: VelocityCommand,
    pub reward: f64,
    pub log_prob: f64,
    pub terminal: bool,
    pub episode_start: bool,
}

/// One row of the per-step export: the pose at step `t`, the command then
/// executed and its reward. The final row holds the terminal pose.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: usize,
    pub pose: Pose2D,
    pub command: VelocityCommand,
    pub reward: f64,
    pub cause: TerminationCause,
    pub companion: Vec2,
    /// Nearest real pedestrians, nearest first, at most `n_ped`.
    pub pedestrians: Vec<Vec2>,
}

impl TraceRow {
    fn new(t: usize, pose: Pose2D, snap: &Snapshot, n_ped: usize) -> Self {
        let mut peds = snap.all_peds.clone();
        peds.sort_by(|a, b| a.distance(pose.position()).total_cmp(&b.distance(pose.position())));
        peds.truncate(n_ped);
        Self {
            t,
            pose,
            command: VelocityCommand::default(),
            reward: 0.0,
            cause: TerminationCause::None,
            companion: snap.companion,
            pedestrians: peds,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Episode {
    pub scenario: Scenario,
    pub transitions: Vec<Transition>,
    pub cause: TerminationCause,
    /// Stopped by the step cap rather than a world event.
    pub truncated: bool,
    /// State after the last transition (`s_T`), used to bootstrap truncated episodes.
    pub final_state: WorldState,
    pub trace: Vec<TraceRow>,
}

impl Episode {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn total_reward(&self) -> f64 {
        self.transitions.iter().map(|t| t.reward).sum()
    }

    pub fn discounted_return(&self, gamma: f64) -> f64 {
        self.transitions.iter().rev().fold(0.0, |acc, t| t.reward + gamma * acc)
    }
}

/// Runs the policy from the scenario start until termination or `max_steps`.
pub fn run_episode<R: Rng + ?Sized>(
    envs: &[EnvironmentSpec],
    scenario: &Scenario,
    policy: &PolicyParams,
    sigma: f64,
    cfg: &SimConfig,
    rng: &mut R,
) -> Result<Episode> {
    if !policy.is_finite() {
        return Err(Error::Numeric("policy parameters are not finite".into()));
    }
    let scaling = cfg.input_scaling();
    let mut rec = policy.initial_state();
    let mut input = Vec::with_capacity(cfg.state_dim());
    drive(envs, scenario, cfg, rng, |_, _, obs, rng| {
        input.clear();
        scaling.apply_into(obs, &mut input);
        let mu = policy.step_unchecked(&input, &mut rec);
        let action = sample_action(mu, sigma, rng);
        (action, log_prob(mu, sigma, action))
    })
}

/// Steps the simulator with `control(sim, truth, observation, rng) -> (action,
/// log-prob)` until termination or the step cap.
pub fn drive<R, C>(envs: &[EnvironmentSpec], scenario: &Scenario, cfg: &SimConfig, rng: &mut R, mut control: C) -> Result<Episode>
where
    R: Rng + ?Sized,
    C: FnMut(&Simulator<'_>, &Snapshot, &Observation, &mut R) -> (Action, f64),
{
    if cfg.max_steps == 0 {
        return Err(Error::Config("max_steps must be at least 1".into()));
    }
    let mut sim = Simulator::new(envs, scenario, cfg);
    let mut snap = sim.snapshot();
    let mut transitions = Vec::new();
    let mut trace = Vec::new();
    loop {
        let obs = sim.observe(&snap, rng);
        let (action, lp) = control(&sim, &snap, &obs, rng);
        let executed = cfg.limits.clamp(VelocityCommand::new(action[0], action[1]));
        let mut row = TraceRow::new(sim.time_step(), sim.pose(), &snap, cfg.n_ped);
        let (next, cause) = sim.advance(executed);
        let reward = cfg.rewards.reward(cause, executed.v_r);
        row.command = executed;
        row.reward = reward;
        trace.push(row);
        transitions.push(Transition {
            observation: obs,
            state: std::mem::replace(&mut snap, next).state,
            action,
            executed,
            reward,
            log_prob: lp,
            terminal: cause.is_terminal(),
            episode_start: transitions.is_empty(),
        });
        let capped = transitions.len() >= cfg.max_steps;
        if cause.is_terminal() || capped {
            let mut last = TraceRow::new(sim.time_step(), sim.pose(), &snap, cfg.n_ped);
            last.cause = cause;
            trace.push(last);
            return Ok(Episode {
                scenario: scenario.clone(),
                transitions,
                cause,
                truncated: !cause.is_terminal(),
                final_state: snap.state,
                trace,
            });
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct EpisodeBatch {
    pub episodes: Vec<Episode>,
    pub total_steps: usize,
}

impl EpisodeBatch {
    pub fn from_episodes(episodes: Vec<Episode>) -> Self {
        let total_steps = episodes.iter().map(Episode::len).sum();
        Self { episodes, total_steps }
    }

    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }
}

/// Random stream for episode `index` of a batch seeded with `base`.
pub fn episode_rng(base: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(index as u64);
    rng
}

/// Collects whole episodes until at least `batch_steps` transitions exist.
///
/// Episode `j` draws its scenario and noise from `episode_rng(seed, j)`, and
/// the batch is the shortest prefix of episodes `0, 1, …` reaching the step
/// budget, so the result does not depend on `workers`.
pub fn collect_batch(
    envs: &[EnvironmentSpec],
    policy: &PolicyParams,
    sigma: f64,
    cfg: &SimConfig,
    batch_steps: usize,
    seed: u64,
    workers: usize,
) -> Result<EpisodeBatch> {
    collect_with(batch_steps, workers, |j| {
        let mut rng = episode_rng(seed, j);
        let scenario = sample_scenario(envs, cfg, None, &mut rng)?;
        run_episode(envs, &scenario, policy, sigma, cfg, &mut rng)
    })
}

/// Runs episodes `0..n` (e.g. an evaluation battery), results in index order.
pub fn run_many<F>(n: usize, workers: usize, run: F) -> Result<Vec<Episode>>
where
    F: Fn(usize) -> Result<Episode> + Sync,
{
    crate::par::map(n, workers, run).into_iter().collect()
}

pub(crate) fn collect_with<F>(batch_steps: usize, workers: usize, run: F) -> Result<EpisodeBatch>
where
    F: Fn(usize) -> Result<Episode> + Sync,
{
    if batch_steps == 0 {
        return Err(Error::Config("batch size must be at least 1 step".into()));
    }
    let workers = workers.max(1);
    let mut done: Vec<(usize, Episode)> = if workers == 1 {
        let mut v = Vec::new();
        let mut steps = 0;
        while steps < batch_steps {
            let ep = run(v.len())?;
            steps += ep.len();
            v.push((v.len(), ep));
        }
        v
    } else {
        let next = AtomicUsize::new(0);
        let steps = AtomicUsize::new(0);
        let stop = AtomicBool::new(false);
        let out = Mutex::new(Vec::new());
        let first_err: Mutex<Option<Error>> = Mutex::new(None);
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| {
                    while !stop.load(Ordering::SeqCst) {
                        let j = next.fetch_add(1, Ordering::SeqCst);
                        match run(j) {
                            Ok(ep) => {
                                let n = ep.len();
                                out.lock().unwrap().push((j, ep));
                                if steps.fetch_add(n, Ordering::SeqCst) + n >= batch_steps {
                                    stop.store(true, Ordering::SeqCst);
                                }
                            }
                            Err(e) => {
                                first_err.lock().unwrap().get_or_insert(e);
                                stop.store(true, Ordering::SeqCst);
                            }
                        }
                    }
                });
            }
        });
        if let Some(e) = first_err.into_inner().unwrap() {
            return Err(e);
        }
        out.into_inner().unwrap()
    };
    done.sort_by_key(|(j, _)| *j);
    let mut episodes = Vec::new();
    let mut total = 0;
    for (_, ep) in done {
        if total >= batch_steps {
            break;
        }
        total += ep.len();
        episodes.push(ep);
    }
    Ok(EpisodeBatch {
        episodes,
        total_steps: total,
    })
}

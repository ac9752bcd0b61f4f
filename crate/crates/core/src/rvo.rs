//! Sampling-based reciprocal velocity obstacle planner and the baseline
//! rollout that drives the robot with it through a replayed scene.

use std::collections::HashMap;
use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::episode::{drive, Episode, Scenario, SimConfig, Simulator};
use crate::error::{Error, Result};
use crate::geom::{wrap_angle, Pose2D, Vec2, VelocityCommand, VelocityLimits};
use crate::world::{EnvironmentSpec, PedestrianId};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentDisk {
    pub position: Vec2,
    pub velocity: Vec2,
    pub radius: f64,
    pub pref_speed: f64,
    pub goal: Vec2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RvoConfig {
    /// Candidate count, split evenly between a spiral and its mirror image.
    pub candidates: usize,
    /// Collisions further ahead than this are ignored.
    pub time_horizon: f64,
    /// Weight `w` of the `w / ttc` term.
    pub ttc_weight: f64,
    pub robot_radius: f64,
    pub ped_radius: f64,
    pub companion_radius: f64,
    /// Turn-rate gain `k` of the unicycle projection.
    pub heading_gain: f64,
}

impl Default for RvoConfig {
    fn default() -> Self {
        Self {
            candidates: 200,
            time_horizon: 5.0,
            ttc_weight: 1.0,
            robot_radius: 0.25,
            ped_radius: 0.25,
            companion_radius: 0.25,
            heading_gain: 2.0,
        }
    }
}

impl RvoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.candidates < 2 || !(self.time_horizon > 0.0) || !(self.ttc_weight >= 0.0) {
            return Err(Error::Config(
                "rvo needs at least 2 candidates, a positive horizon and a non-negative ttc weight".into(),
            ));
        }
        if !(self.robot_radius > 0.0 && self.ped_radius > 0.0 && self.companion_radius > 0.0) {
            return Err(Error::Config("rvo radii must be positive".into()));
        }
        Ok(())
    }
}

/// Velocity toward the goal at preferred speed, slowed so one step of `dt`
/// does not overshoot.
pub fn preferred_velocity(agent: &AgentDisk, dt: f64) -> Vec2 {
    let to_goal = agent.goal - agent.position;
    let dist = to_goal.norm();
    if dist == 0.0 {
        return Vec2::ZERO;
    }
    let speed = agent.pref_speed.min(dist / dt);
    to_goal * (speed / dist)
}

/// Candidates in the frame whose x axis is the unit vector `u`: a
/// golden-angle spiral filling the disk of radius `max_speed`, each point
/// followed by its reflection across that axis.
fn candidates(u: Vec2, max_speed: f64, n: usize) -> Vec<Vec2> {
    let half = n / 2;
    let golden = PI * (3.0 - 5f64.sqrt());
    let mut out = Vec::with_capacity(2 * half);
    for k in 0..half {
        let r = max_speed * ((k as f64 + 0.5) / half as f64).sqrt();
        let (s, c) = (k as f64 * golden).sin_cos();
        let (lx, ly) = (r * c, r * s);
        out.push(Vec2::new(lx * u.x - ly * u.y, lx * u.y + ly * u.x));
        out.push(Vec2::new(lx * u.x + ly * u.y, lx * u.y - ly * u.x));
    }
    out
}

/// Earliest `t ≥ 0` at which a disk moving with `rel_vel` from offset `p`
/// (other minus self) comes within `radius`; `∞` if never. Disks that
/// already overlap score 0 unless `rel_vel` separates them.
pub fn time_to_collision(p: Vec2, rel_vel: Vec2, radius: f64) -> f64 {
    let c = p.norm_sq() - radius * radius;
    if c <= 0.0 {
        return if p.dot(rel_vel) < 0.0 { f64::INFINITY } else { 0.0 };
    }
    let a = rel_vel.norm_sq();
    let b = p.dot(rel_vel);
    if a == 0.0 || b <= 0.0 {
        return f64::INFINITY;
    }
    let disc = b * b - a * c;
    if disc < 0.0 {
        return f64::INFINITY;
    }
    (b - disc.sqrt()) / a
}

/// Selects the next velocity for `me` among `others` and static `obstacles`.
pub fn rvo_step(me: &AgentDisk, others: &[AgentDisk], obstacles: &[Vec2], max_speed: f64, dt: f64, cfg: &RvoConfig) -> Vec2 {
    let pref = preferred_velocity(me, dt);
    let to_goal = me.goal - me.position;
    let u = if to_goal.norm() > 0.0 {
        to_goal * (1.0 / to_goal.norm())
    } else {
        Vec2::new(1.0, 0.0)
    };
    let mut cands = vec![pref];
    cands.extend(candidates(u, max_speed, cfg.candidates));
    cands.push(Vec2::ZERO);

    let ttc_of = |c: Vec2| {
        let mut ttc = f64::INFINITY;
        for o in others {
            let rel = c * 2.0 - me.velocity - o.velocity;
            ttc = ttc.min(time_to_collision(o.position - me.position, rel, me.radius + o.radius));
        }
        for &q in obstacles {
            ttc = ttc.min(time_to_collision(q - me.position, c, me.radius));
        }
        if ttc > cfg.time_horizon {
            f64::INFINITY
        } else {
            ttc
        }
    };
    let scored: Vec<(Vec2, f64, f64)> = cands
        .into_iter()
        .map(|c| {
            let ttc = ttc_of(c);
            let penalty = cfg.ttc_weight / ttc + (c - pref).norm();
            (c, ttc, penalty)
        })
        .collect();
    let any_free = scored.iter().any(|s| s.1.is_infinite());
    let mut best = scored[0];
    for &s in &scored[1..] {
        let better = if any_free {
            s.2 < best.2
        } else {
            s.1 > best.1 || (s.1 == best.1 && s.2 < best.2)
        };
        if better {
            best = s;
        }
    }
    best.0
}

/// Converts a planar velocity into synchro-drive commands.
pub fn unicycle_projection(heading: f64, v: Vec2, limits: &VelocityLimits, gain: f64) -> VelocityCommand {
    let speed = v.norm();
    if speed == 0.0 {
        return VelocityCommand::default();
    }
    let delta = wrap_angle(v.angle() - heading).unwrap_or(0.0);
    limits.clamp(VelocityCommand::new(
        (speed * delta.cos()).clamp(0.0, limits.max_translational),
        gain * delta,
    ))
}

const COMPANION_KEY: Option<PedestrianId> = None;

/// Noisy position of `p` as ranged from `pose`: additive range noise with
/// standard deviation `coeff · d` along the bearing.
fn noisy<R: Rng + ?Sized>(pose: &Pose2D, p: Vec2, coeff: f64, rng: &mut R) -> Vec2 {
    let off = p - pose.position();
    let d = off.norm();
    if coeff == 0.0 || d == 0.0 {
        return p;
    }
    let z: f64 = rng.sample(StandardNormal);
    let nd = (d + coeff * d * z).max(0.0);
    pose.position() + off * (nd / d)
}

/// Drives the robot with [`rvo_step`]. The companion (SCN only) and every
/// present pedestrian are agents with noisy positions and finite-difference
/// velocities; obstacles within the sensing radius are known exactly.
pub fn rvo_rollout<R: Rng + ?Sized>(
    envs: &[EnvironmentSpec],
    scenario: &Scenario,
    sim_cfg: &SimConfig,
    cfg: &RvoConfig,
    rng: &mut R,
) -> Result<Episode> {
    let mut prev: HashMap<Option<PedestrianId>, Vec2> = HashMap::new();
    let dt = sim_cfg.dt;
    drive(envs, scenario, sim_cfg, rng, |sim: &Simulator<'_>, snap, _, rng| {
        let pose = sim.pose();
        let sensor = &sim_cfg.sensor;
        let mut seen: Vec<(Option<PedestrianId>, Vec2, f64)> = Vec::new();
        if sim.companion_active() {
            seen.push((COMPANION_KEY, noisy(&pose, snap.companion, sensor.noise_com, rng), cfg.companion_radius));
        }
        for (id, p) in sim.pedestrians() {
            seen.push((Some(id), noisy(&pose, p, sensor.noise_ped, rng), cfg.ped_radius));
        }
        let mut others = Vec::with_capacity(seen.len());
        let mut now = HashMap::with_capacity(seen.len());
        for (key, p, radius) in seen {
            let velocity = prev.get(&key).map(|q| (p - *q) * (1.0 / dt)).unwrap_or(Vec2::ZERO);
            now.insert(key, p);
            others.push(AgentDisk {
                position: p,
                velocity,
                radius,
                pref_speed: 0.0,
                goal: p,
            });
        }
        prev = now;
        let last = snap.state.action;
        let me = AgentDisk {
            position: pose.position(),
            velocity: Vec2::from_polar(last.v_t, pose.heading),
            radius: cfg.robot_radius,
            pref_speed: sim_cfg.limits.max_translational,
            goal: sim.scenario().goal,
        };
        let v = rvo_step(&me, &others, &snap.obstacle_points, sim_cfg.limits.max_translational, dt, cfg);
        let cmd = unicycle_projection(pose.heading, v, &sim_cfg.limits, cfg.heading_gain);
        ([cmd.v_t, cmd.v_r], 0.0)
    })
}

//! Ground-truth state, sensor-limited observation, termination and reward.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::geom::{relative_polar, Pose2D, Vec2, VelocityCommand};

/// Distance/bearing of a target relative to the robot.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PolarPair {
    pub d: f64,
    pub phi: f64,
}

impl PolarPair {
    pub const fn new(d: f64, phi: f64) -> Self {
        Self { d, phi }
    }
}

/// The nine obstacle features: front distance, then nearest-left,
/// nearest-right, farthest-left, farthest-right `(d, φ)` pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObstacleFeatures {
    pub front: f64,
    pub left_near: PolarPair,
    pub right_near: PolarPair,
    pub left_far: PolarPair,
    pub right_far: PolarPair,
}

impl ObstacleFeatures {
    /// Nothing sensed: every distance at `range`, side bearings at ±π/2.
    pub fn empty(range: f64) -> Self {
        let left = PolarPair::new(range, FRAC_PI_2);
        let right = PolarPair::new(range, -FRAC_PI_2);
        Self {
            front: range,
            left_near: left,
            right_near: right,
            left_far: left,
            right_far: right,
        }
    }

    pub fn to_array(&self) -> [f64; 9] {
        [
            self.front,
            self.left_near.d,
            self.left_near.phi,
            self.right_near.d,
            self.right_near.phi,
            self.left_far.d,
            self.left_far.phi,
            self.right_far.d,
            self.right_far.phi,
        ]
    }

    /// Smallest of the front and nearest-side distances (collision check).
    pub fn min_near(&self) -> f64 {
        self.front.min(self.left_near.d).min(self.right_near.d)
    }
}

/// `s = [d_g, φ_g, a, p_ped, p_com, p_obs]`. Observations share the layout.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub goal: PolarPair,
    pub action: VelocityCommand,
    /// Nearest-first.
    pub peds: Vec<PolarPair>,
    pub companion: PolarPair,
    pub obstacles: ObstacleFeatures,
}

/// Observation vector `o`; same layout as [`WorldState`] with sensed entries.
pub type Observation = WorldState;

pub const fn state_dim(n_ped: usize) -> usize {
    2 + 2 + 2 * n_ped + 2 + 9
}

impl WorldState {
    pub fn dim(&self) -> usize {
        state_dim(self.peds.len())
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim());
        v.extend([self.goal.d, self.goal.phi, self.action.v_t, self.action.v_r]);
        for p in &self.peds {
            v.extend([p.d, p.phi]);
        }
        v.extend([self.companion.d, self.companion.phi]);
        v.extend(self.obstacles.to_array());
        v
    }

    pub fn min_ped_distance(&self) -> f64 {
        self.peds.iter().map(|p| p.d).fold(f64::INFINITY, f64::min)
    }
}

/// Angular sector `[min_angle, max_angle]` out to `range`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldOfView {
    pub max_angle: f64,
    pub min_angle: f64,
    pub range: f64,
}

impl FieldOfView {
    pub fn contains(&self, p: PolarPair) -> bool {
        p.phi >= self.min_angle && p.phi <= self.max_angle && p.d <= self.range
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorModel {
    pub ped_fov: FieldOfView,
    pub obs_fov: FieldOfView,
    /// Relative range-noise coefficients: σ = c·d.
    pub noise_ped: f64,
    pub noise_com: f64,
    pub noise_obs: f64,
    /// Half-width of the front sector (ε_ρ).
    pub front_half_width: f64,
    /// Obstacles beyond this radius are ignored (d̄_obs).
    pub obstacle_radius: f64,
}

impl Default for SensorModel {
    fn default() -> Self {
        let fov = FieldOfView {
            max_angle: 2.0 * PI / 3.0,
            min_angle: -2.0 * PI / 3.0,
            range: 4.0,
        };
        Self {
            ped_fov: fov,
            obs_fov: fov,
            noise_ped: 0.01,
            noise_com: 0.01,
            noise_obs: 0.01,
            front_half_width: 0.1,
            obstacle_radius: 4.0,
        }
    }
}

impl SensorModel {
    pub fn noiseless(mut self) -> Self {
        self.noise_ped = 0.0;
        self.noise_com = 0.0;
        self.noise_obs = 0.0;
        self
    }
}

/// Nearest/farthest obstacle features over an already-filtered point set.
/// Empty sectors report `range` (front and sides) and ±π/2 (sides).
pub fn compute_p_obs(pose: &Pose2D, points: &[Vec2], front_half_width: f64, range: f64) -> ObstacleFeatures {
    SectorHits::scan(points.iter().map(|p| relative_polar(pose, *p)), front_half_width).finish(range)
}

#[derive(Default)]
struct SectorHits {
    front: Option<f64>,
    left_near: Option<PolarPair>,
    left_far: Option<PolarPair>,
    right_near: Option<PolarPair>,
    right_far: Option<PolarPair>,
}

impl SectorHits {
    fn scan(polar: impl Iterator<Item = (f64, f64)>, eps: f64) -> Self {
        let mut h = SectorHits::default();
        for (d, phi) in polar {
            let p = PolarPair::new(d, phi);
            if phi.abs() <= eps {
                if h.front.is_none_or(|f| d < f) {
                    h.front = Some(d);
                }
                continue;
            }
            let (near, far) = if phi > eps {
                (&mut h.left_near, &mut h.left_far)
            } else {
                (&mut h.right_near, &mut h.right_far)
            };
            if near.is_none_or(|n| d < n.d) {
                *near = Some(p);
            }
            if far.is_none_or(|f| d > f.d) {
                *far = Some(p);
            }
        }
        h
    }

    fn perturb(&mut self, mut noise: impl FnMut(f64) -> f64) {
        if let Some(f) = self.front.as_mut() {
            *f = noise(*f);
        }
        for p in [
            &mut self.left_near,
            &mut self.right_near,
            &mut self.left_far,
            &mut self.right_far,
        ]
        .into_iter()
        .flatten()
        {
            p.d = noise(p.d);
        }
    }

    fn finish(self, range: f64) -> ObstacleFeatures {
        let empty = ObstacleFeatures::empty(range);
        ObstacleFeatures {
            front: self.front.unwrap_or(empty.front),
            left_near: self.left_near.unwrap_or(empty.left_near),
            right_near: self.right_near.unwrap_or(empty.right_near),
            left_far: self.left_far.unwrap_or(empty.left_far),
            right_far: self.right_far.unwrap_or(empty.right_far),
        }
    }
}

/// The `n_ped` nearest pedestrians, nearest first, padded with dummies at
/// `dummy`. Returns the polar entries and the world positions they came from.
pub fn compute_p_ped(
    pose: &Pose2D,
    pedestrians: &[Vec2],
    n_ped: usize,
    dummy: Vec2,
) -> (Vec<PolarPair>, Vec<Vec2>) {
    let mut all: Vec<(PolarPair, Vec2)> = pedestrians
        .iter()
        .map(|&p| {
            let (d, phi) = relative_polar(pose, p);
            (PolarPair::new(d, phi), p)
        })
        .collect();
    all.sort_by(|a, b| a.0.d.total_cmp(&b.0.d));
    all.truncate(n_ped);
    if all.len() < n_ped {
        let (d, phi) = relative_polar(pose, dummy);
        all.resize(n_ped, (PolarPair::new(d, phi), dummy));
    }
    all.into_iter().unzip()
}

fn noisy_distance<R: Rng + ?Sized>(d: f64, coeff: f64, rng: &mut R) -> f64 {
    if coeff == 0.0 {
        return d;
    }
    let z: f64 = rng.sample(StandardNormal);
    (d + coeff * d * z).max(0.0)
}

/// Pedestrians inside the FoV get range noise; the rest are masked to `(d⁺, π)`.
pub fn observe_peds<R: Rng + ?Sized>(truth: &[PolarPair], sensor: &SensorModel, rng: &mut R) -> Vec<PolarPair> {
    truth
        .iter()
        .map(|&p| {
            if sensor.ped_fov.contains(p) {
                PolarPair::new(noisy_distance(p.d, sensor.noise_ped, rng), p.phi)
            } else {
                PolarPair::new(sensor.ped_fov.range, PI)
            }
        })
        .collect()
}

/// Obstacle features restricted to the obstacle FoV, with range noise on every
/// selected distance. Empty sectors fall back to the FoV range, noiseless.
pub fn observe_obs<R: Rng + ?Sized>(
    pose: &Pose2D,
    points: &[Vec2],
    sensor: &SensorModel,
    rng: &mut R,
) -> ObstacleFeatures {
    let fov = sensor.obs_fov;
    let visible = points
        .iter()
        .map(|p| relative_polar(pose, *p))
        .filter(|&(d, phi)| d <= sensor.obstacle_radius && fov.contains(PolarPair::new(d, phi)));
    let mut hits = SectorHits::scan(visible, sensor.front_half_width);
    hits.perturb(|d| noisy_distance(d, sensor.noise_obs, rng));
    hits.finish(fov.range)
}

/// Companion is always observable; only its range is noisy.
pub fn observe_com<R: Rng + ?Sized>(truth: PolarPair, sensor: &SensorModel, rng: &mut R) -> PolarPair {
    PolarPair::new(noisy_distance(truth.d, sensor.noise_com, rng), truth.phi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TerminationCause {
    None,
    GoalReached,
    HitPedestrian,
    HitCompanion,
    HitObstacle,
    Stray,
}

impl TerminationCause {
    pub const ALL: [TerminationCause; 6] = [
        TerminationCause::None,
        TerminationCause::GoalReached,
        TerminationCause::HitPedestrian,
        TerminationCause::HitCompanion,
        TerminationCause::HitObstacle,
        TerminationCause::Stray,
    ];

    pub fn is_terminal(self) -> bool {
        self != TerminationCause::None
    }

    pub fn is_failure(self) -> bool {
        !matches!(self, TerminationCause::None | TerminationCause::GoalReached)
    }

    /// Short report code (RG, HP, HC, HO, LC; TO for an unterminated run).
    pub fn code(self) -> &'static str {
        match self {
            TerminationCause::None => "TO",
            TerminationCause::GoalReached => "RG",
            TerminationCause::HitPedestrian => "HP",
            TerminationCause::HitCompanion => "HC",
            TerminationCause::HitObstacle => "HO",
            TerminationCause::Stray => "LC",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.code() == code)
    }
}

impl std::fmt::Display for TerminationCause {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TerminationThresholds {
    pub goal: f64,
    pub pedestrian: f64,
    pub companion: f64,
    pub obstacle: f64,
    pub stray: f64,
}

impl Default for TerminationThresholds {
    fn default() -> Self {
        Self {
            goal: 0.8,
            pedestrian: 0.4,
            companion: 0.4,
            obstacle: 0.2,
            stray: 2.0,
        }
    }
}

/// Evaluated on true distances. Precedence: pedestrian, companion, obstacle,
/// stray, goal. Companion checks only apply when a real companion is present.
pub fn check_termination(
    truth: &WorldState,
    thresholds: &TerminationThresholds,
    companion_active: bool,
) -> TerminationCause {
    if truth.min_ped_distance() <= thresholds.pedestrian {
        TerminationCause::HitPedestrian
    } else if companion_active && truth.companion.d <= thresholds.companion {
        TerminationCause::HitCompanion
    } else if truth.obstacles.min_near() <= thresholds.obstacle {
        TerminationCause::HitObstacle
    } else if companion_active && truth.companion.d >= thresholds.stray {
        TerminationCause::Stray
    } else if truth.goal.d <= thresholds.goal {
        TerminationCause::GoalReached
    } else {
        TerminationCause::None
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardModel {
    pub goal: f64,
    pub failure: f64,
    pub rotation_penalty: f64,
}

impl Default for RewardModel {
    fn default() -> Self {
        Self {
            goal: 10_000.0,
            failure: -10_000.0,
            rotation_penalty: 10.0,
        }
    }
}

impl RewardModel {
    pub fn reward(&self, cause: TerminationCause, v_r: f64) -> f64 {
        match cause {
            TerminationCause::GoalReached => self.goal,
            TerminationCause::None => -self.rotation_penalty * v_r.abs(),
            _ => self.failure,
        }
    }
}

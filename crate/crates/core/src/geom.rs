//! Planar geometry and synchro-drive motion.
//!
//! Headings are kept in `(-π, π]`. Under a constant command `(v_T, v_R)` the
//! robot follows a circular arc of radius `v_T / v_R`, degenerating to a
//! straight segment when `|v_R|` falls below [`STRAIGHT_LINE_EPS`].

use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};

/// Rotational speeds below this magnitude (rad/s) use the straight-line update.
pub const STRAIGHT_LINE_EPS: f64 = 1e-6;

/// A 2-D point or displacement in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_polar(r: f64, angle: f64) -> Self {
        Self::new(r * angle.cos(), r * angle.sin())
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }
}

impl std::ops::Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl std::ops::Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl std::ops::Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Robot position and heading.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose2D {
    /// Builds a pose, wrapping `heading` into `(-π, π]`.
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self {
            x,
            y,
            heading: wrap_angle_unchecked(heading),
        }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

/// Translational and rotational velocity command `a = [v_T, v_R]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VelocityCommand {
    pub v_t: f64,
    pub v_r: f64,
}

impl VelocityCommand {
    pub const fn new(v_t: f64, v_r: f64) -> Self {
        Self { v_t, v_r }
    }
}

/// Velocity bounds: `0 ≤ v_T ≤ max_translational`, `|v_R| ≤ max_rotational`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityLimits {
    pub max_translational: f64,
    pub max_rotational: f64,
}

impl Default for VelocityLimits {
    fn default() -> Self {
        Self {
            max_translational: 0.7,
            max_rotational: PI / 3.0,
        }
    }
}

impl VelocityLimits {
    pub fn clamp(&self, cmd: VelocityCommand) -> VelocityCommand {
        VelocityCommand {
            v_t: cmd.v_t.clamp(0.0, self.max_translational),
            v_r: cmd.v_r.clamp(-self.max_rotational, self.max_rotational),
        }
    }

    pub fn contains(&self, cmd: VelocityCommand) -> bool {
        (0.0..=self.max_translational).contains(&cmd.v_t) && cmd.v_r.abs() <= self.max_rotational
    }
}

/// Reduces `theta` into `(-π, π]`.
pub fn wrap_angle(theta: f64) -> Result<f64> {
    if !theta.is_finite() {
        return Err(Error::Domain(format!("cannot wrap non-finite angle {theta}")));
    }
    Ok(wrap_angle_unchecked(theta))
}

pub(crate) fn wrap_angle_unchecked(theta: f64) -> f64 {
    if theta > -PI && theta <= PI {
        return theta;
    }
    let mut r = theta.rem_euclid(TAU);
    if r > PI {
        r -= TAU;
    }
    // rem_euclid can land exactly on -π after the shift when theta ≡ π.
    if r <= -PI {
        r += TAU;
    }
    r
}

/// Arc branch of the synchro-drive update. Only meaningful for `v_r != 0`.
pub fn arc_displacement(heading: f64, cmd: VelocityCommand, dt: f64) -> Vec2 {
    let end = heading + cmd.v_r * dt;
    Vec2::new(
        -cmd.v_t * (heading.sin() - end.sin()) / cmd.v_r,
        cmd.v_t * (heading.cos() - end.cos()) / cmd.v_r,
    )
}

/// Straight-line branch: constant velocity along the current heading for `dt`.
pub fn straight_displacement(heading: f64, cmd: VelocityCommand, dt: f64) -> Vec2 {
    Vec2::new(cmd.v_t * heading.cos() * dt, cmd.v_t * heading.sin() * dt)
}

/// Advances `pose` under a constant command for `dt` seconds.
pub fn step_pose(pose: Pose2D, cmd: VelocityCommand, dt: f64) -> Pose2D {
    debug_assert!(dt > 0.0);
    let delta = if cmd.v_r.abs() > STRAIGHT_LINE_EPS {
        arc_displacement(pose.heading, cmd, dt)
    } else {
        straight_displacement(pose.heading, cmd, dt)
    };
    Pose2D::new(pose.x + delta.x, pose.y + delta.y, pose.heading + cmd.v_r * dt)
}

/// Distance and bearing (relative to the robot heading) of `point`.
///
/// A point coincident with the robot maps to `(0, 0)`.
pub fn relative_polar(pose: &Pose2D, point: Vec2) -> (f64, f64) {
    let dx = point.x - pose.x;
    let dy = point.y - pose.y;
    let d = dx.hypot(dy);
    if d == 0.0 {
        return (0.0, 0.0);
    }
    (d, wrap_angle_unchecked(dy.atan2(dx) - pose.heading))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn wrap_examples() {
        assert_eq!(wrap_angle(0.0).unwrap(), 0.0);
        assert!((wrap_angle(3.0 * PI).unwrap() - PI).abs() < 1e-12);
        assert!((wrap_angle(-1.5 * PI).unwrap() - PI / 2.0).abs() < 1e-12);
        assert_eq!(wrap_angle(-PI).unwrap(), PI);
        assert_eq!(wrap_angle(PI).unwrap(), PI);
        assert!(wrap_angle(f64::NAN).is_err());
        assert!(wrap_angle(f64::INFINITY).is_err());
    }

    #[test]
    fn straight_step_uses_dt() {
        let limits = VelocityLimits::default();
        let cmd = limits.clamp(VelocityCommand::new(1.0, 0.0));
        let p = step_pose(Pose2D::default(), cmd, 0.1);
        assert!((p.x - 0.07).abs() < 1e-15);
        assert_eq!(p.y, 0.0);
        assert_eq!(p.heading, 0.0);
    }

    #[test]
    fn quarter_circle() {
        let v_r = 0.5;
        let dt = (PI / 2.0) / v_r;
        let v_t = 0.6;
        let p = step_pose(Pose2D::default(), VelocityCommand::new(v_t, v_r), dt);
        assert!((p.x - v_t / v_r).abs() < 1e-12);
        assert!((p.y - v_t / v_r).abs() < 1e-12);
        assert!((p.heading - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn tiny_rotation_matches_straight() {
        let cmd = VelocityCommand::new(0.7, 1e-9);
        let arc = arc_displacement(0.0, cmd, 0.1);
        let straight = straight_displacement(0.0, cmd, 0.1);
        assert!((arc - straight).norm() < 1e-6);
    }

    #[test]
    fn polar_examples() {
        let (d, phi) = relative_polar(&Pose2D::default(), Vec2::new(3.0, 4.0));
        assert_eq!(d, 5.0);
        assert!((phi - 4f64.atan2(3.0)).abs() < 1e-15);
        assert!((phi - 0.9273).abs() < 1e-4);

        let (d, phi) = relative_polar(&Pose2D::new(1.0, 1.0, PI / 2.0), Vec2::new(1.0, 3.0));
        assert!((d - 2.0).abs() < 1e-15);
        assert!(phi.abs() < 1e-15);

        assert_eq!(relative_polar(&Pose2D::new(2.0, -1.0, 0.3), Vec2::new(2.0, -1.0)), (0.0, 0.0));
    }

    #[test]
    fn point_behind_robot() {
        let (d, phi) = relative_polar(&Pose2D::default(), Vec2::new(-2.0, 0.0));
        assert_eq!(d, 2.0);
        assert_eq!(phi, PI);
    }

    proptest! {
        #[test]
        fn wrap_is_congruent(theta in -1e4f64..1e4) {
            let w = wrap_angle(theta).unwrap();
            prop_assert!(w > -PI && w <= PI);
            let k = ((theta - w) / TAU).round();
            prop_assert!((theta - w - k * TAU).abs() < 1e-9);
        }

        #[test]
        fn chord_not_longer_than_arc(
            heading in -PI..PI, v_t in 0.0f64..0.7, v_r in -1.05f64..1.05, dt in 0.01f64..1.0
        ) {
            let p = step_pose(Pose2D::new(0.0, 0.0, heading), VelocityCommand::new(v_t, v_r), dt);
            prop_assert!(p.position().norm() <= v_t * dt + 1e-12);
            prop_assert!(p.heading > -PI && p.heading <= PI);
        }

        #[test]
        fn continuity_at_zero_rotation(heading in -PI..PI, v_t in 0.0f64..0.7, sign in prop::bool::ANY) {
            let v_r = if sign { 1e-9 } else { -1e-9 };
            let arc = arc_displacement(heading, VelocityCommand::new(v_t, v_r), 0.1);
            let straight = straight_displacement(heading, VelocityCommand::new(v_t, 0.0), 0.1);
            prop_assert!((arc - straight).norm() < 1e-6);
        }

        #[test]
        fn point_ahead_has_zero_bearing(
            x in -50.0f64..50.0, y in -50.0f64..50.0, heading in -PI..PI, d in 1e-3f64..30.0
        ) {
            let pose = Pose2D::new(x, y, heading);
            let target = pose.position() + Vec2::from_polar(d, pose.heading);
            let (dd, phi) = relative_polar(&pose, target);
            prop_assert!((dd - d).abs() < 1e-9);
            prop_assert!(phi.abs() < 1e-9);
        }

        #[test]
        fn distance_is_rotation_invariant(
            h1 in -PI..PI, h2 in -PI..PI, px in -10.0f64..10.0, py in -10.0f64..10.0
        ) {
            let a = relative_polar(&Pose2D::new(1.0, 2.0, h1), Vec2::new(px, py));
            let b = relative_polar(&Pose2D::new(1.0, 2.0, h2), Vec2::new(px, py));
            prop_assert_eq!(a.0, b.0);
        }
    }
}

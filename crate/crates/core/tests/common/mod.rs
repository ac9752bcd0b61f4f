//! Synthetic scenes shared by the integration and acceptance suites.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rpl_core::geom::Vec2;
use rpl_core::world::{EnvironmentSpec, OccupancyGrid, Trajectory};

/// Straight walk from `from` to `to` at `speed` m/s sampled every 0.1 s.
pub fn walk(id: u32, start_frame: i64, from: Vec2, to: Vec2, speed: f64) -> Trajectory {
    let steps = ((from.distance(to) / (speed * 0.1)).ceil() as usize).max(1);
    Trajectory {
        id,
        start_frame,
        positions: (0..=steps).map(|k| from + (to - from) * (k as f64 / steps as f64)).collect(),
    }
}

/// Empty open-field scenes, one straight 2–3 m trajectory each, so the only
/// task is reaching the goal.
pub fn goal_only_scenes(count: usize, seed: u64) -> Vec<EnvironmentSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|k| {
            let grid = OccupancyGrid::free(Vec2::new(-10.0, -10.0), Vec2::new(10.0, 10.0), 0.5).unwrap();
            let len = rng.random_range(2.0..3.0);
            let dir: f64 = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            let from = Vec2::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
            let to = from + Vec2::from_polar(len, dir);
            let t = walk(1, 0, from, to, 1.2);
            EnvironmentSpec::with_exclusions(format!("open-{k}"), vec![t], grid, &[]).unwrap()
        })
        .collect()
}

/// Straight corridor scenes: a companion (id 1) walks the corridor's
/// length, pausing part way, while two pedestrians (ids 2, 3) walk toward it
/// on either side. Pedestrians are excluded from the companion candidates.
pub fn corridor_scenes(count: usize, seed: u64) -> Vec<EnvironmentSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|k| {
            let len: f64 = rng.random_range(6.0..9.0);
            let mut grid = OccupancyGrid::free(Vec2::new(-2.0, -2.0), Vec2::new(len + 3.0, 2.0), 0.25).unwrap();
            for i in 0..grid.width() {
                for j in [0, grid.height() - 1] {
                    grid.set_occupied(i, j, true);
                }
            }
            let speed = rng.random_range(0.4..0.6);
            let stop = Vec2::new(len * rng.random_range(0.3..0.5), 0.0);
            let first = walk(1, 0, Vec2::new(0.0, 0.0), stop, speed);
            let second = walk(1, 0, stop, Vec2::new(len, 0.0), speed);
            let pause = rng.random_range(60..100);
            let mut positions = first.positions;
            positions.extend(std::iter::repeat_n(stop, pause));
            positions.extend(second.positions.into_iter().skip(1));
            let companion = Trajectory {
                id: 1,
                start_frame: 0,
                positions,
            };
            let mut peds = vec![companion];
            for (id, side) in [(2, 1.0), (3, -1.0)] {
                let y = side * rng.random_range(0.5..0.9);
                let speed = rng.random_range(1.0..1.3);
                let start_frame = rng.random_range(0..40);
                peds.push(walk(id, start_frame, Vec2::new(len + 1.5, y), Vec2::new(-1.5, y), speed));
            }
            EnvironmentSpec::with_exclusions(format!("corridor-{k}"), peds, grid, &[2, 3]).unwrap()
        })
        .collect()
}

//! Recorded crowd scenes: pedestrian trajectories plus an occupancy grid.
//!
//! Trajectory files are plain text, one `frame_index,pedestrian_id,x,y` record
//! per line, frames spaced 0.1 s apart. Missing frames inside one pedestrian's
//! track are filled by linear interpolation.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::grid::OccupancyGrid;
use crate::error::{Error, Result};
use crate::geom::Vec2;

pub type PedestrianId = u32;

/// One pedestrian track, densely sampled from `start_frame`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub id: PedestrianId,
    pub start_frame: i64,
    pub positions: Vec<Vec2>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn end_frame(&self) -> i64 {
        self.start_frame + self.positions.len() as i64 - 1
    }

    pub fn first(&self) -> Vec2 {
        self.positions[0]
    }

    pub fn last(&self) -> Vec2 {
        *self.positions.last().expect("trajectory is never empty")
    }

    /// Position at index `k` into the track, frozen at the final sample.
    pub fn at_index(&self, k: usize) -> Vec2 {
        self.positions[k.min(self.positions.len() - 1)]
    }

    /// Replay position at a global frame: absent before the first recorded
    /// frame, frozen at the last one afterwards.
    pub fn at_frame(&self, frame: i64) -> Option<Vec2> {
        if frame < self.start_frame {
            return None;
        }
        Some(self.at_index((frame - self.start_frame) as usize))
    }

    pub fn net_displacement(&self) -> f64 {
        self.first().distance(self.last())
    }

    pub fn duration_secs(&self, dt: f64) -> f64 {
        (self.positions.len() - 1) as f64 * dt
    }
}

/// A recorded scene `(trajectories, map)` with its eligible companion tracks.
#[derive(Debug, Clone)]
pub struct EnvironmentSpec {
    pub name: String,
    pub trajectories: Vec<Trajectory>,
    pub occupancy: OccupancyGrid,
    pub companion_candidates: Vec<PedestrianId>,
}

impl EnvironmentSpec {
    pub fn new(
        name: impl Into<String>,
        trajectories: Vec<Trajectory>,
        occupancy: OccupancyGrid,
        companion_candidates: Vec<PedestrianId>,
    ) -> Result<Self> {
        let env = Self {
            name: name.into(),
            trajectories,
            occupancy,
            companion_candidates,
        };
        env.validate()?;
        Ok(env)
    }

    /// Scene where every trajectory except `excluded` is a companion candidate.
    pub fn with_exclusions(
        name: impl Into<String>,
        trajectories: Vec<Trajectory>,
        occupancy: OccupancyGrid,
        excluded: &[PedestrianId],
    ) -> Result<Self> {
        let candidates = trajectories
            .iter()
            .map(|t| t.id)
            .filter(|id| !excluded.contains(id))
            .collect();
        Self::new(name, trajectories, occupancy, candidates)
    }

    fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for t in &self.trajectories {
            if !seen.insert(t.id) {
                return Err(Error::Scene(format!("{}: duplicate trajectory id {}", self.name, t.id)));
            }
            if t.positions.len() < 2 {
                return Err(Error::Scene(format!(
                    "{}: trajectory {} has fewer than 2 samples",
                    self.name, t.id
                )));
            }
            for p in &t.positions {
                if !p.is_finite() || !self.occupancy.contains(*p) {
                    return Err(Error::Scene(format!(
                        "{}: trajectory {} leaves the map at ({}, {})",
                        self.name, t.id, p.x, p.y
                    )));
                }
            }
        }
        for id in &self.companion_candidates {
            if !seen.contains(id) {
                return Err(Error::Scene(format!(
                    "{}: companion candidate {id} is not a trajectory",
                    self.name
                )));
            }
        }
        Ok(())
    }

    pub fn trajectory(&self, id: PedestrianId) -> Option<&Trajectory> {
        self.trajectories.iter().find(|t| t.id == id)
    }

    /// Loads a scene manifest (see [`SceneManifest`]).
    pub fn load(manifest_path: &Path) -> Result<Self> {
        let manifest = SceneManifest::load(manifest_path)?;
        manifest.open()
    }
}

/// Text manifest tying a trajectory file and a map together:
///
/// ```text
/// name = zara01
/// trajectories = zara01.csv
/// map = zara01.pgm
/// map_meta = zara01.meta
/// excluded = 4, 17
/// ```
///
/// Relative paths resolve against the manifest's directory.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneManifest {
    pub name: String,
    pub trajectories: PathBuf,
    pub map: PathBuf,
    pub map_meta: PathBuf,
    pub excluded: Vec<PedestrianId>,
}

impl SceneManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let mut name = None;
        let mut traj = None;
        let mut map = None;
        let mut meta = None;
        let mut excluded = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(path, n + 1, "expected key = value"))?;
            let v = v.trim();
            match k.trim() {
                "name" => name = Some(v.to_string()),
                "trajectories" => traj = Some(base.join(v)),
                "map" => map = Some(base.join(v)),
                "map_meta" => meta = Some(base.join(v)),
                "excluded" => {
                    for tok in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                        excluded.push(
                            tok.parse()
                                .map_err(|_| Error::parse(path, n + 1, format!("bad pedestrian id {tok:?}")))?,
                        );
                    }
                }
                other => return Err(Error::parse(path, n + 1, format!("unknown key {other:?}"))),
            }
        }
        let missing = |k: &str| Error::parse(path, 0, format!("manifest is missing `{k}`"));
        Ok(Self {
            name: name.ok_or_else(|| missing("name"))?,
            trajectories: traj.ok_or_else(|| missing("trajectories"))?,
            map: map.ok_or_else(|| missing("map"))?,
            map_meta: meta.ok_or_else(|| missing("map_meta"))?,
            excluded,
        })
    }

    pub fn open(&self) -> Result<EnvironmentSpec> {
        let trajectories = load_trajectories(&self.trajectories)?;
        let grid = OccupancyGrid::load_pgm(&self.map, &self.map_meta)?;
        EnvironmentSpec::with_exclusions(self.name.clone(), trajectories, grid, &self.excluded)
    }

    /// Manifest text with paths written as given (callers pass relative paths
    /// when the manifest should be relocatable).
    pub fn render(&self) -> String {
        let ids: Vec<String> = self.excluded.iter().map(|i| i.to_string()).collect();
        format!(
            "name = {}\ntrajectories = {}\nmap = {}\nmap_meta = {}\nexcluded = {}\n",
            self.name,
            self.trajectories.display(),
            self.map.display(),
            self.map_meta.display(),
            ids.join(", ")
        )
    }
}

pub fn load_trajectories(path: &Path) -> Result<Vec<Trajectory>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_trajectories(&text, path)
}

/// Parses `frame,id,x,y` records. Frames must strictly increase within an id;
/// interior gaps are linearly interpolated. Output is ordered by id.
pub fn parse_trajectories(text: &str, origin: &Path) -> Result<Vec<Trajectory>> {
    let mut records: BTreeMap<PedestrianId, Vec<(i64, Vec2)>> = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(Error::parse(
                origin,
                n + 1,
                format!("expected 4 comma-separated fields, found {}", fields.len()),
            ));
        }
        let bad = |what: &str, s: &str| Error::parse(origin, n + 1, format!("bad {what} {s:?}"));
        let frame: i64 = fields[0].parse().map_err(|_| bad("frame index", fields[0]))?;
        let id: PedestrianId = fields[1].parse().map_err(|_| bad("pedestrian id", fields[1]))?;
        let x: f64 = fields[2].parse().map_err(|_| bad("x", fields[2]))?;
        let y: f64 = fields[3].parse().map_err(|_| bad("y", fields[3]))?;
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::parse(origin, n + 1, "non-finite coordinate"));
        }
        let track = records.entry(id).or_default();
        if let Some(&(prev, _)) = track.last() {
            if frame <= prev {
                return Err(Error::parse(
                    origin,
                    n + 1,
                    format!("frame {frame} for pedestrian {id} does not follow frame {prev}"),
                ));
            }
        }
        track.push((frame, Vec2::new(x, y)));
    }
    Ok(records
        .into_iter()
        .map(|(id, samples)| densify(id, &samples))
        .collect())
}

fn densify(id: PedestrianId, samples: &[(i64, Vec2)]) -> Trajectory {
    let start_frame = samples[0].0;
    let mut positions = vec![samples[0].1];
    for w in samples.windows(2) {
        let (f0, p0) = w[0];
        let (f1, p1) = w[1];
        let gap = (f1 - f0) as f64;
        for k in 1..(f1 - f0) {
            let s = k as f64 / gap;
            positions.push(p0 + (p1 - p0) * s);
        }
        positions.push(p1);
    }
    Trajectory {
        id,
        start_frame,
        positions,
    }
}

/// Renders trajectories back to the canonical record format.
pub fn render_trajectories(trajectories: &[Trajectory]) -> String {
    let mut rows: Vec<(i64, PedestrianId, Vec2)> = trajectories
        .iter()
        .flat_map(|t| {
            t.positions
                .iter()
                .enumerate()
                .map(move |(k, p)| (t.start_frame + k as i64, t.id, *p))
        })
        .collect();
    rows.sort_by_key(|r| (r.0, r.1));
    let mut out = String::new();
    for (f, id, p) in rows {
        out.push_str(&format!("{f},{id},{},{}\n", p.x, p.y));
    }
    out
}

//! Per-step episode export (CSV) and the proximity metrics computed from it.
//!
//! Columns: `episode_id,t,x,y,heading,v_T,v_R,reward,cause,com_x,com_y`
//! followed by `ped{j}_x,ped{j}_y` for the nearest pedestrians. The last row
//! of each episode is its terminal pose with zero command and reward and the
//! termination code; earlier rows carry `-` as cause.

use std::fmt::Write as _;
use std::path::Path;

use crate::episode::Episode;
use crate::error::{Error, Result};
use crate::geom::{Pose2D, Vec2, VelocityCommand};
use crate::world::TerminationCause;

#[derive(Debug, Clone, PartialEq)]
pub struct ExportRow {
    pub t: usize,
    pub pose: Pose2D,
    pub command: VelocityCommand,
    pub reward: f64,
    /// Set on the final row only.
    pub cause: Option<TerminationCause>,
    pub companion: Vec2,
    pub pedestrians: Vec<Vec2>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExportedEpisode {
    pub id: u64,
    pub rows: Vec<ExportRow>,
}

pub fn header(n_ped: usize) -> String {
    let mut h = String::from("episode_id,t,x,y,heading,v_T,v_R,reward,cause,com_x,com_y");
    for j in 1..=n_ped {
        write!(h, ",ped{j}_x,ped{j}_y").unwrap();
    }
    h
}

/// CSV text for `(id, episode)` pairs, header included.
pub fn render(episodes: &[(u64, &Episode)], n_ped: usize) -> String {
    let mut out = header(n_ped);
    out.push('\n');
    for (id, ep) in episodes {
        let last = ep.trace.len().saturating_sub(1);
        for (k, row) in ep.trace.iter().enumerate() {
            let cause = if k == last { row.cause.code() } else { "-" };
            write!(
                out,
                "{id},{},{},{},{},{},{},{},{cause},{},{}",
                row.t,
                row.pose.x,
                row.pose.y,
                row.pose.heading,
                row.command.v_t,
                row.command.v_r,
                row.reward,
                row.companion.x,
                row.companion.y
            )
            .unwrap();
            for j in 0..n_ped {
                match row.pedestrians.get(j) {
                    Some(p) => write!(out, ",{},{}", p.x, p.y).unwrap(),
                    None => out.push_str(",,"),
                }
            }
            out.push('\n');
        }
    }
    out
}

pub fn parse(text: &str, path: &Path) -> Result<Vec<ExportedEpisode>> {
    let mut lines = text.lines().enumerate();
    let (_, head) = lines.next().ok_or_else(|| Error::parse(path, 1, "empty export file"))?;
    let cols: Vec<&str> = head.split(',').map(str::trim).collect();
    if cols.len() < 11 || cols[..11] != header(0).split(',').collect::<Vec<_>>()[..] || (cols.len() - 11) % 2 != 0 {
        return Err(Error::parse(path, 1, "not an episode export header"));
    }
    let n_ped = (cols.len() - 11) / 2;
    let mut out: Vec<ExportedEpisode> = Vec::new();
    for (i, line) in lines {
        let ln = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != cols.len() {
            return Err(Error::parse(path, ln, format!("expected {} fields, found {}", cols.len(), f.len())));
        }
        let num = |k: usize| -> Result<f64> {
            f[k].parse::<f64>()
                .map_err(|_| Error::parse(path, ln, format!("column {} is not a number: {:?}", cols[k], f[k])))
        };
        let id: u64 = f[0].parse().map_err(|_| Error::parse(path, ln, "bad episode_id"))?;
        let t: usize = f[1].parse().map_err(|_| Error::parse(path, ln, "bad t"))?;
        let cause = match f[8] {
            "-" => None,
            code => Some(
                TerminationCause::from_code(code)
                    .ok_or_else(|| Error::parse(path, ln, format!("unknown cause {code:?}")))?,
            ),
        };
        let mut pedestrians = Vec::new();
        for j in 0..n_ped {
            let (a, b) = (11 + 2 * j, 12 + 2 * j);
            match (f[a].is_empty(), f[b].is_empty()) {
                (true, true) => {}
                (false, false) => pedestrians.push(Vec2::new(num(a)?, num(b)?)),
                _ => return Err(Error::parse(path, ln, format!("pedestrian {} has one coordinate", j + 1))),
            }
        }
        let row = ExportRow {
            t,
            pose: Pose2D {
                x: num(2)?,
                y: num(3)?,
                heading: num(4)?,
            },
            command: VelocityCommand::new(num(5)?, num(6)?),
            reward: num(7)?,
            cause,
            companion: Vec2::new(num(9)?, num(10)?),
            pedestrians,
        };
        match out.last_mut() {
            Some(ep) if ep.id == id => ep.rows.push(row),
            _ => out.push(ExportedEpisode { id, rows: vec![row] }),
        }
    }
    Ok(out)
}

pub fn load(path: &Path) -> Result<Vec<ExportedEpisode>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse(&text, path)
}

impl ExportedEpisode {
    /// Closest approach to any listed pedestrian; `None` if none was present.
    pub fn min_pedestrian_distance(&self) -> Option<f64> {
        self.rows
            .iter()
            .flat_map(|r| r.pedestrians.iter().map(move |p| p.distance(r.pose.position())))
            .min_by(f64::total_cmp)
    }

    pub fn max_companion_distance(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.companion.distance(r.pose.position()))
            .fold(0.0, f64::max)
    }
}

/// Averages over episodes of the per-episode minimum pedestrian distance and
/// maximum companion distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProximityMetrics {
    pub episodes: usize,
    /// Episodes that had at least one pedestrian.
    pub episodes_with_pedestrians: usize,
    pub mean_min_pedestrian: Option<f64>,
    pub mean_max_companion: f64,
}

pub fn proximity_metrics(episodes: &[ExportedEpisode]) -> Result<ProximityMetrics> {
    if episodes.is_empty() {
        return Err(Error::Config("no episodes to summarize".into()));
    }
    let mins: Vec<f64> = episodes.iter().filter_map(ExportedEpisode::min_pedestrian_distance).collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let maxes: Vec<f64> = episodes.iter().map(ExportedEpisode::max_companion_distance).collect();
    Ok(ProximityMetrics {
        episodes: episodes.len(),
        episodes_with_pedestrians: mins.len(),
        mean_min_pedestrian: (!mins.is_empty()).then(|| mean(&mins)),
        mean_max_companion: mean(&maxes),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(t: usize, x: f64, com: Vec2, peds: Vec<Vec2>, cause: Option<TerminationCause>) -> ExportRow {
        ExportRow {
            t,
            pose: Pose2D { x, y: 0.0, heading: 0.0 },
            command: VelocityCommand::default(),
            reward: 0.0,
            cause,
            companion: com,
            pedestrians: peds,
        }
    }

    #[test]
    fn metrics_examples() {
        let one = ExportedEpisode {
            id: 0,
            rows: vec![
                row(0, 0.0, Vec2::new(1.0, 0.0), vec![Vec2::new(0.0, 1.0)], None),
                row(1, 0.0, Vec2::new(0.0, 1.0), vec![Vec2::new(0.0, 0.35)], Some(TerminationCause::HitPedestrian)),
            ],
        };
        let m = proximity_metrics(std::slice::from_ref(&one)).unwrap();
        assert!((m.mean_min_pedestrian.unwrap() - 0.35).abs() < 1e-15);
        assert_eq!(m.mean_max_companion, 1.0);
        let two = |d: f64| ExportedEpisode {
            id: 1,
            rows: vec![row(0, 0.0, Vec2::new(1.0, 0.0), vec![Vec2::new(d, 0.0)], None)],
        };
        let m = proximity_metrics(&[two(0.3), two(0.5)]).unwrap();
        assert!((m.mean_min_pedestrian.unwrap() - 0.4).abs() < 1e-15);
        let lonely = ExportedEpisode {
            id: 2,
            rows: vec![row(0, 0.0, Vec2::new(1.0, 0.0), vec![], None)],
        };
        let m = proximity_metrics(&[lonely]).unwrap();
        assert_eq!(m.mean_min_pedestrian, None);
        assert!(proximity_metrics(&[]).is_err());
    }

    #[test]
    fn malformed_rows_report_line() {
        let text = format!("{}\n0,0,0,0,0,0,0,0,-,1,0,,\n0,1,x,0,0,0,0,0,RG,1,0,,\n", header(1));
        match parse(&text, Path::new("e.csv")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(parse("a,b\n", Path::new("e.csv")).is_err());
    }
}

use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::{Pose2D, Vec2};

/// Binary occupancy map. Cell `(i, j)` covers
/// `[origin.x + i·res, origin.x + (i+1)·res) × [origin.y + j·res, origin.y + (j+1)·res)`
/// and, when occupied, contributes its center to the obstacle point set.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    resolution: f64,
    origin: Vec2,
    width: usize,
    height: usize,
    /// Row-major by `j` (y index), `cells[j * width + i]`.
    cells: Vec<bool>,
}

impl OccupancyGrid {
    pub fn new(resolution: f64, origin: Vec2, width: usize, height: usize, cells: Vec<bool>) -> Result<Self> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(Error::Scene(format!("grid resolution must be positive, got {resolution}")));
        }
        if !origin.is_finite() {
            return Err(Error::Scene("grid origin must be finite".into()));
        }
        if width == 0 || height == 0 || cells.len() != width * height {
            return Err(Error::Scene(format!(
                "grid {width}x{height} does not match {} cells",
                cells.len()
            )));
        }
        if cells.iter().all(|&c| c) {
            return Err(Error::Scene("grid has no free cell".into()));
        }
        Ok(Self {
            resolution,
            origin,
            width,
            height,
            cells,
        })
    }

    /// All-free grid covering `[min, max]` at the given resolution.
    pub fn free(min: Vec2, max: Vec2, resolution: f64) -> Result<Self> {
        let width = (((max.x - min.x) / resolution).ceil() as usize).max(1);
        let height = (((max.y - min.y) / resolution).ceil() as usize).max(1);
        Self::new(resolution, min, width, height, vec![false; width * height])
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> Vec2 {
        self.origin
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn is_occupied(&self, i: usize, j: usize) -> bool {
        self.cells[j * self.width + i]
    }

    pub fn set_occupied(&mut self, i: usize, j: usize, occupied: bool) {
        self.cells[j * self.width + i] = occupied;
    }

    pub fn cell_center(&self, i: usize, j: usize) -> Vec2 {
        Vec2::new(
            self.origin.x + (i as f64 + 0.5) * self.resolution,
            self.origin.y + (j as f64 + 0.5) * self.resolution,
        )
    }

    /// Cell containing `p`, if inside the grid.
    pub fn cell_of(&self, p: Vec2) -> Option<(usize, usize)> {
        let fi = ((p.x - self.origin.x) / self.resolution).floor();
        let fj = ((p.y - self.origin.y) / self.resolution).floor();
        if fi < 0.0 || fj < 0.0 || fi >= self.width as f64 || fj >= self.height as f64 {
            return None;
        }
        Some((fi as usize, fj as usize))
    }

    pub fn max_corner(&self) -> Vec2 {
        Vec2::new(
            self.origin.x + self.width as f64 * self.resolution,
            self.origin.y + self.height as f64 * self.resolution,
        )
    }

    pub fn contains(&self, p: Vec2) -> bool {
        let max = self.max_corner();
        p.x >= self.origin.x && p.y >= self.origin.y && p.x <= max.x && p.y <= max.y
    }

    pub fn corners(&self) -> [Vec2; 4] {
        let lo = self.origin;
        let hi = self.max_corner();
        [lo, Vec2::new(hi.x, lo.y), hi, Vec2::new(lo.x, hi.y)]
    }

    /// The map corner farthest from `from`; dummy pedestrians are parked there.
    pub fn farthest_corner(&self, from: Vec2) -> Vec2 {
        let mut best = self.origin;
        let mut best_d = -1.0;
        for c in self.corners() {
            let d = c.distance(from);
            if d > best_d {
                best_d = d;
                best = c;
            }
        }
        best
    }

    pub fn occupied_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    /// Centers of occupied cells within `radius` (inclusive) of the pose.
    pub fn obstacle_points_near(&self, pose: &Pose2D, radius: f64) -> Vec<Vec2> {
        let mut out = Vec::new();
        self.for_each_occupied_near(pose.position(), radius, |p| out.push(p));
        out
    }

    pub(crate) fn for_each_occupied_near(&self, center: Vec2, radius: f64, mut f: impl FnMut(Vec2)) {
        if radius <= 0.0 {
            return;
        }
        let res = self.resolution;
        let lo_i = ((center.x - radius - self.origin.x) / res).floor().max(0.0);
        let lo_j = ((center.y - radius - self.origin.y) / res).floor().max(0.0);
        let hi_i = ((center.x + radius - self.origin.x) / res).ceil();
        let hi_j = ((center.y + radius - self.origin.y) / res).ceil();
        if hi_i < 0.0 || hi_j < 0.0 {
            return;
        }
        let hi_i = (hi_i as usize).min(self.width.saturating_sub(1));
        let hi_j = (hi_j as usize).min(self.height.saturating_sub(1));
        let (lo_i, lo_j) = (lo_i as usize, lo_j as usize);
        if lo_i > hi_i || lo_j > hi_j {
            return;
        }
        let r2 = radius * radius;
        for j in lo_j..=hi_j {
            let row = &self.cells[j * self.width..(j + 1) * self.width];
            for i in lo_i..=hi_i {
                if row[i] {
                    let c = self.cell_center(i, j);
                    if (c - center).norm_sq() <= r2 {
                        f(c);
                    }
                }
            }
        }
    }

    /// Reads a P2/P5 graymap plus its `resolution` / `origin_x` / `origin_y`
    /// sidecar. Dark pixels (below half of maxval) are occupied; the top image
    /// row is the largest `y`.
    pub fn load_pgm(map_path: &Path, meta_path: &Path) -> Result<Self> {
        let bytes = std::fs::read(map_path).map_err(|e| Error::io(map_path, e))?;
        let (width, height, pixels) = parse_pgm(&bytes).map_err(|m| Error::parse(map_path, 0, m))?;
        let meta = std::fs::read_to_string(meta_path).map_err(|e| Error::io(meta_path, e))?;
        let (resolution, origin) = parse_map_meta(&meta, meta_path)?;
        let mut cells = vec![false; width * height];
        for row in 0..height {
            let j = height - 1 - row;
            for i in 0..width {
                cells[j * width + i] = pixels.data[row * width + i] * 2 < pixels.maxval;
            }
        }
        Self::new(resolution, origin, width, height, cells)
    }

    /// Writes the grid as binary P5 (0 occupied, 255 free) plus the sidecar.
    pub fn save_pgm(&self, map_path: &Path, meta_path: &Path) -> Result<()> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        for row in 0..self.height {
            let j = self.height - 1 - row;
            for i in 0..self.width {
                out.push(if self.is_occupied(i, j) { 0 } else { 255 });
            }
        }
        crate::fsio::write_atomic(map_path, &out)?;
        let meta = format!(
            "resolution={}\norigin_x={}\norigin_y={}\n",
            self.resolution, self.origin.x, self.origin.y
        );
        crate::fsio::write_atomic(meta_path, meta.as_bytes())
    }
}

struct Pixels {
    maxval: u32,
    data: Vec<u32>,
}

fn parse_pgm(bytes: &[u8]) -> std::result::Result<(usize, usize, Pixels), String> {
    let mut pos = 0usize;
    let next_token = |pos: &mut usize| -> Option<String> {
        loop {
            while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
            if *pos < bytes.len() && bytes[*pos] == b'#' {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
                continue;
            }
            break;
        }
        let start = *pos;
        while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        (start < *pos).then(|| String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
    };
    let magic = next_token(&mut pos).ok_or("empty graymap")?;
    let num = |pos: &mut usize, what: &str| -> std::result::Result<usize, String> {
        next_token(pos)
            .ok_or_else(|| format!("missing {what}"))?
            .parse::<usize>()
            .map_err(|e| format!("bad {what}: {e}"))
    };
    let width = num(&mut pos, "width")?;
    let height = num(&mut pos, "height")?;
    let maxval = num(&mut pos, "maxval")? as u32;
    if maxval == 0 || maxval > 65535 {
        return Err(format!("unsupported maxval {maxval}"));
    }
    let n = width * height;
    let data = match magic.as_str() {
        "P5" => {
            // exactly one whitespace byte separates the header from raster data
            pos += 1;
            let bpp = if maxval < 256 { 1 } else { 2 };
            let raster = bytes.get(pos..pos + n * bpp).ok_or("truncated raster")?;
            if bpp == 1 {
                raster.iter().map(|&b| b as u32).collect()
            } else {
                raster.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]]) as u32).collect()
            }
        }
        "P2" => {
            let mut v = Vec::with_capacity(n);
            for k in 0..n {
                v.push(num(&mut pos, &format!("pixel {k}"))? as u32);
            }
            v
        }
        other => return Err(format!("unsupported graymap magic {other:?}")),
    };
    Ok((width, height, Pixels { maxval, data }))
}

fn parse_map_meta(text: &str, path: &Path) -> Result<(f64, Vec2)> {
    let mut resolution = None;
    let mut ox = None;
    let mut oy = None;
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(path, n + 1, "expected key=value"))?;
        let val: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, n + 1, format!("bad number {:?}", v.trim())))?;
        match k.trim() {
            "resolution" => resolution = Some(val),
            "origin_x" => ox = Some(val),
            "origin_y" => oy = Some(val),
            other => return Err(Error::parse(path, n + 1, format!("unknown key {other:?}"))),
        }
    }
    match (resolution, ox, oy) {
        (Some(r), Some(x), Some(y)) => Ok((r, Vec2::new(x, y))),
        _ => Err(Error::parse(path, 0, "map metadata needs resolution, origin_x and origin_y")),
    }
}

//! Probabilistic 2D occupancy grid.
//!
//! Cells store occupancy in log-odds form and are fused with a beam-based
//! inverse sensor model. Every cell is classified into one of four sets:
//! never measured (`Unknown`), `Obstacle` (p >= p_h), `Free` (p <= p_l), and
//! `Uncertain` for anything in between.
//!
//! Hit updates are clamped with a range-dependent upper bound: endpoints
//! within `near_range` of the sensor saturate at `clamp_max_near`, farther
//! endpoints at `clamp_max_far`.

mod io;
mod raycast;

use thiserror::Error;

use crate::geometry::{Path, Pose, WorldPoint};
use crate::search::Footprint;
use crate::sensor::DepthScan;

pub(crate) use raycast::{clip_to_grid, walk};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("cell ({x}, {y}) out of bounds")]
    CellOutOfBounds { x: i64, y: i64 },
    #[error("point ({x:.3}, {y:.3}) out of bounds")]
    PointOutOfBounds { x: f64, y: f64 },
    #[error("invalid grid spec: {0}")]
    InvalidSpec(String),
    #[error("invalid classifier config: {0}")]
    InvalidConfig(String),
    #[error("malformed grid text: {0}")]
    Parse(String),
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub fn probability_from_logodds(l: f64) -> f64 {
    1.0 / (1.0 + (-l).exp())
}

/// Column/row index of a grid cell. `(0, 0)` is the cell at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellIndex {
    pub x: usize,
    pub y: usize,
}

impl CellIndex {
    pub const fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }

    /// Applies a signed offset; `None` if the result is negative.
    pub fn offset(&self, dx: i32, dy: i32) -> Option<CellIndex> {
        let x = self.x as i64 + dx as i64;
        let y = self.y as i64 + dy as i64;
        (x >= 0 && y >= 0).then(|| CellIndex::new(x as usize, y as usize))
    }

    pub fn manhattan(&self, other: &CellIndex) -> usize {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y)
    }

    pub fn chebyshev(&self, other: &CellIndex) -> usize {
        self.x.abs_diff(other.x).max(self.y.abs_diff(other.y))
    }
}

/// Grid geometry: size in cells, cell edge length and world position of the
/// lower-left corner of cell `(0, 0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
    pub origin: WorldPoint,
}

impl GridSpec {
    pub fn new(width: usize, height: usize, resolution: f64, origin: WorldPoint) -> Result<Self, GridError> {
        if width == 0 || height == 0 {
            return Err(GridError::InvalidSpec(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if !(resolution > 0.0) || !resolution.is_finite() {
            return Err(GridError::InvalidSpec(format!(
                "resolution must be positive, got {resolution}"
            )));
        }
        Ok(Self {
            width,
            height,
            resolution,
            origin,
        })
    }

    /// Smallest grid covering the rectangle `[min, max]`.
    pub fn covering(min: WorldPoint, max: WorldPoint, resolution: f64) -> Result<Self, GridError> {
        let width = ((max.x - min.x) / resolution - 1e-9).ceil().max(0.0) as usize;
        let height = ((max.y - min.y) / resolution - 1e-9).ceil().max(0.0) as usize;
        Self::new(width, height, resolution, min)
    }

    pub fn cell_count(&self) -> usize {
        self.width * self.height
    }

    pub fn contains(&self, cell: CellIndex) -> bool {
        cell.x < self.width && cell.y < self.height
    }

    pub fn contains_point(&self, p: WorldPoint) -> bool {
        self.world_to_cell(p).is_some()
    }

    pub fn world_to_cell(&self, p: WorldPoint) -> Option<CellIndex> {
        let fx = ((p.x - self.origin.x) / self.resolution).floor();
        let fy = ((p.y - self.origin.y) / self.resolution).floor();
        if fx < 0.0 || fy < 0.0 || !fx.is_finite() || !fy.is_finite() {
            return None;
        }
        let cell = CellIndex::new(fx as usize, fy as usize);
        self.contains(cell).then_some(cell)
    }

    pub fn cell_center(&self, cell: CellIndex) -> WorldPoint {
        WorldPoint::new(
            self.origin.x + (cell.x as f64 + 0.5) * self.resolution,
            self.origin.y + (cell.y as f64 + 0.5) * self.resolution,
        )
    }

    pub fn linear(&self, cell: CellIndex) -> usize {
        cell.y * self.width + cell.x
    }

    pub fn from_linear(&self, idx: usize) -> CellIndex {
        CellIndex::new(idx % self.width, idx / self.width)
    }

    pub fn cells(&self) -> impl Iterator<Item = CellIndex> + '_ {
        (0..self.cell_count()).map(|i| self.from_linear(i))
    }

    fn check(&self, cell: CellIndex) -> Result<usize, GridError> {
        if self.contains(cell) {
            Ok(self.linear(cell))
        } else {
            Err(GridError::CellOutOfBounds {
                x: cell.x as i64,
                y: cell.y as i64,
            })
        }
    }

    /// Cells crossed by the segment `from -> to`, in traversal order,
    /// including the origin cell and excluding the destination cell.
    pub fn raycast(&self, from: WorldPoint, to: WorldPoint) -> Result<Vec<CellIndex>, GridError> {
        for p in [from, to] {
            if !self.contains_point(p) {
                return Err(GridError::PointOutOfBounds { x: p.x, y: p.y });
            }
        }
        let mut cells = Vec::new();
        walk(self, from, to, |c| {
            cells.push(c);
            true
        });
        Ok(cells)
    }
}

/// Occupancy thresholds and inverse-sensor-model parameters (probabilities).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifierConfig {
    pub p_l: f64,
    pub p_h: f64,
    pub p_hit: f64,
    pub p_miss: f64,
    pub clamp_min: f64,
    pub clamp_max_near: f64,
    pub clamp_max_far: f64,
    /// Endpoints closer than this use `clamp_max_near`.
    pub near_range: f64,
    /// Mapping range; returns beyond it only clear space.
    pub max_range: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            p_l: 0.18,
            p_h: 0.75,
            p_hit: 0.7,
            p_miss: 0.2,
            clamp_min: 0.12,
            clamp_max_near: 0.85,
            clamp_max_far: 0.7,
            near_range: 3.5,
            max_range: 7.0,
        }
    }
}

impl ClassifierConfig {
    pub fn with_max_range(mut self, max_range: f64) -> Self {
        self.max_range = max_range;
        self
    }

    pub fn validate(&self) -> Result<(), GridError> {
        let bad = |msg: &str| Err(GridError::InvalidConfig(msg.to_string()));
        if !(0.0 < self.p_l && self.p_l < self.p_h && self.p_h < 1.0) {
            return bad("need 0 < p_l < p_h < 1");
        }
        if !(0.0 < self.p_miss && self.p_miss < 0.5 && 0.5 < self.p_hit && self.p_hit < 1.0) {
            return bad("need p_miss < 0.5 < p_hit");
        }
        if !(0.0 < self.clamp_min
            && self.clamp_min < self.clamp_max_far
            && self.clamp_max_far <= self.clamp_max_near
            && self.clamp_max_near < 1.0)
        {
            return bad("need clamp_min < clamp_max_far <= clamp_max_near");
        }
        if !(self.near_range > 0.0 && self.max_range > 0.0) {
            return bad("ranges must be positive");
        }
        Ok(())
    }
}

/// Partition element of a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellClass {
    Unknown,
    Obstacle,
    Free,
    Uncertain,
}

impl CellClass {
    /// `Unknown` or `Uncertain`: cells whose traversal is a gamble.
    pub fn is_unsure(self) -> bool {
        matches!(self, CellClass::Unknown | CellClass::Uncertain)
    }
}

/// Read-only classification of grid cells. Planners are generic over this so
/// the same search code runs on the dual-threshold map, a masked copy of it,
/// or a binarized baseline view.
pub trait OccupancyView {
    fn spec(&self) -> &GridSpec;
    /// Class of an in-bounds cell.
    fn class_of(&self, cell: CellIndex) -> CellClass;
}

/// Returns are pushed this far past the measured range before the endpoint
/// cell is looked up.
const ENDPOINT_NUDGE: f64 = 1e-9;

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct IntegrationReport {
    pub beams_used: usize,
    pub beams_skipped: usize,
    pub hits: usize,
    pub misses: usize,
}

#[derive(Debug, Clone)]
pub struct OccupancyGrid {
    spec: GridSpec,
    config: ClassifierConfig,
    /// Log-odds per cell; NaN marks a never-measured cell.
    logodds: Vec<f64>,
    /// Cells forced to `Obstacle` in a hypothesis-masked copy.
    masked: Vec<bool>,
    lo_high: f64,
    lo_low: f64,
    lo_min: f64,
    lo_max_near: f64,
    lo_max_far: f64,
    lo_hit: f64,
    lo_miss: f64,
}

impl OccupancyGrid {
    pub fn new(spec: GridSpec, config: ClassifierConfig) -> Result<Self, GridError> {
        config.validate()?;
        let n = spec.cell_count();
        Ok(Self {
            spec,
            config,
            logodds: vec![f64::NAN; n],
            masked: vec![false; n],
            lo_high: logit(config.p_h),
            lo_low: logit(config.p_l),
            lo_min: logit(config.clamp_min),
            lo_max_near: logit(config.clamp_max_near),
            lo_max_far: logit(config.clamp_max_far),
            lo_hit: logit(config.p_hit),
            lo_miss: logit(config.p_miss),
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn config(&self) -> &ClassifierConfig {
        &self.config
    }

    pub fn classify(&self, cell: CellIndex) -> Result<CellClass, GridError> {
        self.spec.check(cell)?;
        Ok(self.class_unchecked(self.spec.linear(cell)))
    }

    fn class_unchecked(&self, idx: usize) -> CellClass {
        if self.masked[idx] {
            return CellClass::Obstacle;
        }
        let l = self.logodds[idx];
        if l.is_nan() {
            CellClass::Unknown
        } else if l >= self.lo_high {
            CellClass::Obstacle
        } else if l <= self.lo_low {
            CellClass::Free
        } else {
            CellClass::Uncertain
        }
    }

    /// Occupancy probability, `None` for a never-measured cell.
    pub fn probability(&self, cell: CellIndex) -> Result<Option<f64>, GridError> {
        let idx = self.spec.check(cell)?;
        let l = self.logodds[idx];
        Ok((!l.is_nan()).then(|| probability_from_logodds(l)))
    }

    /// Probability with the `Unknown => 0.5` convention used by the entropy
    /// and visibility terms.
    pub fn probability_or_half(&self, cell: CellIndex) -> f64 {
        let l = self.logodds[self.spec.linear(cell)];
        if l.is_nan() {
            0.5
        } else {
            probability_from_logodds(l)
        }
    }

    pub fn logodds(&self, cell: CellIndex) -> Result<Option<f64>, GridError> {
        let idx = self.spec.check(cell)?;
        let l = self.logodds[idx];
        Ok((!l.is_nan()).then_some(l))
    }

    /// Overwrites a cell's occupancy probability; `None` resets it to unknown.
    pub fn set_probability(&mut self, cell: CellIndex, p: Option<f64>) -> Result<(), GridError> {
        let idx = self.spec.check(cell)?;
        self.logodds[idx] = match p {
            Some(p) => logit(p),
            None => f64::NAN,
        };
        Ok(())
    }

    pub fn is_masked(&self, cell: CellIndex) -> bool {
        self.spec.contains(cell) && self.masked[self.spec.linear(cell)]
    }

    /// Shannon entropy of the cell's occupancy in nats.
    pub fn entropy(&self, cell: CellIndex) -> Result<f64, GridError> {
        self.spec.check(cell)?;
        Ok(bernoulli_entropy(self.probability_or_half(cell)))
    }

    /// Probability that `cell` is visible from `viewpoint`: the product of
    /// free-space probabilities of the cells crossed on the way to its center.
    /// The viewpoint's own cell is not an occluder.
    pub fn visibility(&self, viewpoint: &Pose, cell: CellIndex) -> Result<f64, GridError> {
        self.spec.check(cell)?;
        let from = viewpoint.point();
        if !self.spec.contains_point(from) {
            return Err(GridError::PointOutOfBounds { x: from.x, y: from.y });
        }
        let mut v = 1.0;
        let mut first = true;
        walk(&self.spec, from, self.spec.cell_center(cell), |c| {
            if !first {
                v *= 1.0 - self.probability_or_half(c);
            }
            first = false;
            true
        });
        Ok(v)
    }

    /// Immutable copy for planning.
    pub fn snapshot(&self) -> OccupancyGrid {
        self.clone()
    }

    /// Fuses one depth scan taken from `sensor_pose`.
    ///
    /// Beams are applied in order. Every cell a beam crosses before its
    /// endpoint gets a miss, the endpoint cell a hit. Cells holding the
    /// endpoint of any beam in the scan take no misses from it. Returns at or beyond
    /// the mapping range clear the cells up to it and produce no hit. NaN or
    /// non-positive ranges are skipped and counted.
    pub fn integrate_scan(&mut self, sensor_pose: &Pose, scan: &DepthScan) -> Result<IntegrationReport, GridError> {
        let origin = sensor_pose.point();
        if !self.spec.contains_point(origin) {
            return Err(GridError::PointOutOfBounds {
                x: origin.x,
                y: origin.y,
            });
        }
        let heading = sensor_pose.heading();
        let mapping_range = self.config.max_range;
        let mut report = IntegrationReport::default();
        // (end, range, is_hit) per usable beam
        let mut beams = Vec::with_capacity(scan.ranges.len());
        let mut hit_here = vec![false; self.spec.cell_count()];
        for (i, &r) in scan.ranges.iter().enumerate() {
            if r.is_nan() || r <= 0.0 {
                report.beams_skipped += 1;
                continue;
            }
            report.beams_used += 1;
            let az = heading + scan.azimuth(i);
            let hit = !scan.is_max_range(r) && r < mapping_range;
            // a return on a cell boundary belongs to the cell behind it
            let len = if hit { r + ENDPOINT_NUDGE } else { mapping_range };
            let end = WorldPoint::new(origin.x + len * az.cos(), origin.y + len * az.sin());
            if hit {
                if let Some(cell) = self.spec.world_to_cell(end) {
                    hit_here[self.spec.linear(cell)] = true;
                }
            }
            beams.push((end, r, hit));
        }
        for (end, r, hit) in beams {
            if let Some((a, b, _)) = clip_to_grid(&self.spec, origin, end) {
                let width = self.spec.width;
                let (logodds, lo_miss, lo_min) = (&mut self.logodds, self.lo_miss, self.lo_min);
                walk(&self.spec, a, b, |cell| {
                    let idx = cell.y * width + cell.x;
                    if !hit_here[idx] {
                        let l = &mut logodds[idx];
                        let prior = if l.is_nan() { 0.0 } else { *l };
                        *l = (prior + lo_miss).max(lo_min);
                        report.misses += 1;
                    }
                    true
                });
            }
            if !hit {
                continue;
            }
            let Some(cell) = self.spec.world_to_cell(end) else {
                continue;
            };
            let l = &mut self.logodds[self.spec.linear(cell)];
            let prior = if l.is_nan() { 0.0 } else { *l };
            let cap = if r <= self.config.near_range {
                self.lo_max_near
            } else {
                // a far hit never lowers a cell that was pushed higher by
                // near-range evidence
                self.lo_max_far.max(prior)
            };
            *l = (prior + self.lo_hit).min(cap).max(self.lo_min);
            report.hits += 1;
        }
        Ok(report)
    }

    /// Marks as obstacles all cells within Manhattan distance `d_hyp` of any
    /// `Unknown`/`Uncertain` cell lying in a pose neighborhood along `path`.
    /// Cells within `exclusion` cells (Chebyshev) of `start` or `goal` are
    /// left untouched. Returns the number of newly masked cells.
    pub fn mask_hypothesis_region(
        &mut self,
        path: &Path,
        footprint: &Footprint,
        d_hyp: usize,
        start: WorldPoint,
        goal: WorldPoint,
        exclusion: usize,
    ) -> usize {
        let start_cell = self.spec.world_to_cell(start);
        let goal_cell = self.spec.world_to_cell(goal);
        let excluded = |c: &CellIndex| {
            [start_cell, goal_cell]
                .iter()
                .flatten()
                .any(|e| e.chebyshev(c) <= exclusion)
        };

        let mut seeds = Vec::new();
        let mut seen = vec![false; self.spec.cell_count()];
        for pose in &path.poses {
            let Some(center) = self.spec.world_to_cell(pose.point()) else {
                continue;
            };
            for cell in footprint.cells_around(center, &self.spec) {
                let idx = self.spec.linear(cell);
                if !seen[idx] {
                    seen[idx] = true;
                    if self.class_unchecked(idx).is_unsure() {
                        seeds.push(cell);
                    }
                }
            }
        }

        let d = d_hyp as i32;
        let mut newly = 0;
        let mut to_mask = Vec::new();
        for seed in seeds {
            for dy in -d..=d {
                let span = d - dy.abs();
                for dx in -span..=span {
                    let Some(c) = seed.offset(dx, dy) else { continue };
                    if !self.spec.contains(c) || excluded(&c) {
                        continue;
                    }
                    to_mask.push(self.spec.linear(c));
                }
            }
        }
        for idx in to_mask {
            if !self.masked[idx] {
                self.masked[idx] = true;
                newly += 1;
            }
        }
        newly
    }

    pub(crate) fn raw_logodds(&self) -> &[f64] {
        &self.logodds
    }

    pub(crate) fn raw_logodds_mut(&mut self) -> &mut [f64] {
        &mut self.logodds
    }
}

impl OccupancyView for OccupancyGrid {
    fn spec(&self) -> &GridSpec {
        &self.spec
    }

    fn class_of(&self, cell: CellIndex) -> CellClass {
        self.class_unchecked(self.spec.linear(cell))
    }
}

/// Binary view used by the thresholded baseline planners: cells at or above
/// `threshold` are obstacles, everything else (including unknown space) is
/// free.
#[derive(Debug, Clone, Copy)]
pub struct Binarized<'a> {
    grid: &'a OccupancyGrid,
    lo_threshold: f64,
}

impl<'a> Binarized<'a> {
    pub fn new(grid: &'a OccupancyGrid, threshold: f64) -> Self {
        Self {
            grid,
            lo_threshold: logit(threshold),
        }
    }
}

impl OccupancyView for Binarized<'_> {
    fn spec(&self) -> &GridSpec {
        &self.grid.spec
    }

    fn class_of(&self, cell: CellIndex) -> CellClass {
        let l = self.grid.logodds[self.grid.spec.linear(cell)];
        if !l.is_nan() && l >= self.lo_threshold {
            CellClass::Obstacle
        } else {
            CellClass::Free
        }
    }
}

pub fn bernoulli_entropy(p: f64) -> f64 {
    let term = |q: f64| if q > 0.0 { -q * q.ln() } else { 0.0 };
    term(p) + term(1.0 - p)
}

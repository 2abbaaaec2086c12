//! Footprint-aware A* over a classified grid and two-hypothesis generation.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::SQRT_2;

use thiserror::Error;

use crate::grid::{CellClass, CellIndex, GridSpec, OccupancyGrid, OccupancyView};

pub use crate::geometry::{Path, Pose, WorldPoint};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SearchError {
    #[error("start pose collides")]
    StartInCollision,
    #[error("start pose lies outside the grid")]
    StartOutOfBounds,
    #[error("no collision-free path to the goal region")]
    NoPath,
}

/// Disc-shaped goal region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoalRegion {
    pub center: WorldPoint,
    pub radius: f64,
}

impl GoalRegion {
    pub fn new(center: WorldPoint, radius: f64) -> Self {
        assert!(radius > 0.0, "goal radius must be positive");
        Self { center, radius }
    }

    pub fn contains(&self, p: WorldPoint) -> bool {
        self.center.distance(&p) <= self.radius
    }

    /// In-bounds cells whose center lies inside the region.
    pub fn cells(&self, spec: &GridSpec) -> Vec<CellIndex> {
        let r = self.radius / spec.resolution + 1.0;
        let c = (
            (self.center.x - spec.origin.x) / spec.resolution,
            (self.center.y - spec.origin.y) / spec.resolution,
        );
        let x0 = (c.0 - r).floor().max(0.0) as usize;
        let y0 = (c.1 - r).floor().max(0.0) as usize;
        let x1 = ((c.0 + r).ceil().max(0.0) as usize).min(spec.width);
        let y1 = ((c.1 + r).ceil().max(0.0) as usize).min(spec.height);
        let mut out = Vec::new();
        for y in y0..y1 {
            for x in x0..x1 {
                let cell = CellIndex::new(x, y);
                if self.contains(spec.cell_center(cell)) {
                    out.push(cell);
                }
            }
        }
        out
    }
}

/// Cell offsets covered by the robot around its center cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Footprint {
    offsets: Vec<(i32, i32)>,
}

impl Default for Footprint {
    fn default() -> Self {
        Self::square(1)
    }
}

impl Footprint {
    /// `(2r+1) x (2r+1)` block around the pose cell.
    pub fn square(radius: i32) -> Self {
        let mut offsets = Vec::new();
        for dy in -radius..=radius {
            for dx in -radius..=radius {
                offsets.push((dx, dy));
            }
        }
        Self { offsets }
    }

    /// Custom offsets; must contain the origin and be closed under 90°
    /// rotation.
    pub fn from_offsets(offsets: Vec<(i32, i32)>) -> Option<Self> {
        let has_origin = offsets.contains(&(0, 0));
        let symmetric = offsets.iter().all(|&(x, y)| offsets.contains(&(-y, x)));
        (has_origin && symmetric).then_some(Self { offsets })
    }

    pub fn offsets(&self) -> &[(i32, i32)] {
        &self.offsets
    }

    /// Chebyshev radius in cells.
    pub fn radius(&self) -> usize {
        self.offsets
            .iter()
            .map(|&(x, y)| x.unsigned_abs().max(y.unsigned_abs()) as usize)
            .max()
            .unwrap_or(0)
    }

    /// In-bounds neighborhood cells of `center`.
    pub fn cells_around<'a>(&'a self, center: CellIndex, spec: &'a GridSpec) -> impl Iterator<Item = CellIndex> + 'a {
        self.offsets
            .iter()
            .filter_map(move |&(dx, dy)| center.offset(dx, dy))
            .filter(move |c| spec.contains(*c))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnknownPolicy {
    Free,
    Obstacle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CollisionPolicy {
    pub treat_unknown_as: UnknownPolicy,
    /// Most `Uncertain` cells tolerated in one neighborhood.
    pub uncertain_budget: usize,
}

impl Default for CollisionPolicy {
    fn default() -> Self {
        Self {
            treat_unknown_as: UnknownPolicy::Free,
            uncertain_budget: 2,
        }
    }
}

/// Collision test for a robot centered in `cell`. Neighborhood cells outside
/// the grid count as obstacles.
pub fn cell_collides<V: OccupancyView + ?Sized>(
    view: &V,
    cell: CellIndex,
    footprint: &Footprint,
    policy: &CollisionPolicy,
) -> bool {
    let spec = view.spec();
    let mut uncertain = 0;
    for &(dx, dy) in footprint.offsets() {
        let Some(c) = cell.offset(dx, dy).filter(|c| spec.contains(*c)) else {
            return true;
        };
        match view.class_of(c) {
            CellClass::Obstacle => return true,
            CellClass::Unknown if policy.treat_unknown_as == UnknownPolicy::Obstacle => return true,
            CellClass::Uncertain => {
                uncertain += 1;
                if uncertain > policy.uncertain_budget {
                    return true;
                }
            }
            _ => {}
        }
    }
    false
}

pub fn pose_collides<V: OccupancyView + ?Sized>(
    view: &V,
    pose: &Pose,
    footprint: &Footprint,
    policy: &CollisionPolicy,
) -> bool {
    match view.spec().world_to_cell(pose.point()) {
        Some(cell) => cell_collides(view, cell, footprint, policy),
        None => true,
    }
}

/// Distinct `Unknown`/`Uncertain` cells in the neighborhoods of `cells`.
pub fn unsure_cells<V: OccupancyView + ?Sized>(view: &V, cells: &[CellIndex], footprint: &Footprint) -> Vec<CellIndex> {
    let spec = view.spec();
    let mut seen = vec![false; spec.cell_count()];
    let mut out = Vec::new();
    for &center in cells {
        for c in footprint.cells_around(center, spec) {
            let idx = spec.linear(c);
            if !seen[idx] {
                seen[idx] = true;
                if view.class_of(c).is_unsure() {
                    out.push(c);
                }
            }
        }
    }
    out
}

/// Cell centers of the poses of `path`, with consecutive duplicates removed.
pub fn path_cells(spec: &GridSpec, path: &Path) -> Vec<CellIndex> {
    let mut out: Vec<CellIndex> = Vec::with_capacity(path.len());
    for p in &path.poses {
        if let Some(c) = spec.world_to_cell(p.point()) {
            if out.last() != Some(&c) {
                out.push(c);
            }
        }
    }
    out
}

/// An 8-connected cell path with its exact step counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridPath {
    pub cells: Vec<CellIndex>,
    pub straight: u32,
    pub diagonal: u32,
}

impl GridPath {
    /// Length in cell units (straight step 1, diagonal step √2).
    pub fn cost(&self) -> f64 {
        step_cost(self.straight, self.diagonal)
    }

    /// World path: the exact `start` pose, the remaining cell centers, then
    /// the goal center unless the last cell is centered on it.
    pub fn to_path(&self, spec: &GridSpec, start: &Pose, goal: &GoalRegion) -> Path {
        let mut poses = Vec::with_capacity(self.cells.len() + 1);
        poses.push(*start);
        for c in self.cells.iter().skip(1) {
            let p = spec.cell_center(*c);
            poses.push(Pose::unoriented(p.x, p.y));
        }
        let last = poses.last().expect("start pose").point();
        if last.distance(&goal.center) > 1e-9 {
            poses.push(Pose::unoriented(goal.center.x, goal.center.y));
        }
        Path::new(poses)
    }
}

fn step_cost(straight: u32, diagonal: u32) -> f64 {
    straight as f64 + diagonal as f64 * SQRT_2
}

fn octile(a: CellIndex, b: CellIndex) -> f64 {
    let dx = a.x.abs_diff(b.x) as f64;
    let dy = a.y.abs_diff(b.y) as f64;
    let (lo, hi) = if dx < dy { (dx, dy) } else { (dy, dx) };
    (hi - lo) + SQRT_2 * lo
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AStarOptions {
    /// Skip the collision test on the start cell. Used when replanning from
    /// wherever the robot happens to be.
    pub exempt_start: bool,
}

#[derive(Debug, PartialEq)]
struct OpenEntry {
    f: f64,
    g: f64,
    idx: usize,
}

impl Eq for OpenEntry {}

impl Ord for OpenEntry {
    // BinaryHeap pops the greatest: lowest f, then largest g, then lowest index
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| self.g.total_cmp(&other.g))
            .then_with(|| other.idx.cmp(&self.idx))
    }
}

impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

const NEIGHBORS: [(i32, i32); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];

/// Shortest 8-connected path from the start cell to any cell whose center
/// lies in `goal`, over non-colliding cells.
pub fn astar<V: OccupancyView + ?Sized>(
    view: &V,
    start: &Pose,
    goal: &GoalRegion,
    footprint: &Footprint,
    policy: &CollisionPolicy,
) -> Result<GridPath, SearchError> {
    astar_with(view, start, goal, footprint, policy, AStarOptions::default())
}

pub fn astar_with<V: OccupancyView + ?Sized>(
    view: &V,
    start: &Pose,
    goal: &GoalRegion,
    footprint: &Footprint,
    policy: &CollisionPolicy,
    options: AStarOptions,
) -> Result<GridPath, SearchError> {
    let spec = *view.spec();
    let start_cell = spec.world_to_cell(start.point()).ok_or(SearchError::StartOutOfBounds)?;
    if !options.exempt_start && cell_collides(view, start_cell, footprint, policy) {
        return Err(SearchError::StartInCollision);
    }
    let goal_cells = goal.cells(&spec);
    if goal_cells.is_empty() {
        return Err(SearchError::NoPath);
    }
    let n = spec.cell_count();
    let mut is_goal = vec![false; n];
    for c in &goal_cells {
        is_goal[spec.linear(*c)] = true;
    }
    let heuristic = |c: CellIndex| goal_cells.iter().map(|g| octile(c, *g)).fold(f64::INFINITY, f64::min);

    // 0 = unvisited, 1 = free, 2 = colliding
    let mut collision = vec![0u8; n];
    let mut steps = vec![(u32::MAX, u32::MAX); n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();

    let s = spec.linear(start_cell);
    steps[s] = (0, 0);
    open.push(OpenEntry {
        f: heuristic(start_cell),
        g: 0.0,
        idx: s,
    });

    while let Some(OpenEntry { idx, .. }) = open.pop() {
        if closed[idx] {
            continue;
        }
        closed[idx] = true;
        if is_goal[idx] {
            let (straight, diagonal) = steps[idx];
            let mut cells = vec![spec.from_linear(idx)];
            let mut cur = idx;
            while parent[cur] != usize::MAX {
                cur = parent[cur];
                cells.push(spec.from_linear(cur));
            }
            cells.reverse();
            return Ok(GridPath {
                cells,
                straight,
                diagonal,
            });
        }
        let cell = spec.from_linear(idx);
        let (gs, gd) = steps[idx];
        for (dx, dy) in NEIGHBORS {
            let Some(next) = cell.offset(dx, dy).filter(|c| spec.contains(*c)) else {
                continue;
            };
            let j = spec.linear(next);
            if closed[j] {
                continue;
            }
            if collision[j] == 0 {
                collision[j] = if cell_collides(view, next, footprint, policy) {
                    2
                } else {
                    1
                };
            }
            if collision[j] == 2 {
                continue;
            }
            let cand = if dx != 0 && dy != 0 { (gs, gd + 1) } else { (gs + 1, gd) };
            let g = step_cost(cand.0, cand.1);
            let better = steps[j].0 == u32::MAX || g < step_cost(steps[j].0, steps[j].1);
            if better {
                steps[j] = cand;
                parent[j] = idx;
                open.push(OpenEntry {
                    f: g + heuristic(next),
                    g,
                    idx: j,
                });
            }
        }
    }
    Err(SearchError::NoPath)
}

/// Parameters of the hypothesis generation stage.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisConfig {
    pub policy: CollisionPolicy,
    /// Masking distance around unsure cells of the first hypothesis, cells.
    pub d_hyp: usize,
}

impl Default for HypothesisConfig {
    fn default() -> Self {
        Self {
            policy: CollisionPolicy::default(),
            d_hyp: 4,
        }
    }
}

/// A planned path hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub grid_path: GridPath,
    pub path: Path,
}

impl Hypothesis {
    pub fn from_grid_path(grid_path: GridPath, spec: &GridSpec, start: &Pose, goal: &GoalRegion) -> Self {
        let path = grid_path.to_path(spec, start, goal);
        Self { grid_path, path }
    }

    /// Length in meters.
    pub fn length(&self) -> f64 {
        self.path.length()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisSet {
    /// One or two hypotheses, first is the shortest-path hypothesis.
    pub hypotheses: Vec<Hypothesis>,
    pub needs_nbv: bool,
}

/// Exclusion radius around start and goal when masking, in cells.
pub fn mask_exclusion(footprint: &Footprint) -> usize {
    footprint.radius() + 1
}

/// Plans up to two hypotheses. The first is optimistic about unknown space;
/// if it crosses any unsure cell, a second one is planned on a copy of the
/// map where a band around those cells is marked as obstacle.
pub fn plan_hypotheses(
    grid: &OccupancyGrid,
    start: &Pose,
    goal: &GoalRegion,
    footprint: &Footprint,
    config: &HypothesisConfig,
    options: AStarOptions,
) -> Result<HypothesisSet, SearchError> {
    let spec = *grid.spec();
    let first = astar_with(grid, start, goal, footprint, &config.policy, options)?;
    let first = Hypothesis::from_grid_path(first, &spec, start, goal);
    if unsure_cells(grid, &first.grid_path.cells, footprint).is_empty() {
        return Ok(HypothesisSet {
            hypotheses: vec![first],
            needs_nbv: false,
        });
    }
    let mut masked = grid.snapshot();
    let goal_pose = first.path.last().expect("nonempty path").point();
    masked.mask_hypothesis_region(
        &first.path,
        footprint,
        config.d_hyp,
        start.point(),
        goal_pose,
        mask_exclusion(footprint),
    );
    let second = astar_with(
        &masked,
        start,
        goal,
        footprint,
        &config.policy,
        AStarOptions { exempt_start: true },
    );
    match second {
        Ok(gp) => Ok(HypothesisSet {
            hypotheses: vec![first, Hypothesis::from_grid_path(gp, &spec, start, goal)],
            needs_nbv: true,
        }),
        Err(_) => Ok(HypothesisSet {
            hypotheses: vec![first],
            needs_nbv: false,
        }),
    }
}

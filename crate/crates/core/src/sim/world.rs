//! Ground-truth world geometry and the environment file format.
//!
//! ```text
//! nbv-world 1
//! name open
//! bounds xmin ymin xmax ymax
//! boundary_walls
//! obstacle box x0 y0 x1 y1
//! obstacle wall x0 y0 x1 y1
//! goal x y radius
//! start <group> x y heading_deg
//! ```
//! Blank lines and `#` comments are ignored. `boundary_walls` adds the four
//! sides of `bounds` as wall segments.

use std::fmt;

use thiserror::Error;

use crate::geometry::{Pose, WorldPoint};
use crate::grid::{GridError, GridSpec};
use crate::search::GoalRegion;

const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorldError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unknown environment {0:?}")]
    UnknownEnvironment(String),
    #[error("invalid world: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Obstacle {
    /// Axis-aligned box given by two corners.
    Box { min: WorldPoint, max: WorldPoint },
    /// Zero-thickness wall segment.
    Wall { a: WorldPoint, b: WorldPoint },
}

impl Obstacle {
    fn contains(&self, p: WorldPoint) -> bool {
        match *self {
            Obstacle::Box { min, max } => p.x > min.x && p.x < max.x && p.y > min.y && p.y < max.y,
            Obstacle::Wall { .. } => false,
        }
    }

    /// Euclidean distance from `p` to the obstacle (zero inside a box).
    fn distance(&self, p: WorldPoint) -> f64 {
        match *self {
            Obstacle::Box { min, max } => {
                let dx = (min.x - p.x).max(0.0).max(p.x - max.x);
                let dy = (min.y - p.y).max(0.0).max(p.y - max.y);
                dx.hypot(dy)
            }
            Obstacle::Wall { a, b } => segment_distance(p, a, b),
        }
    }

    /// Smallest `t >= 0` where the ray `p + t * dir` touches the obstacle.
    fn ray_hit(&self, p: WorldPoint, dir: (f64, f64)) -> Option<f64> {
        match *self {
            Obstacle::Box { min, max } => {
                // slab method
                let mut t0 = 0.0_f64;
                let mut t1 = f64::INFINITY;
                for (o, d, lo, hi) in [(p.x, dir.0, min.x, max.x), (p.y, dir.1, min.y, max.y)] {
                    if d.abs() < 1e-15 {
                        if o < lo || o > hi {
                            return None;
                        }
                    } else {
                        let a = (lo - o) / d;
                        let b = (hi - o) / d;
                        t0 = t0.max(a.min(b));
                        t1 = t1.min(a.max(b));
                    }
                }
                (t0 <= t1).then_some(t0)
            }
            Obstacle::Wall { a, b } => {
                let e = (b.x - a.x, b.y - a.y);
                let denom = cross(dir, e);
                if denom.abs() < 1e-15 {
                    return None;
                }
                let w = (a.x - p.x, a.y - p.y);
                let t = cross(w, e) / denom;
                let u = cross(w, dir) / denom;
                (t >= 0.0 && (0.0..=1.0).contains(&u)).then_some(t)
            }
        }
    }
}

fn cross(a: (f64, f64), b: (f64, f64)) -> f64 {
    a.0 * b.1 - a.1 * b.0
}

fn segment_distance(p: WorldPoint, a: WorldPoint, b: WorldPoint) -> f64 {
    let e = (b.x - a.x, b.y - a.y);
    let len2 = e.0 * e.0 + e.1 * e.1;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.x - a.x) * e.0 + (p.y - a.y) * e.1) / len2).clamp(0.0, 1.0)
    };
    WorldPoint::new(a.x + t * e.0, a.y + t * e.1).distance(&p)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldModel {
    pub name: String,
    pub min: WorldPoint,
    pub max: WorldPoint,
    pub obstacles: Vec<Obstacle>,
}

impl WorldModel {
    pub fn new(name: impl Into<String>, min: WorldPoint, max: WorldPoint) -> Result<Self, WorldError> {
        if !(min.x < max.x && min.y < max.y) {
            return Err(WorldError::Invalid("empty bounds".into()));
        }
        Ok(Self {
            name: name.into(),
            min,
            max,
            obstacles: Vec::new(),
        })
    }

    pub fn add(&mut self, obstacle: Obstacle) -> Result<(), WorldError> {
        let pts = match obstacle {
            Obstacle::Box { min, max } => {
                if !(min.x < max.x && min.y < max.y) {
                    return Err(WorldError::Invalid("degenerate box".into()));
                }
                [min, max]
            }
            Obstacle::Wall { a, b } => [a, b],
        };
        let eps = 1e-9;
        for p in pts {
            if p.x < self.min.x - eps || p.x > self.max.x + eps || p.y < self.min.y - eps || p.y > self.max.y + eps {
                return Err(WorldError::Invalid(format!(
                    "obstacle corner ({}, {}) outside bounds",
                    p.x, p.y
                )));
            }
        }
        self.obstacles.push(obstacle);
        Ok(())
    }

    pub fn add_boundary_walls(&mut self) {
        let (a, b) = (self.min, self.max);
        let c = [a, WorldPoint::new(b.x, a.y), b, WorldPoint::new(a.x, b.y)];
        for i in 0..4 {
            self.obstacles.push(Obstacle::Wall {
                a: c[i],
                b: c[(i + 1) % 4],
            });
        }
    }

    pub fn in_bounds(&self, p: WorldPoint) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn point_in_obstacle(&self, p: WorldPoint) -> bool {
        self.obstacles.iter().any(|o| o.contains(p))
    }

    /// Distance to the nearest obstacle surface, or to the bounds if closer.
    pub fn clearance(&self, p: WorldPoint) -> f64 {
        let walls = (p.x - self.min.x)
            .min(self.max.x - p.x)
            .min(p.y - self.min.y)
            .min(self.max.y - p.y);
        self.obstacles.iter().map(|o| o.distance(p)).fold(walls, f64::min)
    }

    /// Does a disc of `radius` at `p` overlap an obstacle or leave the bounds?
    pub fn disc_collides(&self, p: WorldPoint, radius: f64) -> bool {
        self.point_in_obstacle(p) || self.clearance(p) < radius
    }

    /// First obstacle hit along the ray from `p` at heading `angle`, if any
    /// lies within `max_range`.
    pub fn ray_distance(&self, p: WorldPoint, angle: f64, max_range: f64) -> Option<f64> {
        let dir = (angle.cos(), angle.sin());
        self.obstacles
            .iter()
            .filter_map(|o| o.ray_hit(p, dir))
            .filter(|&t| t < max_range)
            .min_by(f64::total_cmp)
    }

    /// Occupancy grid geometry covering the world bounds.
    pub fn grid_spec(&self, resolution: f64) -> Result<GridSpec, GridError> {
        GridSpec::covering(self.min, self.max, resolution)
    }
}

/// A named start pose belonging to a start group.
#[derive(Debug, Clone, PartialEq)]
pub struct StartPose {
    pub group: String,
    pub pose: Pose,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    pub world: WorldModel,
    pub goal: GoalRegion,
    pub starts: Vec<StartPose>,
}

impl Environment {
    pub fn name(&self) -> &str {
        &self.world.name
    }

    pub fn groups(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for s in &self.starts {
            if !out.contains(&s.group) {
                out.push(s.group.clone());
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<Environment, WorldError> {
        let err = |line: usize, msg: String| WorldError::Parse { line, msg };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());

        let (n, header) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
        match header.split_whitespace().collect::<Vec<_>>().as_slice() {
            ["nbv-world", v] if v.parse() == Ok(FORMAT_VERSION) => {}
            _ => return Err(err(n, format!("expected `nbv-world {FORMAT_VERSION}` header"))),
        }

        let mut name = None;
        let mut world: Option<WorldModel> = None;
        let mut goal = None;
        let mut starts = Vec::new();
        for (n, line) in lines {
            let tok: Vec<&str> = line.split_whitespace().collect();
            let nums = |from: usize, count: usize| -> Result<Vec<f64>, WorldError> {
                if tok.len() != from + count {
                    return Err(err(n, format!("expected {count} numbers in {line:?}")));
                }
                tok[from..]
                    .iter()
                    .map(|t| t.parse::<f64>().map_err(|e| err(n, format!("{t:?}: {e}"))))
                    .collect()
            };
            match tok[0] {
                "name" if tok.len() == 2 => name = Some(tok[1].to_string()),
                "bounds" => {
                    let v = nums(1, 4)?;
                    let w = WorldModel::new(
                        name.clone().unwrap_or_default(),
                        WorldPoint::new(v[0], v[1]),
                        WorldPoint::new(v[2], v[3]),
                    )
                    .map_err(|e| err(n, e.to_string()))?;
                    world = Some(w);
                }
                "boundary_walls" => world
                    .as_mut()
                    .ok_or_else(|| err(n, "boundary_walls before bounds".into()))?
                    .add_boundary_walls(),
                "obstacle" if tok.len() > 1 => {
                    let v = nums(2, 4)?;
                    let (a, b) = (WorldPoint::new(v[0], v[1]), WorldPoint::new(v[2], v[3]));
                    let obstacle = match tok[1] {
                        "box" => Obstacle::Box {
                            min: WorldPoint::new(a.x.min(b.x), a.y.min(b.y)),
                            max: WorldPoint::new(a.x.max(b.x), a.y.max(b.y)),
                        },
                        "wall" => Obstacle::Wall { a, b },
                        other => return Err(err(n, format!("unknown obstacle kind {other:?}"))),
                    };
                    world
                        .as_mut()
                        .ok_or_else(|| err(n, "obstacle before bounds".into()))?
                        .add(obstacle)
                        .map_err(|e| err(n, e.to_string()))?;
                }
                "goal" => {
                    let v = nums(1, 3)?;
                    if !(v[2] > 0.0) {
                        return Err(err(n, "goal radius must be positive".into()));
                    }
                    goal = Some(GoalRegion::new(WorldPoint::new(v[0], v[1]), v[2]));
                }
                "start" if tok.len() > 1 => {
                    let v = nums(2, 3)?;
                    starts.push(StartPose {
                        group: tok[1].to_string(),
                        pose: Pose::new(v[0], v[1], v[2].to_radians()),
                    });
                }
                _ => return Err(err(n, format!("unrecognized line {line:?}"))),
            }
        }
        let mut world = world.ok_or_else(|| err(0, "missing bounds".into()))?;
        if let Some(name) = name {
            world.name = name;
        }
        let goal = goal.ok_or_else(|| err(0, "missing goal".into()))?;
        if world.point_in_obstacle(goal.center) || !world.in_bounds(goal.center) {
            return Err(WorldError::Invalid("goal inside an obstacle or out of bounds".into()));
        }
        for s in &starts {
            if world.point_in_obstacle(s.pose.point()) || !world.in_bounds(s.pose.point()) {
                return Err(WorldError::Invalid(format!("start {} blocked", s.pose)));
            }
        }
        Ok(Environment { world, goal, starts })
    }

    /// One of the bundled environments: `open` or `room`.
    pub fn builtin(name: &str) -> Result<Environment, WorldError> {
        let text = match name {
            "open" => include_str!("../../envs/open.env"),
            "room" => include_str!("../../envs/room.env"),
            _ => return Err(WorldError::UnknownEnvironment(name.to_string())),
        };
        Environment::parse(text)
    }
}

impl fmt::Display for Environment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "nbv-world {FORMAT_VERSION}")?;
        writeln!(f, "name {}", self.world.name)?;
        writeln!(
            f,
            "bounds {} {} {} {}",
            self.world.min.x, self.world.min.y, self.world.max.x, self.world.max.y
        )?;
        for o in &self.world.obstacles {
            match o {
                Obstacle::Box { min, max } => writeln!(f, "obstacle box {} {} {} {}", min.x, min.y, max.x, max.y)?,
                Obstacle::Wall { a, b } => writeln!(f, "obstacle wall {} {} {} {}", a.x, a.y, b.x, b.y)?,
            }
        }
        let g = self.goal;
        writeln!(f, "goal {} {} {}", g.center.x, g.center.y, g.radius)?;
        for s in &self.starts {
            writeln!(
                f,
                "start {} {} {} {}",
                s.group,
                s.pose.x,
                s.pose.y,
                s.pose.heading().to_degrees()
            )?;
        }
        Ok(())
    }
}

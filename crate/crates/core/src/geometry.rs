//! Planar poses, points and paths.

use std::f64::consts::PI;
use std::fmt;

/// A point in world coordinates (meters).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorldPoint {
    pub x: f64,
    pub y: f64,
}

impl WorldPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &WorldPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Wraps an angle into `[-π, π)`.
pub fn wrap_angle(theta: f64) -> f64 {
    let wrapped = (theta + PI).rem_euclid(2.0 * PI) - PI;
    // rem_euclid can round up to exactly 2π for tiny negative inputs
    if wrapped >= PI {
        wrapped - 2.0 * PI
    } else {
        wrapped
    }
}

/// A planar pose. The heading may be left unspecified, in which case a
/// tracker is free to choose any orientation when reaching it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: Option<f64>,
}

impl Pose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: Some(wrap_angle(theta)),
        }
    }

    pub fn unoriented(x: f64, y: f64) -> Self {
        Self { x, y, theta: None }
    }

    pub fn point(&self) -> WorldPoint {
        WorldPoint::new(self.x, self.y)
    }

    /// Heading, or zero when unspecified.
    pub fn heading(&self) -> f64 {
        self.theta.unwrap_or(0.0)
    }

    pub fn distance(&self, other: &Pose) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl fmt::Display for Pose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.theta {
            Some(t) => write!(f, "{:.6} {:.6} {:.6}", self.x, self.y, t),
            None => write!(f, "{:.6} {:.6} nan", self.x, self.y),
        }
    }
}

/// An ordered sequence of poses from the robot to the goal region.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Path {
    pub poses: Vec<Pose>,
}

impl Path {
    pub fn new(poses: Vec<Pose>) -> Self {
        Self { poses }
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn first(&self) -> Option<&Pose> {
        self.poses.first()
    }

    pub fn last(&self) -> Option<&Pose> {
        self.poses.last()
    }

    /// Summed Euclidean length of consecutive segments, in meters.
    pub fn length(&self) -> f64 {
        self.poses.windows(2).map(|w| w[0].distance(&w[1])).sum()
    }

    /// One line per pose: `x y theta` (`nan` for an unspecified heading).
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for p in &self.poses {
            out.push_str(&p.to_string());
            out.push('\n');
        }
        out
    }

    /// Parses the output of [`Path::dump`].
    pub fn parse_dump(text: &str) -> Option<Path> {
        let mut poses = Vec::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let mut it = line.split_whitespace();
            let x: f64 = it.next()?.parse().ok()?;
            let y: f64 = it.next()?.parse().ok()?;
            let t: f64 = it.next()?.parse().ok()?;
            poses.push(Pose {
                x,
                y,
                theta: if t.is_nan() { None } else { Some(t) },
            });
        }
        Some(Path::new(poses))
    }
}

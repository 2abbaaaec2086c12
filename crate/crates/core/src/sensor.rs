//! Planar depth sensor: ground-truth rendering and edge-concentrated noise.
//!
//! The noise model works on a 1D scan. Depth discontinuities are detected
//! between neighboring beams and every beam within `window` beams of an edge
//! lying beyond the perfect-sensing distance `s` is pushed outward:
//!
//! ```text
//! i'(p_w) = max(i(p_w), rho * i(p_w) * (w - d(p_e, p_w)) * D^2 + sigma)
//! D       = max(0, i(p_w) - s)
//! sigma   ~ Normal(a * D, b * D^2)        (mean, variance)
//! ```
//!
//! Candidates are computed from the uncorrupted depth and combined with a
//! running maximum, so a beam covered by several edge windows ends up with
//! the largest candidate.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::geometry::Pose;
use crate::sim::WorldModel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SensorError {
    #[error("sensor pose ({x:.3}, {y:.3}) lies inside an obstacle")]
    PoseInObstacle { x: f64, y: f64 },
    #[error("sensor pose ({x:.3}, {y:.3}) lies outside the world")]
    PoseOutOfBounds { x: f64, y: f64 },
    #[error("invalid sensor spec: {0}")]
    InvalidSpec(String),
}

/// Noise model coefficients: `rho` scales the deterministic push, `a` and `b`
/// the mean and variance of the random term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseParams {
    pub rho: f64,
    pub a: f64,
    pub b: f64,
}

impl NoiseParams {
    pub const OFF: NoiseParams = NoiseParams {
        rho: 0.0,
        a: 0.0,
        b: 0.0,
    };
    pub const LOW: NoiseParams = NoiseParams {
        rho: 0.01,
        a: 0.05,
        b: 0.002,
    };
    pub const HIGH: NoiseParams = NoiseParams {
        rho: 0.05,
        a: 0.125,
        b: 0.005,
    };

    pub fn is_off(&self) -> bool {
        self.rho == 0.0 && self.a == 0.0 && self.b == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorSpec {
    /// Horizontal field of view in degrees.
    pub fov_deg: f64,
    pub beams: usize,
    /// Longest range the sensor reports, meters.
    pub max_range: f64,
    /// Perfect-sensing distance `s`, meters.
    pub perfect_range: f64,
    /// Edge window half-width `w`, beams.
    pub window: usize,
    /// Minimum depth jump between neighboring beams that counts as an edge.
    pub edge_threshold: f64,
    pub noise: NoiseParams,
}

impl Default for SensorSpec {
    fn default() -> Self {
        Self {
            fov_deg: 107.0,
            beams: 672,
            max_range: 20.0,
            perfect_range: 3.0,
            window: 10,
            edge_threshold: 0.5,
            noise: NoiseParams::OFF,
        }
    }
}

impl SensorSpec {
    pub fn with_noise(mut self, noise: NoiseParams) -> Self {
        self.noise = noise;
        self
    }

    pub fn fov(&self) -> f64 {
        self.fov_deg.to_radians()
    }

    pub fn validate(&self) -> Result<(), SensorError> {
        let bad = |m: &str| Err(SensorError::InvalidSpec(m.to_string()));
        if !(self.fov_deg > 0.0 && self.fov_deg < 180.0) {
            return bad("fov must lie in (0, 180) degrees");
        }
        if self.beams < 2 {
            return bad("need at least two beams");
        }
        if !(self.perfect_range > 0.0 && self.perfect_range < self.max_range) {
            return bad("need 0 < perfect_range < max_range");
        }
        if self.window < 1 {
            return bad("window must be at least one beam");
        }
        let n = self.noise;
        if n.rho < 0.0 || n.a < 0.0 || n.b < 0.0 {
            return bad("noise coefficients must be non-negative");
        }
        Ok(())
    }

    /// Is `bearing` (relative to the sensor heading) inside the field of view?
    pub fn in_fov(&self, bearing: f64) -> bool {
        crate::geometry::wrap_angle(bearing).abs() <= self.fov() / 2.0
    }
}

/// One planar depth scan. Beam `i` points at `azimuth(i)` relative to the
/// sensor heading, sweeping counter-clockwise across the field of view.
/// A value equal to `max_range` is a no-return beam.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthScan {
    pub ranges: Vec<f64>,
    pub fov: f64,
    pub max_range: f64,
}

impl DepthScan {
    pub fn new(ranges: Vec<f64>, fov: f64, max_range: f64) -> Self {
        Self { ranges, fov, max_range }
    }

    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    pub fn azimuth(&self, i: usize) -> f64 {
        let n = self.ranges.len();
        if n < 2 {
            return 0.0;
        }
        -self.fov / 2.0 + self.fov * i as f64 / (n - 1) as f64
    }

    pub fn is_max_range(&self, r: f64) -> bool {
        r >= self.max_range
    }

    /// Debug dump against the uncorrupted scan, one line per beam:
    /// `index azimuth_deg truth_m noisy_m`.
    pub fn dump_against(&self, truth: &DepthScan) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        for (i, (t, n)) in truth.ranges.iter().zip(&self.ranges).enumerate() {
            let _ = writeln!(out, "{i} {:.4} {t:.4} {n:.4}", self.azimuth(i).to_degrees());
        }
        out
    }
}

/// Exact per-beam distance to the nearest obstacle boundary.
pub fn render_truth(world: &WorldModel, pose: &Pose, spec: &SensorSpec) -> Result<DepthScan, SensorError> {
    let p = pose.point();
    if !world.in_bounds(p) {
        return Err(SensorError::PoseOutOfBounds { x: p.x, y: p.y });
    }
    if world.point_in_obstacle(p) {
        return Err(SensorError::PoseInObstacle { x: p.x, y: p.y });
    }
    let mut scan = DepthScan::new(vec![0.0; spec.beams], spec.fov(), spec.max_range);
    let heading = pose.heading();
    for i in 0..spec.beams {
        let az = heading + scan.azimuth(i);
        scan.ranges[i] = world.ray_distance(p, az, spec.max_range).unwrap_or(spec.max_range);
    }
    Ok(scan)
}

/// Indices of beams on the near side of depth discontinuities larger than
/// `threshold`. Discontinuities involving a no-return beam are ignored.
pub fn detect_edges(scan: &DepthScan, threshold: f64) -> Vec<usize> {
    let mut edges = Vec::new();
    for e in 1..scan.ranges.len() {
        let (prev, cur) = (scan.ranges[e - 1], scan.ranges[e]);
        if scan.is_max_range(prev) || scan.is_max_range(cur) || prev.is_nan() || cur.is_nan() {
            continue;
        }
        if (cur - prev).abs() > threshold {
            edges.push(if cur < prev { e } else { e - 1 });
        }
    }
    edges.sort_unstable();
    edges.dedup();
    edges
}

/// Depth candidate for a beam at `range` meters lying `window_dist` beams
/// from an edge, before the running maximum is applied.
pub fn window_candidate<R: Rng + ?Sized>(range: f64, window_dist: usize, spec: &SensorSpec, rng: &mut R) -> f64 {
    let beyond = (range - spec.perfect_range).max(0.0);
    let n = spec.noise;
    let sigma = if beyond > 0.0 {
        Normal::new(n.a * beyond, n.b.sqrt() * beyond)
            .expect("non-negative std dev")
            .sample(rng)
    } else {
        0.0
    };
    let span = spec.window.saturating_sub(window_dist) as f64;
    n.rho * range * span * beyond * beyond + sigma
}

/// Applies the edge noise model. Beams within the perfect-sensing distance
/// and no-return beams are left bit-identical.
pub fn corrupt<R: Rng + ?Sized>(scan: &DepthScan, edges: &[usize], spec: &SensorSpec, rng: &mut R) -> DepthScan {
    let mut out = scan.clone();
    let n = scan.ranges.len();
    let s = spec.perfect_range;
    for &e in edges {
        let edge_range = scan.ranges[e];
        if !(edge_range > s) || scan.is_max_range(edge_range) {
            continue;
        }
        let lo = e.saturating_sub(spec.window);
        let hi = (e + spec.window).min(n - 1);
        for wi in lo..=hi {
            let current = scan.ranges[wi];
            if !(current > s) || scan.is_max_range(current) {
                continue;
            }
            let candidate = window_candidate(current, e.abs_diff(wi), spec, rng);
            if candidate > out.ranges[wi] {
                out.ranges[wi] = candidate.min(scan.max_range);
            }
        }
    }
    out
}

/// Renders a scan and corrupts it with the sensor's noise parameters.
pub fn sense<R: Rng + ?Sized>(
    world: &WorldModel,
    pose: &Pose,
    spec: &SensorSpec,
    rng: &mut R,
) -> Result<DepthScan, SensorError> {
    let truth = render_truth(world, pose, spec)?;
    if spec.noise.is_off() {
        return Ok(truth);
    }
    let edges = detect_edges(&truth, spec.edge_threshold);
    Ok(corrupt(&truth, &edges, spec, rng))
}

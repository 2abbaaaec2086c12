//! Pure-pursuit waypoint tracking for a unicycle robot.

use crate::geometry::{wrap_angle, Path, Pose, WorldPoint};
use crate::sim::WorldModel;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotParams {
    pub v_max: f64,
    pub w_max: f64,
    /// Radius of the contact disc, meters.
    pub radius: f64,
    /// Pure-pursuit lookahead distance along the path, meters.
    pub lookahead: f64,
    /// Distance to the last waypoint at which translation stops.
    pub stop_distance: f64,
    /// Heading tolerance when aligning with an oriented last waypoint.
    pub align_tolerance: f64,
}

impl Default for RobotParams {
    fn default() -> Self {
        Self {
            v_max: 1.0,
            w_max: 2.0,
            radius: 0.25,
            lookahead: 0.5,
            stop_distance: 0.1,
            align_tolerance: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotState {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl RobotState {
    pub fn from_pose(p: &Pose) -> Self {
        Self {
            x: p.x,
            y: p.y,
            theta: p.heading(),
        }
    }

    pub fn pose(&self) -> Pose {
        Pose::new(self.x, self.y, self.theta)
    }

    pub fn point(&self) -> WorldPoint {
        WorldPoint::new(self.x, self.y)
    }
}

/// Velocity command.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Command {
    pub v: f64,
    pub w: f64,
}

/// Outcome of one integration step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResult {
    /// Arc length actually driven.
    pub distance: f64,
    /// Motion was cut short by an obstacle.
    pub contact: bool,
    /// At the last waypoint (and aligned with it when it is oriented).
    pub finished: bool,
}

/// Exact unicycle motion under constant `(v, w)` for `dt` seconds.
pub fn integrate(s: &RobotState, cmd: Command, dt: f64) -> RobotState {
    let th = s.theta;
    let (x, y) = if cmd.w.abs() < 1e-9 {
        (s.x + cmd.v * dt * th.cos(), s.y + cmd.v * dt * th.sin())
    } else {
        let r = cmd.v / cmd.w;
        let th1 = th + cmd.w * dt;
        (s.x + r * (th1.sin() - th.sin()), s.y - r * (th1.cos() - th.cos()))
    };
    RobotState {
        x,
        y,
        theta: wrap_angle(th + cmd.w * dt),
    }
}

/// Follows one path. Progress along the path is monotone: the closest point
/// is searched only forward of the previous one.
#[derive(Debug, Clone)]
pub struct Tracker {
    params: RobotParams,
    points: Vec<WorldPoint>,
    goal_theta: Option<f64>,
    /// Index of the segment the robot was last closest to.
    segment: usize,
}

impl Tracker {
    pub fn new(params: RobotParams, path: &Path) -> Self {
        let mut points: Vec<WorldPoint> = Vec::with_capacity(path.len());
        for p in &path.poses {
            if points.last().is_none_or(|q| q.distance(&p.point()) > 1e-9) {
                points.push(p.point());
            }
        }
        Self {
            params,
            points,
            goal_theta: path.last().and_then(|p| p.theta),
            segment: 0,
        }
    }

    pub fn params(&self) -> &RobotParams {
        &self.params
    }

    fn closest_on_segment(&self, i: usize, p: WorldPoint) -> (f64, f64) {
        let (a, b) = (self.points[i], self.points[i + 1]);
        let e = (b.x - a.x, b.y - a.y);
        let len2 = e.0 * e.0 + e.1 * e.1;
        let t = (((p.x - a.x) * e.0 + (p.y - a.y) * e.1) / len2).clamp(0.0, 1.0);
        let q = WorldPoint::new(a.x + t * e.0, a.y + t * e.1);
        (t, q.distance(&p))
    }

    /// Point `lookahead` meters along the path from the closest point.
    fn lookahead_point(&mut self, p: WorldPoint) -> WorldPoint {
        let n = self.points.len();
        if n == 1 {
            return self.points[0];
        }
        // forward search over a short window keeps progress monotone
        let mut best = (self.segment, f64::INFINITY, 0.0);
        // path length from the best point so far to the end of segment i
        let mut walked = 0.0;
        for i in self.segment..n - 1 {
            let (t, d) = self.closest_on_segment(i, p);
            let len = self.points[i].distance(&self.points[i + 1]);
            if d < best.1 - 1e-12 {
                best = (i, d, t);
                walked = len * (1.0 - t);
            } else {
                walked += len;
            }
            if walked > 2.0 * self.params.lookahead + best.1 {
                break;
            }
        }
        self.segment = best.0;
        let (i, t) = (best.0, best.2);
        let a = self.points[i];
        let b = self.points[i + 1];
        let mut remaining = self.params.lookahead + a.distance(&b) * t;
        for j in i..n - 1 {
            let seg = self.points[j].distance(&self.points[j + 1]);
            if remaining <= seg {
                let f = remaining / seg;
                let (a, b) = (self.points[j], self.points[j + 1]);
                return WorldPoint::new(a.x + f * (b.x - a.x), a.y + f * (b.y - a.y));
            }
            remaining -= seg;
        }
        self.points[n - 1]
    }

    /// Pure-pursuit command for the current state.
    pub fn command(&mut self, s: &RobotState) -> (Command, bool) {
        let p = self.params;
        let Some(&last) = self.points.last() else {
            return (Command { v: 0.0, w: 0.0 }, true);
        };
        let at_end = self.segment + 2 >= self.points.len() || self.points.len() == 1;
        if at_end && s.point().distance(&last) <= p.stop_distance {
            return match self.goal_theta {
                Some(th) if wrap_angle(th - s.theta).abs() > p.align_tolerance => {
                    let err = wrap_angle(th - s.theta);
                    let w = (4.0 * err).clamp(-p.w_max, p.w_max);
                    (Command { v: 0.0, w }, false)
                }
                _ => (Command { v: 0.0, w: 0.0 }, true),
            };
        }
        let target = self.lookahead_point(s.point());
        let alpha = wrap_angle((target.y - s.y).atan2(target.x - s.x) - s.theta);
        let v = p.v_max * (1.0 - 2.0 * alpha.abs() / std::f64::consts::PI).max(0.0);
        let w = if alpha.abs() > std::f64::consts::FRAC_PI_2 {
            p.w_max * alpha.signum()
        } else {
            (2.0 * p.v_max * alpha.sin() / p.lookahead).clamp(-p.w_max, p.w_max)
        };
        // slow down on the final approach so the robot stops on the point
        let to_end = s.point().distance(&last);
        let v = if at_end {
            v.min(to_end / 0.5 * p.v_max).max(0.0)
        } else {
            v
        };
        (Command { v, w }, false)
    }

    /// Advances the robot by one step. Translation stops at contact and the
    /// remainder slides along the obstacle surface.
    pub fn step(&mut self, s: &mut RobotState, world: &WorldModel, dt: f64) -> StepResult {
        let (cmd, finished) = self.command(s);
        let r = self.params.radius;
        let next = integrate(s, cmd, dt);
        if cmd.v == 0.0 || !world.disc_collides(next.point(), r) {
            *s = next;
            return StepResult {
                distance: cmd.v.abs() * dt,
                contact: false,
                finished,
            };
        }
        // largest collision-free fraction of the step
        let lo = free_fraction(|f| world.disc_collides(integrate(s, cmd, dt * f).point(), r));
        let moved = integrate(s, cmd, dt * lo);
        // the rest of the translation slides along the contact
        let rest = (next.x - moved.x, next.y - moved.y);
        let n = contact_normal(world, moved.point());
        let into = rest.0 * n.0 + rest.1 * n.1;
        let slide = if into < 0.0 {
            (
                rest.0 - into * n.0 + SLIDE_CLEARANCE * n.0,
                rest.1 - into * n.1 + SLIDE_CLEARANCE * n.1,
            )
        } else {
            rest
        };
        let at = |f: f64| WorldPoint::new(moved.x + f * slide.0, moved.y + f * slide.1);
        let g = free_fraction(|f| world.disc_collides(at(f), r));
        let end = at(g);
        *s = RobotState {
            x: end.x,
            y: end.y,
            theta: next.theta,
        };
        StepResult {
            distance: cmd.v.abs() * dt * lo + g * slide.0.hypot(slide.1),
            contact: true,
            finished: false,
        }
    }
}

/// Small outward offset added to a sliding move so that it does not graze
/// the surface it slides along.
const SLIDE_CLEARANCE: f64 = 1e-6;

/// Largest `f` in [0, 1] with `collides(f)` false, assuming `collides(0)` is
/// false, by bisection.
fn free_fraction(collides: impl Fn(f64) -> bool) -> f64 {
    if !collides(1.0) {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..20 {
        let mid = 0.5 * (lo + hi);
        if collides(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    lo
}

/// Unit vector pointing away from the nearest obstacle surface.
fn contact_normal(world: &WorldModel, p: WorldPoint) -> (f64, f64) {
    let h = 1e-5;
    let gx = world.clearance(WorldPoint::new(p.x + h, p.y)) - world.clearance(WorldPoint::new(p.x - h, p.y));
    let gy = world.clearance(WorldPoint::new(p.x, p.y + h)) - world.clearance(WorldPoint::new(p.x, p.y - h));
    let norm = gx.hypot(gy);
    if norm < 1e-12 {
        (0.0, 0.0)
    } else {
        (gx / norm, gy / norm)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn open_world() -> WorldModel {
        WorldModel::new("t", WorldPoint::new(-20.0, -20.0), WorldPoint::new(20.0, 20.0)).unwrap()
    }

    #[test]
    fn aligned_straight_advances_full_speed() {
        let path = Path::new(vec![Pose::unoriented(0.0, 0.0), Pose::unoriented(5.0, 0.0)]);
        let mut t = Tracker::new(RobotParams::default(), &path);
        let mut s = RobotState {
            x: 0.0,
            y: 0.0,
            theta: 0.0,
        };
        let r = t.step(&mut s, &open_world(), 0.05);
        assert!((s.x - 0.05).abs() < 1e-12 && s.y.abs() < 1e-12);
        assert!((r.distance - 0.05).abs() < 1e-12);
    }

    #[test]
    fn waypoint_behind_rotates_in_place() {
        let path = Path::new(vec![Pose::unoriented(0.0, 0.0), Pose::unoriented(-5.0, 0.01)]);
        let mut t = Tracker::new(RobotParams::default(), &path);
        let s = RobotState {
            x: 0.0,
            y: 0.0,
            theta: 0.0,
        };
        let (cmd, _) = t.command(&s);
        assert_eq!(cmd.v, 0.0);
        assert_eq!(cmd.w.abs(), 2.0);
    }

    #[test]
    fn exact_arc_integration() {
        let s = RobotState {
            x: 0.0,
            y: 0.0,
            theta: 0.0,
        };
        // quarter circle of radius 1
        let e = integrate(&s, Command { v: 1.0, w: 1.0 }, std::f64::consts::FRAC_PI_2);
        assert!((e.x - 1.0).abs() < 1e-12 && (e.y - 1.0).abs() < 1e-12);
    }

    #[test]
    fn contact_truncates_motion() {
        let mut w = open_world();
        w.add(crate::sim::Obstacle::Box {
            min: WorldPoint::new(1.0, -1.0),
            max: WorldPoint::new(2.0, 1.0),
        })
        .unwrap();
        let path = Path::new(vec![Pose::unoriented(0.0, 0.0), Pose::unoriented(5.0, 0.0)]);
        let mut t = Tracker::new(RobotParams::default(), &path);
        let mut s = RobotState {
            x: 0.0,
            y: 0.0,
            theta: 0.0,
        };
        let mut contact = false;
        for _ in 0..100 {
            contact |= t.step(&mut s, &w, 0.05).contact;
            assert!(!w.disc_collides(s.point(), 0.25));
        }
        assert!(contact);
        assert!(s.x > 0.7 && s.x < 0.75);
    }

    #[test]
    fn oblique_contact_slides_along_wall() {
        let mut w = open_world();
        w.add(crate::sim::Obstacle::Box {
            min: WorldPoint::new(1.0, -5.0),
            max: WorldPoint::new(2.0, 5.0),
        })
        .unwrap();
        let mut s = RobotState {
            x: 0.74,
            y: 0.0,
            theta: std::f64::consts::FRAC_PI_4,
        };
        // straight ahead at 45 degrees into the wall face at x = 1
        let path = Path::new(vec![s.pose(), Pose::unoriented(4.74, 4.0)]);
        let mut t = Tracker::new(RobotParams::default(), &path);
        let r = t.step(&mut s, &w, 0.05);
        assert!(r.contact);
        assert!(!w.disc_collides(s.point(), 0.25));
        assert!(s.x <= 0.75 + 1e-9);
        // the tangential part of the step survives
        assert!((s.y - 0.05 * std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-3, "{}", s.y);
    }

    #[test]
    fn aligns_with_oriented_goal() {
        let path = Path::new(vec![Pose::unoriented(0.0, 0.0), Pose::new(1.0, 0.0, 1.5)]);
        let mut t = Tracker::new(RobotParams::default(), &path);
        let mut s = RobotState {
            x: 0.0,
            y: 0.0,
            theta: 0.0,
        };
        let w = open_world();
        let mut done = false;
        for _ in 0..200 {
            done = t.step(&mut s, &w, 0.05).finished;
            if done {
                break;
            }
        }
        assert!(done);
        assert!((s.theta - 1.5).abs() <= 0.05);
        assert!(s.point().distance(&WorldPoint::new(1.0, 0.0)) <= 0.1);
    }
}

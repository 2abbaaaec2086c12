//! Trees of forward motion primitives.

use std::f64::consts::PI;

use rand::Rng;
use thiserror::Error;

use crate::geometry::{wrap_angle, Path, Pose, WorldPoint};
use crate::grid::OccupancyView;
use crate::search::{pose_collides, CollisionPolicy, Footprint};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RrtError {
    #[error("tree root collides")]
    RootInCollision,
}

/// Constant-curvature forward arc.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionPrimitive {
    /// Signed curvature, 1/m (positive turns left).
    pub curvature: f64,
    /// Arc length, meters.
    pub length: f64,
}

impl MotionPrimitive {
    pub fn pose_at(&self, from: &Pose, s: f64) -> Pose {
        let th = from.heading();
        let k = self.curvature;
        if k.abs() < 1e-12 {
            Pose::new(from.x + s * th.cos(), from.y + s * th.sin(), th)
        } else {
            let th1 = th + k * s;
            Pose::new(
                from.x + (th1.sin() - th.sin()) / k,
                from.y - (th1.cos() - th.cos()) / k,
                th1,
            )
        }
    }

    pub fn end(&self, from: &Pose) -> Pose {
        self.pose_at(from, self.length)
    }

    /// Poses every `step` meters along the arc, excluding `from` and ending
    /// exactly at the arc end.
    pub fn samples(&self, from: &Pose, step: f64) -> Vec<Pose> {
        let n = (self.length / step).ceil().max(1.0) as usize;
        (1..=n)
            .map(|i| self.pose_at(from, self.length * i as f64 / n as f64))
            .collect()
    }
}

/// Seven 0.5 m arcs: straight and curvatures ±0.5, ±1, ±2.
pub fn default_primitives() -> Vec<MotionPrimitive> {
    [0.0, 0.5, -0.5, 1.0, -1.0, 2.0, -2.0]
        .into_iter()
        .map(|curvature| MotionPrimitive { curvature, length: 0.5 })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub pose: Pose,
    pub parent: Option<usize>,
    /// Arc samples from the parent to this node, ending at `pose`.
    pub arc: Vec<Pose>,
    /// Distance driven from the root.
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RrtTree {
    pub nodes: Vec<TreeNode>,
}

impl RrtTree {
    pub fn root(&self) -> &Pose {
        &self.nodes[0].pose
    }

    /// Root followed by every arc sample down to node `i`.
    pub fn path_to(&self, i: usize) -> Path {
        let mut chain = Vec::new();
        let mut cur = Some(i);
        while let Some(c) = cur {
            chain.push(c);
            cur = self.nodes[c].parent;
        }
        chain.reverse();
        let mut poses = vec![self.nodes[chain[0]].pose];
        for &c in &chain[1..] {
            poses.extend_from_slice(&self.nodes[c].arc);
        }
        Path::new(poses)
    }
}

/// Growth limits for one tree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowLimits {
    /// Every pose stays within this distance of the root.
    pub radius: f64,
    /// Stop once the tree holds this many nodes besides the root.
    pub max_nodes: usize,
    /// Sampling iterations.
    pub budget: usize,
    /// Spacing of collision checks along an arc.
    pub check_step: f64,
}

/// Nodes closer than this in position and heading count as duplicates.
const DUP_DISTANCE: f64 = 0.05;
const DUP_HEADING: f64 = 0.1;

/// Grows a tree of primitive chains from `root`. `sample` draws the point
/// to extend towards; `stop` is consulted after each insertion.
#[allow(clippy::too_many_arguments)]
pub(crate) fn grow<V, R, S, F>(
    view: &V,
    root: &Pose,
    limits: &GrowLimits,
    primitives: &[MotionPrimitive],
    footprint: &Footprint,
    policy: &CollisionPolicy,
    rng: &mut R,
    mut sample: S,
    mut stop: F,
) -> Result<RrtTree, RrtError>
where
    V: OccupancyView + ?Sized,
    R: Rng + ?Sized,
    S: FnMut(&mut R) -> WorldPoint,
    F: FnMut(&RrtTree, usize) -> bool,
{
    if pose_collides(view, root, footprint, policy) {
        return Err(RrtError::RootInCollision);
    }
    let root = Pose::new(root.x, root.y, root.heading());
    let mut tree = RrtTree {
        nodes: vec![TreeNode {
            pose: root,
            parent: None,
            arc: Vec::new(),
            cost: 0.0,
        }],
    };
    let origin = root.point();
    for _ in 0..limits.budget {
        if tree.nodes.len() > limits.max_nodes {
            break;
        }
        let target = sample(rng);
        let nearest = tree
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (i, n.pose.point().distance(&target)))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .map(|(i, _)| i)
            .expect("tree has a root");
        let from = tree.nodes[nearest].pose;
        let best = primitives
            .iter()
            .map(|m| (m, m.end(&from).point().distance(&target)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(m, _)| *m);
        let Some(prim) = best else { break };
        let arc = prim.samples(&from, limits.check_step);
        let end = *arc.last().expect("nonempty arc");
        let duplicate = tree.nodes.iter().any(|n| {
            n.pose.point().distance(&end.point()) < DUP_DISTANCE
                && wrap_angle(n.pose.heading() - end.heading()).abs() < DUP_HEADING
        });
        if duplicate {
            continue;
        }
        let ok = arc
            .iter()
            .all(|p| p.point().distance(&origin) <= limits.radius && !pose_collides(view, p, footprint, policy));
        if !ok {
            continue;
        }
        let cost = tree.nodes[nearest].cost + prim.length;
        tree.nodes.push(TreeNode {
            pose: end,
            parent: Some(nearest),
            arc,
            cost,
        });
        if stop(&tree, tree.nodes.len() - 1) {
            break;
        }
    }
    Ok(tree)
}

/// Uniform point in the disc of `radius` around `center`.
pub(crate) fn sample_disc<R: Rng + ?Sized>(rng: &mut R, center: WorldPoint, radius: f64) -> WorldPoint {
    let r = radius * rng.random::<f64>().sqrt();
    let a = 2.0 * PI * rng.random::<f64>();
    WorldPoint::new(center.x + r * a.cos(), center.y + r * a.sin())
}

/// Candidate-view tree: grows until `max_nodes` nodes besides the root
/// exist or the budget is spent.
#[allow(clippy::too_many_arguments)]
pub fn grow_rrt<V: OccupancyView + ?Sized, R: Rng + ?Sized>(
    view: &V,
    root: &Pose,
    limits: &GrowLimits,
    primitives: &[MotionPrimitive],
    footprint: &Footprint,
    policy: &CollisionPolicy,
    rng: &mut R,
) -> Result<RrtTree, RrtError> {
    let center = root.point();
    let radius = limits.radius;
    grow(
        view,
        root,
        limits,
        primitives,
        footprint,
        policy,
        rng,
        |r| sample_disc(r, center, radius),
        |_, _| false,
    )
}

//! Next-best-view selection: candidate views from a primitive tree, scored
//! by how much hypothesis-relevant uncertainty they can observe, then
//! relinked to both path hypotheses.
//!
//! For a candidate view `p` and the set `C(p)` of unknown/uncertain cells
//! on some hypothesis that `p` can see:
//!
//! ```text
//! J_H(p) = Σ_{c ∈ C(p)}  V(c, p) H(c) / k(c)^β
//! J_d(p) = Σ_{c ∈ C(p), V(c, p) > γ}  max(0, d(c) - d(c, p)) / k(c)^β
//! J(p)   = α J_H(p) / η_H + (1 - α) J_d(p) / η_d
//! ```
//! `k(c)` is the rank (by length) of the shortest hypothesis passing over
//! `c`, `d(c)` the distance from the robot and `d(c, p)` from the view.

mod rrt;

use std::fmt::Write as _;

use rand::Rng;
use thiserror::Error;

pub use rrt::{default_primitives, grow_rrt, GrowLimits, MotionPrimitive, RrtError, RrtTree, TreeNode};

use crate::geometry::{wrap_angle, Path, Pose, WorldPoint};
use crate::grid::{CellIndex, GridSpec, OccupancyGrid, OccupancyView};
use crate::search::{path_cells, CollisionPolicy, Footprint};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NbvError {
    #[error("invalid NBV config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NbvConfig {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Number of candidate views `|P|`.
    pub candidates: usize,
    pub rrt_radius: f64,
    pub relink_attempts: usize,
    /// Candidate tree sampling budget per requested candidate.
    pub expansion_factor: usize,
    /// Sampling budget of each relinking tree.
    pub relink_budget: usize,
    /// Chebyshev distance in cells at which a tree node joins a hypothesis.
    pub junction_tolerance: usize,
    /// Probability of sampling a hypothesis pose when relinking.
    pub relink_bias: f64,
    pub primitives: Vec<MotionPrimitive>,
}

impl Default for NbvConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            beta: 2.0,
            gamma: 0.05,
            candidates: 200,
            rrt_radius: 4.0,
            relink_attempts: 7,
            expansion_factor: 20,
            relink_budget: 500,
            junction_tolerance: 1,
            relink_bias: 0.5,
            primitives: default_primitives(),
        }
    }
}

impl NbvConfig {
    pub fn validate(&self) -> Result<(), NbvError> {
        let bad = |m: &str| Err(NbvError::InvalidConfig(m.to_string()));
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad("alpha must lie in [0, 1]");
        }
        if !(self.beta >= 0.0) {
            return bad("beta must be non-negative");
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1)");
        }
        if self.candidates == 0 || self.relink_attempts == 0 || self.relink_budget == 0 {
            return bad("counts must be at least 1");
        }
        if !(self.rrt_radius > 0.0) {
            return bad("rrt_radius must be positive");
        }
        if self.primitives.is_empty() || self.primitives.iter().any(|m| !(m.length > 0.0)) {
            return bad("need forward primitives of positive length");
        }
        Ok(())
    }

    pub fn candidate_limits(&self, spec: &GridSpec) -> GrowLimits {
        GrowLimits {
            radius: self.rrt_radius,
            max_nodes: self.candidates,
            budget: self.expansion_factor * self.candidates,
            check_step: spec.resolution / 2.0,
        }
    }
}

/// What the sensor can see from a view: half of the horizontal field of
/// view is compared against the bearing of each cell center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewLimits {
    pub fov: f64,
    pub max_range: f64,
}

impl ViewLimits {
    pub fn sees(&self, view: &Pose, p: WorldPoint) -> bool {
        let d = view.point().distance(&p);
        if d > self.max_range {
            return false;
        }
        if d == 0.0 {
            return true;
        }
        let bearing = wrap_angle((p.y - view.y).atan2(p.x - view.x) - view.heading());
        bearing.abs() <= self.fov / 2.0
    }
}

/// A candidate next-best view.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateView {
    /// Position in the tree the candidate came from.
    pub index: usize,
    pub pose: Pose,
    /// Poses from the robot to the candidate.
    pub tree_path: Path,
    pub j_h: f64,
    pub j_d: f64,
    pub j: f64,
}

/// One cell of `C(p)` with everything the objective needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredCell {
    pub cell: CellIndex,
    pub entropy: f64,
    pub visibility: f64,
    /// 1-based rank of the shortest hypothesis covering the cell.
    pub rank: usize,
    /// Distance from the robot.
    pub d_robot: f64,
    /// Distance from the candidate view.
    pub d_view: f64,
}

/// Unknown/uncertain cells covered by the hypotheses, each with the rank of
/// the shortest hypothesis covering it. Hypotheses are ranked by length,
/// ties by position in `hypotheses`.
pub fn hypothesis_cells(grid: &OccupancyGrid, hypotheses: &[Path], footprint: &Footprint) -> Vec<(CellIndex, usize)> {
    let spec = grid.spec();
    let mut order: Vec<usize> = (0..hypotheses.len()).collect();
    order.sort_by(|&a, &b| {
        hypotheses[a]
            .length()
            .total_cmp(&hypotheses[b].length())
            .then(a.cmp(&b))
    });
    let mut rank = vec![0usize; spec.cell_count()];
    let mut out = Vec::new();
    for (r, &h) in order.iter().enumerate() {
        for center in path_cells(spec, &hypotheses[h]) {
            for c in footprint.cells_around(center, spec) {
                let idx = spec.linear(c);
                if rank[idx] == 0 && grid.class_of(c).is_unsure() {
                    rank[idx] = r + 1;
                    out.push((c, r + 1));
                }
            }
        }
    }
    out.sort_by_key(|(c, _)| spec.linear(*c));
    out
}

/// `C(p)` for one candidate view.
pub fn collect_cells(
    grid: &OccupancyGrid,
    covered: &[(CellIndex, usize)],
    robot: &Pose,
    candidate: &Pose,
    limits: &ViewLimits,
) -> Vec<ScoredCell> {
    let spec = grid.spec();
    covered
        .iter()
        .filter_map(|&(cell, rank)| {
            let center = spec.cell_center(cell);
            if !limits.sees(candidate, center) {
                return None;
            }
            Some(ScoredCell {
                cell,
                entropy: grid.entropy(cell).ok()?,
                visibility: grid.visibility(candidate, cell).ok()?,
                rank,
                d_robot: robot.point().distance(&center),
                d_view: candidate.point().distance(&center),
            })
        })
        .collect()
}

/// Raw `(J_H, J_d)` of a cell set.
pub fn score(cells: &[ScoredCell], config: &NbvConfig) -> (f64, f64) {
    let mut j_h = 0.0;
    let mut j_d = 0.0;
    for c in cells {
        let weight = (c.rank as f64).powf(config.beta);
        j_h += c.visibility * c.entropy / weight;
        if c.visibility > config.gamma {
            j_d += (c.d_robot - c.d_view).max(0.0) / weight;
        }
    }
    (j_h, j_d)
}

/// Fills in `j` with per-term max normalization and sorts by it, best first.
/// Ties go to the shorter tree path, then the lower index.
pub fn rank_candidates(mut candidates: Vec<CandidateView>, config: &NbvConfig) -> Vec<CandidateView> {
    let eta_h = candidates.iter().map(|c| c.j_h).fold(0.0, f64::max);
    let eta_d = candidates.iter().map(|c| c.j_d).fold(0.0, f64::max);
    for c in &mut candidates {
        let h = if eta_h > 0.0 { c.j_h / eta_h } else { 0.0 };
        let d = if eta_d > 0.0 { c.j_d / eta_d } else { 0.0 };
        c.j = config.alpha * h + (1.0 - config.alpha) * d;
    }
    candidates.sort_by(|a, b| {
        b.j.total_cmp(&a.j)
            .then(a.tree_path.length().total_cmp(&b.tree_path.length()))
            .then(a.index.cmp(&b.index))
    });
    candidates
}

/// `index x y theta J_H J_d J`, one line per candidate.
pub fn dump_candidates(candidates: &[CandidateView]) -> String {
    let mut out = String::new();
    for c in candidates {
        let _ = writeln!(
            out,
            "{} {:.4} {:.4} {:.4} {:.6} {:.6} {:.6}",
            c.index,
            c.pose.x,
            c.pose.y,
            c.pose.heading(),
            c.j_h,
            c.j_d,
            c.j
        );
    }
    out
}

/// Grows the candidate tree from the robot and returns every node as a
/// scored, ranked candidate.
#[allow(clippy::too_many_arguments)]
pub fn propose_views<R: Rng + ?Sized>(
    grid: &OccupancyGrid,
    robot: &Pose,
    hypotheses: &[Path],
    config: &NbvConfig,
    footprint: &Footprint,
    policy: &CollisionPolicy,
    limits: &ViewLimits,
    rng: &mut R,
) -> Result<Vec<CandidateView>, RrtError> {
    let tree = grow_rrt(
        grid,
        robot,
        &config.candidate_limits(grid.spec()),
        &config.primitives,
        footprint,
        policy,
        rng,
    )?;
    let covered = hypothesis_cells(grid, hypotheses, footprint);
    let candidates = (1..tree.nodes.len())
        .map(|i| {
            let pose = tree.nodes[i].pose;
            let cells = collect_cells(grid, &covered, robot, &pose, limits);
            let (j_h, j_d) = score(&cells, config);
            CandidateView {
                index: i,
                pose,
                tree_path: tree.path_to(i),
                j_h,
                j_d,
                j: 0.0,
            }
        })
        .collect();
    Ok(rank_candidates(candidates, config))
}

/// Successful relinking.
#[derive(Debug, Clone, PartialEq)]
pub struct Relinked {
    pub nbv: CandidateView,
    /// Robot to the view, shared by every rewritten hypothesis.
    pub common: Path,
    /// Per hypothesis: from the view pose to the goal.
    pub tails: Vec<Path>,
    /// Candidates tried, including the successful one.
    pub attempts: usize,
}

impl Relinked {
    /// Hypothesis `i` rewritten as common segment followed by its tail.
    pub fn hypothesis(&self, i: usize) -> Path {
        let mut poses = self.common.poses.clone();
        poses.extend(self.tails[i].poses.iter().skip(1).copied());
        Path::new(poses)
    }
}

/// Reconnects each of the top candidates to every hypothesis with a short
/// tree grown from the candidate. Returns the number of attempts on failure.
#[allow(clippy::too_many_arguments)]
pub fn relink<R: Rng + ?Sized>(
    grid: &OccupancyGrid,
    ranked: &[CandidateView],
    hypotheses: &[Path],
    config: &NbvConfig,
    footprint: &Footprint,
    policy: &CollisionPolicy,
    rng: &mut R,
) -> Result<Relinked, usize> {
    let spec = *grid.spec();
    let tol = config.junction_tolerance as i32;
    // per hypothesis: cell -> latest pose index within the tolerance
    let joins: Vec<Vec<Option<usize>>> = hypotheses
        .iter()
        .map(|h| {
            let mut m = vec![None; spec.cell_count()];
            for (i, p) in h.poses.iter().enumerate() {
                let Some(c) = spec.world_to_cell(p.point()) else {
                    continue;
                };
                for dy in -tol..=tol {
                    for dx in -tol..=tol {
                        if let Some(n) = c.offset(dx, dy).filter(|n| spec.contains(*n)) {
                            m[spec.linear(n)] = Some(i);
                        }
                    }
                }
            }
            m
        })
        .collect();
    // remaining length from each pose to the end of its hypothesis
    let remaining: Vec<Vec<f64>> = hypotheses
        .iter()
        .map(|h| {
            let mut r = vec![0.0; h.len()];
            for i in (0..h.len().saturating_sub(1)).rev() {
                r[i] = r[i + 1] + h.poses[i].distance(&h.poses[i + 1]);
            }
            r
        })
        .collect();
    let join_of =
        |h: usize, p: &Pose| -> Option<usize> { spec.world_to_cell(p.point()).and_then(|c| joins[h][spec.linear(c)]) };

    let limits = GrowLimits {
        radius: config.rrt_radius,
        max_nodes: usize::MAX,
        budget: config.relink_budget,
        check_step: spec.resolution / 2.0,
    };
    let mut attempts = 0;
    for cand in ranked.iter().take(config.relink_attempts) {
        attempts += 1;
        let center = cand.pose.point();
        let targets: Vec<WorldPoint> = hypotheses
            .iter()
            .flat_map(|h| h.poses.iter().map(|p| p.point()))
            .filter(|p| p.distance(&center) <= config.rrt_radius)
            .collect();
        let mut reached = vec![false; hypotheses.len()];
        let tree = rrt::grow(
            grid,
            &cand.pose,
            &limits,
            &config.primitives,
            footprint,
            policy,
            rng,
            |r| {
                if !targets.is_empty() && r.random::<f64>() < config.relink_bias {
                    targets[r.random_range(0..targets.len())]
                } else {
                    rrt::sample_disc(r, center, config.rrt_radius)
                }
            },
            |tree, i| {
                for (h, done) in reached.iter_mut().enumerate() {
                    *done |= join_of(h, &tree.nodes[i].pose).is_some();
                }
                reached.iter().all(|&d| d)
            },
        );
        let Ok(tree) = tree else { continue };

        let mut tails = Vec::with_capacity(hypotheses.len());
        for (h, hyp) in hypotheses.iter().enumerate() {
            let best = tree
                .nodes
                .iter()
                .enumerate()
                .filter_map(|(i, n)| join_of(h, &n.pose).map(|j| (i, j, n.cost + remaining[h][j])))
                .min_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)));
            let Some((node, j, _)) = best else { break };
            let mut poses = tree.path_to(node).poses;
            poses.extend(hyp.poses.iter().skip(j + 1).copied());
            tails.push(Path::new(poses));
        }
        if tails.len() == hypotheses.len() {
            return Ok(Relinked {
                nbv: cand.clone(),
                common: cand.tree_path.clone(),
                tails,
                attempts,
            });
        }
    }
    Err(attempts)
}

//! The three-stage next-best-view planner.
//!
//! Stage 1 plans up to two hypotheses and, when they disagree about unsure
//! space, picks a view pose reachable by a common initial segment. Stage 2
//! drives there and, on arrival, commits to a hypothesis. Stage 3 replans a
//! single optimistic path every cycle.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{check_goal_reachable, CycleOutput, Planner, PlannerStatus};
use crate::geometry::{wrap_angle, Path, Pose};
use crate::grid::{CellClass, OccupancyGrid, OccupancyView};
use crate::nbv::{propose_views, relink, CandidateView, NbvConfig, ViewLimits};
use crate::search::{
    astar_with, path_cells, plan_hypotheses, pose_collides, unsure_cells, AStarOptions, Footprint, GoalRegion,
    HypothesisConfig, SearchError,
};

#[derive(Debug, Clone, PartialEq)]
pub struct NbvPlannerConfig {
    pub nbv: NbvConfig,
    pub hypotheses: HypothesisConfig,
    pub footprint: Footprint,
    pub view: ViewLimits,
    pub arrival_distance: f64,
    pub arrival_heading: f64,
    /// Cycles spent in stage 2 before arrival is assumed.
    pub stage2_timeout: usize,
}

impl Default for NbvPlannerConfig {
    fn default() -> Self {
        Self {
            nbv: NbvConfig::default(),
            hypotheses: HypothesisConfig::default(),
            footprint: Footprint::default(),
            view: ViewLimits {
                fov: 107f64.to_radians(),
                max_range: 7.0,
            },
            arrival_distance: 0.15,
            arrival_heading: 0.3,
            stage2_timeout: 30,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NbvState {
    Stage1,
    Stage2,
    Stage3,
    Success,
    Unreachable,
    Failure,
}

impl NbvState {
    pub fn name(self) -> &'static str {
        match self {
            NbvState::Stage1 => "stage1",
            NbvState::Stage2 => "stage2",
            NbvState::Stage3 => "stage3",
            NbvState::Success => "success",
            NbvState::Unreachable => "unreachable",
            NbvState::Failure => "failure",
        }
    }

    fn status(self) -> PlannerStatus {
        match self {
            NbvState::Success => PlannerStatus::Success,
            NbvState::Unreachable => PlannerStatus::Unreachable,
            NbvState::Failure => PlannerStatus::Failure,
            _ => PlannerStatus::Active,
        }
    }
}

#[derive(Debug, Clone, Default)]
struct Context {
    nbv: Option<CandidateView>,
    common: Option<Path>,
    /// Hypotheses as continuations from the view pose.
    tails: Vec<Path>,
    stage2_cycles: usize,
}

#[derive(Debug, Clone)]
pub struct NbvPlanner {
    config: NbvPlannerConfig,
    state: NbvState,
    ctx: Context,
    rng: ChaCha8Rng,
}

impl NbvPlanner {
    pub fn new(config: NbvPlannerConfig, seed: u64) -> Self {
        Self {
            config,
            state: NbvState::Stage1,
            ctx: Context::default(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn with_rng(config: NbvPlannerConfig, rng: ChaCha8Rng) -> Self {
        Self {
            config,
            state: NbvState::Stage1,
            ctx: Context::default(),
            rng,
        }
    }

    pub fn state(&self) -> NbvState {
        self.state
    }

    /// The chosen view, once stage 1 has picked one.
    pub fn nbv(&self) -> Option<&CandidateView> {
        self.ctx.nbv.as_ref()
    }

    fn out(&mut self, next: NbvState, waypoints: Option<Path>, event: &'static str) -> CycleOutput {
        self.state = next;
        CycleOutput {
            waypoints,
            status: next.status(),
            state: next.name(),
            event,
        }
    }

    fn opts() -> AStarOptions {
        AStarOptions { exempt_start: true }
    }

    /// Single optimistic path, or the end of the run.
    fn follow(&mut self, grid: &OccupancyGrid, robot: &Pose, goal: &GoalRegion, event: &'static str) -> CycleOutput {
        let c = &self.config;
        match astar_with(grid, robot, goal, &c.footprint, &c.hypotheses.policy, Self::opts()) {
            Ok(gp) => {
                let path = gp.to_path(grid.spec(), robot, goal);
                self.out(NbvState::Stage3, Some(path), event)
            }
            Err(SearchError::StartOutOfBounds) => self.out(NbvState::Failure, None, "out_of_bounds"),
            Err(_) => self.out(NbvState::Unreachable, None, "no_path"),
        }
    }

    fn stage1(&mut self, grid: &OccupancyGrid, robot: &Pose, goal: &GoalRegion) -> CycleOutput {
        let c = self.config.clone();
        let set = match plan_hypotheses(grid, robot, goal, &c.footprint, &c.hypotheses, Self::opts()) {
            Ok(set) => set,
            Err(SearchError::StartOutOfBounds) => return self.out(NbvState::Failure, None, "out_of_bounds"),
            Err(_) => return self.out(NbvState::Unreachable, None, "no_path"),
        };
        let mut paths: Vec<Path> = set.hypotheses.iter().map(|h| h.path.clone()).collect();
        if !set.needs_nbv {
            let first = paths.swap_remove(0);
            return self.out(NbvState::Stage3, Some(first), "single_hypothesis");
        }
        let shortest = shortest(&paths).clone();
        let ranked = match propose_views(
            grid,
            robot,
            &paths,
            &c.nbv,
            &c.footprint,
            &c.hypotheses.policy,
            &c.view,
            &mut self.rng,
        ) {
            Ok(r) if !r.is_empty() => r,
            _ => return self.out(NbvState::Stage3, Some(shortest), "no_candidates"),
        };
        match relink(
            grid,
            &ranked,
            &paths,
            &c.nbv,
            &c.footprint,
            &c.hypotheses.policy,
            &mut self.rng,
        ) {
            Ok(r) => {
                let common = r.common.clone();
                self.ctx = Context {
                    nbv: Some(r.nbv),
                    common: Some(r.common),
                    tails: r.tails,
                    stage2_cycles: 0,
                };
                self.out(NbvState::Stage2, Some(common), "to_nbv")
            }
            Err(_) => self.out(NbvState::Stage3, Some(shortest), "relink_failed"),
        }
    }

    fn stage2(&mut self, grid: &OccupancyGrid, robot: &Pose, goal: &GoalRegion) -> CycleOutput {
        let (Some(nbv), Some(common)) = (self.ctx.nbv.clone(), self.ctx.common.clone()) else {
            return self.out(NbvState::Failure, None, "missing_nbv");
        };
        self.ctx.stage2_cycles += 1;
        let c = &self.config;
        let arrived = robot.distance(&nbv.pose) <= c.arrival_distance
            && wrap_angle(robot.heading() - nbv.pose.heading()).abs() <= c.arrival_heading;
        if !arrived && self.ctx.stage2_cycles <= c.stage2_timeout {
            // the segment still ahead must stay collision-free
            let nearest = common
                .poses
                .iter()
                .enumerate()
                .min_by(|a, b| robot.distance(a.1).total_cmp(&robot.distance(b.1)))
                .map(|(i, _)| i)
                .unwrap_or(0);
            let blocked = common.poses[nearest..]
                .iter()
                .any(|p| pose_collides(grid, p, &c.footprint, &c.hypotheses.policy));
            if blocked {
                return self.follow(grid, robot, goal, "segment_blocked");
            }
            return self.out(NbvState::Stage2, None, "transit");
        }
        self.commit(grid, robot, goal)
    }

    /// Pruning and commitment at the view pose.
    fn commit(&mut self, grid: &OccupancyGrid, robot: &Pose, goal: &GoalRegion) -> CycleOutput {
        let c = self.config.clone();
        let spec = *grid.spec();
        let tails = std::mem::take(&mut self.ctx.tails);
        let classes = |p: &Path| -> Vec<CellClass> {
            path_cells(&spec, p)
                .into_iter()
                .flat_map(|center| c.footprint.cells_around(center, &spec).collect::<Vec<_>>())
                .map(|cell| grid.class_of(cell))
                .collect()
        };
        // (i) a hypothesis over known-free cells only
        let safe: Vec<Path> = tails
            .iter()
            .filter(|t| classes(t).iter().all(|k| *k == CellClass::Free))
            .cloned()
            .collect();
        if !safe.is_empty() {
            let path = with_start(robot, shortest(&safe));
            return self.out(NbvState::Stage3, Some(path), "commit_safe");
        }
        // (ii) drop hypotheses running into obstacles
        let survivors: Vec<Path> = tails
            .into_iter()
            .filter(|t| !classes(t).contains(&CellClass::Obstacle))
            .collect();
        // (iii) none left
        if survivors.is_empty() {
            if !check_goal_reachable(grid, robot, goal, &c.footprint, &c.hypotheses.policy) {
                return self.out(NbvState::Unreachable, None, "goal_unreachable");
            }
            return self.follow(grid, robot, goal, "all_pruned");
        }
        // (iv) replace by fresher hypotheses with fewer unsure cells
        let unsure = |p: &Path| unsure_cells(grid, &path_cells(&spec, p), &c.footprint).len();
        let mut fresh: Vec<Option<(Path, usize)>> =
            match plan_hypotheses(grid, robot, goal, &c.footprint, &c.hypotheses, Self::opts()) {
                Ok(set) => set
                    .hypotheses
                    .into_iter()
                    .map(|h| {
                        let n = unsure(&h.path);
                        Some((h.path, n))
                    })
                    .collect(),
                Err(_) => Vec::new(),
            };
        let mut kept = Vec::with_capacity(survivors.len());
        let mut replaced = false;
        for old in survivors {
            let old_count = unsure(&old);
            let best = fresh
                .iter()
                .enumerate()
                .filter_map(|(i, f)| f.as_ref().map(|(_, n)| (i, *n)))
                .min_by_key(|&(i, n)| (n, i));
            match best {
                Some((i, n)) if n < old_count => {
                    let (path, _) = fresh[i].take().expect("present");
                    kept.push(path);
                    replaced = true;
                }
                _ => kept.push(with_start(robot, &old)),
            }
        }
        let path = shortest(&kept).clone();
        let event = if replaced { "commit_replaced" } else { "commit" };
        self.out(NbvState::Stage3, Some(path), event)
    }
}

fn shortest(paths: &[Path]) -> &Path {
    paths
        .iter()
        .min_by(|a, b| a.length().total_cmp(&b.length()))
        .expect("at least one path")
}

fn with_start(robot: &Pose, path: &Path) -> Path {
    let mut poses = Vec::with_capacity(path.len() + 1);
    poses.push(*robot);
    poses.extend(path.poses.iter().skip(1).copied());
    Path::new(poses)
}

impl Planner for NbvPlanner {
    fn cycle(&mut self, grid: &OccupancyGrid, robot: &Pose, goal: &GoalRegion) -> CycleOutput {
        match self.state {
            NbvState::Success | NbvState::Unreachable | NbvState::Failure => return self.out(self.state, None, "done"),
            _ => {}
        }
        if goal.contains(robot.point()) {
            return self.out(NbvState::Success, None, "goal_reached");
        }
        match self.state {
            NbvState::Stage1 => self.stage1(grid, robot, goal),
            NbvState::Stage2 => self.stage2(grid, robot, goal),
            _ => self.follow(grid, robot, goal, "replan"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::WorldPoint;
    use crate::grid::{CellIndex, ClassifierConfig, GridSpec};

    fn known_free(w: usize, h: usize) -> OccupancyGrid {
        let spec = GridSpec::new(w, h, 0.25, WorldPoint::new(0.0, 0.0)).unwrap();
        let mut g = OccupancyGrid::new(spec, ClassifierConfig::default()).unwrap();
        for c in spec.cells().collect::<Vec<_>>() {
            g.set_probability(c, Some(0.12)).unwrap();
        }
        g
    }

    #[test]
    fn free_map_skips_to_stage3() {
        let g = known_free(40, 40);
        let mut p = NbvPlanner::new(NbvPlannerConfig::default(), 0);
        let robot = Pose::new(1.0, 1.0, 0.0);
        let goal = GoalRegion::new(WorldPoint::new(8.0, 8.0), 0.5);
        let out = p.cycle(&g, &robot, &goal);
        assert_eq!(out.state, "stage3");
        assert_eq!(out.event, "single_hypothesis");
        assert!(out.waypoints.is_some());
    }

    #[test]
    fn done_states_absorb() {
        let g = known_free(40, 40);
        let mut p = NbvPlanner::new(NbvPlannerConfig::default(), 0);
        let goal = GoalRegion::new(WorldPoint::new(8.0, 8.0), 0.5);
        let out = p.cycle(&g, &Pose::new(8.0, 8.1, 0.0), &goal);
        assert_eq!(out.status, PlannerStatus::Success);
        let out = p.cycle(&g, &Pose::new(1.0, 1.0, 0.0), &goal);
        assert_eq!(out.status, PlannerStatus::Success);
        assert_eq!(p.state(), NbvState::Success);
    }

    #[test]
    fn walled_goal_is_unreachable() {
        let mut g = known_free(40, 40);
        let center = CellIndex::new(32, 32);
        for c in g.spec().cells().collect::<Vec<_>>() {
            if c.chebyshev(&center) == 4 {
                g.set_probability(c, Some(0.85)).unwrap();
            }
        }
        let mut p = NbvPlanner::new(NbvPlannerConfig::default(), 0);
        let goal = GoalRegion::new(g.spec().cell_center(center), 0.3);
        let out = p.cycle(&g, &Pose::new(1.0, 1.0, 0.0), &goal);
        assert_eq!(out.status, PlannerStatus::Unreachable);
    }

    #[test]
    fn stage2_without_view_is_failure() {
        let g = known_free(40, 40);
        let mut p = NbvPlanner::new(NbvPlannerConfig::default(), 0);
        p.state = NbvState::Stage2;
        let goal = GoalRegion::new(WorldPoint::new(8.0, 8.0), 0.5);
        let out = p.cycle(&g, &Pose::new(1.0, 1.0, 0.0), &goal);
        assert_eq!(out.status, PlannerStatus::Failure);
    }

    #[test]
    fn unknown_patch_leads_to_view() {
        // open known field with an unknown blob straddling the straight line
        let spec = GridSpec::new(60, 60, 0.25, WorldPoint::new(0.0, 0.0)).unwrap();
        let mut g = OccupancyGrid::new(spec, ClassifierConfig::default()).unwrap();
        for c in spec.cells().collect::<Vec<_>>() {
            let blob = (24..36).contains(&c.x) && (28..40).contains(&c.y);
            if !blob {
                g.set_probability(c, Some(0.12)).unwrap();
            }
        }
        let robot = Pose::new(7.5, 2.0, std::f64::consts::FRAC_PI_2);
        let goal = GoalRegion::new(WorldPoint::new(7.5, 13.0), 0.5);
        let mut p = NbvPlanner::new(NbvPlannerConfig::default(), 4);
        let out = p.cycle(&g, &robot, &goal);
        assert_eq!(out.state, "stage2", "event {}", out.event);
        let common = out.waypoints.unwrap();
        assert_eq!(common.first(), Some(&robot));
        assert_eq!(common.last(), Some(&p.nbv().unwrap().pose));
    }
}

//! Global planners driven by the simulator at a fixed replanning rate.

mod fsm;

pub use fsm::{NbvPlanner, NbvPlannerConfig, NbvState};

use crate::geometry::{Path, Pose};
use crate::grid::{Binarized, OccupancyGrid};
use crate::search::{astar_with, AStarOptions, CollisionPolicy, Footprint, GoalRegion, SearchError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlannerStatus {
    Active,
    Success,
    Unreachable,
    /// Inconsistent planner state; the run is aborted.
    Failure,
}

/// Result of one planning cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleOutput {
    /// New path to track, `None` to keep the current one.
    pub waypoints: Option<Path>,
    pub status: PlannerStatus,
    /// State after the cycle, for the trace.
    pub state: &'static str,
    pub event: &'static str,
}

pub trait Planner {
    fn cycle(&mut self, grid: &OccupancyGrid, robot: &Pose, goal: &GoalRegion) -> CycleOutput;
}

/// Goal reachability under the optimistic hypothesis policy.
pub fn check_goal_reachable(
    grid: &OccupancyGrid,
    robot: &Pose,
    goal: &GoalRegion,
    footprint: &Footprint,
    policy: &CollisionPolicy,
) -> bool {
    astar_with(
        grid,
        robot,
        goal,
        footprint,
        policy,
        AStarOptions { exempt_start: true },
    )
    .is_ok()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineConfig {
    /// Mapping range of the grid the baseline plans on.
    pub mapping_range: f64,
    pub occupancy_threshold: f64,
    pub footprint: Footprint,
}

impl BaselineConfig {
    pub fn short_range() -> Self {
        Self {
            mapping_range: 3.5,
            occupancy_threshold: 0.3,
            footprint: Footprint::default(),
        }
    }

    pub fn long_range() -> Self {
        Self {
            mapping_range: 7.0,
            ..Self::short_range()
        }
    }
}

/// Single-threshold planner: one optimistic A* path per cycle on the
/// binarized map.
#[derive(Debug, Clone)]
pub struct BaselinePlanner {
    config: BaselineConfig,
    done: Option<PlannerStatus>,
}

impl BaselinePlanner {
    pub fn new(config: BaselineConfig) -> Self {
        Self { config, done: None }
    }

    pub fn config(&self) -> &BaselineConfig {
        &self.config
    }
}

/// One baseline planning step.
pub fn baseline_cycle(
    grid: &OccupancyGrid,
    robot: &Pose,
    goal: &GoalRegion,
    config: &BaselineConfig,
) -> Result<Path, SearchError> {
    let view = Binarized::new(grid, config.occupancy_threshold);
    let policy = CollisionPolicy::default();
    let opts = AStarOptions { exempt_start: true };
    astar_with(&view, robot, goal, &config.footprint, &policy, opts).map(|gp| gp.to_path(grid.spec(), robot, goal))
}

impl Planner for BaselinePlanner {
    fn cycle(&mut self, grid: &OccupancyGrid, robot: &Pose, goal: &GoalRegion) -> CycleOutput {
        let done = |status, state, event| CycleOutput {
            waypoints: None,
            status,
            state,
            event,
        };
        match self.done {
            Some(PlannerStatus::Success) => return done(PlannerStatus::Success, "success", "done"),
            Some(PlannerStatus::Unreachable) => return done(PlannerStatus::Unreachable, "unreachable", "done"),
            _ => {}
        }
        if goal.contains(robot.point()) {
            self.done = Some(PlannerStatus::Success);
            return done(PlannerStatus::Success, "success", "goal_reached");
        }
        match baseline_cycle(grid, robot, goal, &self.config) {
            Ok(path) => CycleOutput {
                waypoints: Some(path),
                status: PlannerStatus::Active,
                state: "follow",
                event: "replan",
            },
            Err(_) => {
                self.done = Some(PlannerStatus::Unreachable);
                done(PlannerStatus::Unreachable, "unreachable", "no_path")
            }
        }
    }
}

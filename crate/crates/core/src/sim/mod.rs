//! Closed-loop simulation: sense, integrate, plan, move.

mod tracker;
mod world;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use tracker::{integrate, Command, RobotParams, RobotState, StepResult, Tracker};
pub use world::{Environment, Obstacle, StartPose, WorldError, WorldModel};

use crate::geometry::Pose;
use crate::grid::{ClassifierConfig, OccupancyGrid};
use crate::planner::{BaselineConfig, BaselinePlanner, NbvPlanner, NbvPlannerConfig, Planner, PlannerStatus};
use crate::search::GoalRegion;
use crate::sensor::{sense, NoiseParams, SensorSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PlannerKind {
    Nbv,
    B35,
    B7,
}

impl PlannerKind {
    pub const ALL: [PlannerKind; 3] = [PlannerKind::Nbv, PlannerKind::B35, PlannerKind::B7];

    pub fn name(self) -> &'static str {
        match self {
            PlannerKind::Nbv => "nbv",
            PlannerKind::B35 => "b35",
            PlannerKind::B7 => "b7",
        }
    }

    /// Range up to which returns are mapped as hits.
    pub fn mapping_range(self) -> f64 {
        match self {
            PlannerKind::B35 => 3.5,
            _ => 7.0,
        }
    }
}

impl fmt::Display for PlannerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PlannerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nbv" => Ok(PlannerKind::Nbv),
            "b35" => Ok(PlannerKind::B35),
            "b7" => Ok(PlannerKind::B7),
            _ => Err(format!("unknown planner {s:?} (expected nbv, b35 or b7)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NoiseLevel {
    Off,
    Low,
    High,
}

impl NoiseLevel {
    pub fn name(self) -> &'static str {
        match self {
            NoiseLevel::Off => "off",
            NoiseLevel::Low => "low",
            NoiseLevel::High => "high",
        }
    }

    pub fn params(self) -> NoiseParams {
        match self {
            NoiseLevel::Off => NoiseParams::OFF,
            NoiseLevel::Low => NoiseParams::LOW,
            NoiseLevel::High => NoiseParams::HIGH,
        }
    }
}

impl fmt::Display for NoiseLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NoiseLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "off" => Ok(NoiseLevel::Off),
            "low" => Ok(NoiseLevel::Low),
            "high" => Ok(NoiseLevel::High),
            _ => Err(format!("unknown noise level {s:?} (expected off, low or high)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Success,
    Unreachable,
    Failure,
}

impl Outcome {
    pub fn name(self) -> &'static str {
        match self {
            Outcome::Success => "success",
            Outcome::Unreachable => "unreachable",
            Outcome::Failure => "failure",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Outcome {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "success" => Ok(Outcome::Success),
            "unreachable" => Ok(Outcome::Unreachable),
            "failure" => Ok(Outcome::Failure),
            _ => Err(format!("unknown outcome {s:?}")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub world: Arc<WorldModel>,
    pub goal: GoalRegion,
    pub start: Pose,
    pub planner: PlannerKind,
    pub noise: NoiseParams,
    pub seed: u64,
    /// Simulated seconds before the run counts as a failure.
    pub time_limit: f64,
    pub dt: f64,
    pub scan_period: f64,
    pub plan_period: f64,
    pub resolution: f64,
    pub robot: RobotParams,
    pub sensor: SensorSpec,
    pub nbv: NbvPlannerConfig,
    /// Keep one trace line per planning cycle.
    pub trace: bool,
}

impl RunConfig {
    pub fn new(env: &Environment, start: Pose, planner: PlannerKind, noise: NoiseParams, seed: u64) -> Self {
        Self {
            world: Arc::new(env.world.clone()),
            goal: env.goal,
            start,
            planner,
            noise,
            seed,
            time_limit: 120.0,
            dt: 0.05,
            scan_period: 0.5,
            plan_period: 1.0,
            resolution: 0.25,
            robot: RobotParams::default(),
            sensor: SensorSpec::default(),
            nbv: NbvPlannerConfig::default(),
            trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub outcome: Outcome,
    /// Arc length of the executed trajectory, meters.
    pub distance: f64,
    /// Simulated time at termination, seconds.
    pub sim_time: f64,
    pub seed: u64,
    /// Steps in which motion was cut short by contact.
    pub contacts: usize,
    /// `t state event path_len` per planning cycle when tracing.
    pub trace: Vec<String>,
    /// Executed trajectory sampled at every scan when tracing.
    pub trajectory: Vec<Pose>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunError {
    InvalidConfig(String),
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::InvalidConfig(m) => write!(f, "invalid run config: {m}"),
        }
    }
}

impl std::error::Error for RunError {}

fn steps(period: f64, dt: f64) -> Result<usize, RunError> {
    let n = (period / dt).round();
    if !(n >= 1.0) || ((n * dt) - period).abs() > 1e-9 {
        return Err(RunError::InvalidConfig(format!(
            "period {period} is not a multiple of dt {dt}"
        )));
    }
    Ok(n as usize)
}

/// A closed-loop episode advanced one `dt` at a time.
pub struct Simulation {
    config: RunConfig,
    sensor: SensorSpec,
    scan_every: usize,
    plan_every: usize,
    max_steps: usize,
    grid: OccupancyGrid,
    planner: Box<dyn Planner + Send>,
    noise_rng: ChaCha8Rng,
    robot: RobotState,
    tracker: Option<Tracker>,
    k: usize,
    record: RunRecord,
    done: bool,
}

impl Simulation {
    pub fn new(config: &RunConfig) -> Result<Self, RunError> {
        if !(config.time_limit > 0.0 && config.dt > 0.0) {
            return Err(RunError::InvalidConfig("time_limit and dt must be positive".into()));
        }
        let scan_every = steps(config.scan_period, config.dt)?;
        let plan_every = steps(config.plan_period, config.dt)?;
        let sensor = config.sensor.with_noise(config.noise);
        sensor.validate().map_err(|e| RunError::InvalidConfig(e.to_string()))?;
        let world = &config.world;
        if world.disc_collides(config.start.point(), config.robot.radius) {
            return Err(RunError::InvalidConfig(format!("start {} collides", config.start)));
        }
        let spec = world
            .grid_spec(config.resolution)
            .map_err(|e| RunError::InvalidConfig(e.to_string()))?;
        let classifier = ClassifierConfig::default().with_max_range(config.planner.mapping_range());
        let grid = OccupancyGrid::new(spec, classifier).map_err(|e| RunError::InvalidConfig(e.to_string()))?;

        let noise_rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut planner_rng = ChaCha8Rng::seed_from_u64(config.seed);
        planner_rng.set_stream(1);
        let planner: Box<dyn Planner + Send> = match config.planner {
            PlannerKind::Nbv => {
                let mut c = config.nbv.clone();
                c.view.fov = sensor.fov();
                c.view.max_range = config.planner.mapping_range();
                Box::new(NbvPlanner::with_rng(c, planner_rng))
            }
            PlannerKind::B35 => Box::new(BaselinePlanner::new(BaselineConfig::short_range())),
            PlannerKind::B7 => Box::new(BaselinePlanner::new(BaselineConfig::long_range())),
        };
        let sim = Simulation {
            config: config.clone(),
            sensor,
            scan_every,
            plan_every,
            max_steps: (config.time_limit / config.dt).round() as usize,
            grid,
            planner,
            noise_rng,
            robot: RobotState::from_pose(&config.start),
            tracker: None,
            k: 0,
            record: RunRecord {
                outcome: Outcome::Failure,
                distance: 0.0,
                sim_time: 0.0,
                seed: config.seed,
                contacts: 0,
                trace: Vec::new(),
                trajectory: Vec::new(),
            },
            done: false,
        };
        Ok(sim)
    }

    pub fn grid(&self) -> &OccupancyGrid {
        &self.grid
    }

    pub fn robot(&self) -> Pose {
        self.robot.pose()
    }

    pub fn time(&self) -> f64 {
        self.k as f64 * self.config.dt
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn record(&self) -> &RunRecord {
        &self.record
    }

    fn scan(&mut self) {
        let pose = self.robot.pose();
        // contact truncation keeps the robot out of obstacles, so sensing
        // cannot fail here
        if let Ok(scan) = sense(&self.config.world, &pose, &self.sensor, &mut self.noise_rng) {
            let _ = self.grid.integrate_scan(&pose, &scan);
        }
    }

    fn finish(&mut self, outcome: Outcome, t: f64) {
        self.record.outcome = outcome;
        self.record.sim_time = t;
        self.done = true;
    }

    /// Advances one time step. Returns false once the episode has ended.
    pub fn step(&mut self) -> bool {
        if self.done {
            return false;
        }
        if self.k >= self.max_steps {
            self.finish(Outcome::Failure, self.max_steps as f64 * self.config.dt);
            return false;
        }
        let t = self.time();
        let pose = self.robot.pose();
        if self.k.is_multiple_of(self.scan_every) {
            self.scan();
            if self.config.trace {
                self.record.trajectory.push(pose);
            }
        }
        if self.k.is_multiple_of(self.plan_every) {
            let out = self.planner.cycle(&self.grid, &pose, &self.config.goal);
            if self.config.trace {
                let len = out.waypoints.as_ref().map_or(0.0, |p| p.length());
                self.record
                    .trace
                    .push(format!("{t:.2} {} {} {len:.3}", out.state, out.event));
            }
            let outcome = match out.status {
                PlannerStatus::Active => None,
                PlannerStatus::Success => Some(Outcome::Success),
                PlannerStatus::Unreachable => Some(Outcome::Unreachable),
                PlannerStatus::Failure => Some(Outcome::Failure),
            };
            if let Some(o) = outcome {
                self.finish(o, t);
                return false;
            }
            if let Some(path) = out.waypoints {
                self.tracker = Some(Tracker::new(self.config.robot, &path));
            }
        }
        if let Some(tr) = self.tracker.as_mut() {
            let step = tr.step(&mut self.robot, &self.config.world, self.config.dt);
            self.record.distance += step.distance;
            self.record.contacts += usize::from(step.contact);
        }
        self.k += 1;
        if self.config.goal.contains(self.robot.point()) {
            self.finish(Outcome::Success, self.time());
            return false;
        }
        true
    }

    pub fn into_record(self) -> RunRecord {
        self.record
    }
}

/// Runs one closed-loop episode. Deterministic for a given config.
pub fn run(config: &RunConfig) -> Result<RunRecord, RunError> {
    let mut sim = Simulation::new(config)?;
    while sim.step() {}
    Ok(sim.into_record())
}

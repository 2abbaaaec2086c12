use std::path::Path;

use nbv_core::sim::{run, Environment, NoiseLevel, Outcome, PlannerKind, RunConfig, RunRecord};
use nbv_core::Pose;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{as_str, BenchError};

/// One grid of runs: every start of the environment (optionally restricted
/// to some groups) times planners times noise presets times `runs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    /// Bundled environment name or path to an environment file.
    pub env: String,
    #[serde(with = "as_str::vec")]
    pub planners: Vec<PlannerKind>,
    #[serde(with = "as_str::vec")]
    pub noise: Vec<NoiseLevel>,
    /// Runs per start.
    pub runs: u32,
    /// Run `i` of the grid uses seed `seed + i`.
    pub seed: u64,
    /// Start groups to include; empty means all of them.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub groups: Vec<String>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            env: "open".into(),
            planners: PlannerKind::ALL.to_vec(),
            noise: vec![NoiseLevel::Low, NoiseLevel::High],
            runs: 5,
            seed: 1,
            groups: Vec::new(),
        }
    }
}

/// A single run of the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Job {
    pub index: usize,
    pub group: String,
    pub start: Pose,
    pub planner: PlannerKind,
    pub noise: NoiseLevel,
    pub seed: u64,
}

/// One line of `raw.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub env: String,
    pub group: String,
    pub start: String,
    #[serde(with = "as_str")]
    pub planner: PlannerKind,
    #[serde(with = "as_str")]
    pub noise: NoiseLevel,
    pub seed: u64,
    #[serde(with = "as_str")]
    pub outcome: Outcome,
    pub distance: f64,
    pub sim_time: f64,
}

pub fn format_start(p: &Pose) -> String {
    format!("{} {}", p.x, p.y)
}

impl ExperimentSpec {
    pub fn load_environment(&self) -> Result<Environment, BenchError> {
        let looks_like_file = self.env.ends_with(".env") || self.env.contains(std::path::MAIN_SEPARATOR);
        let env = if looks_like_file {
            let path = Path::new(&self.env);
            let text = std::fs::read_to_string(path).map_err(|source| BenchError::Io {
                path: path.to_path_buf(),
                source,
            })?;
            Environment::parse(&text)
        } else {
            Environment::builtin(&self.env)
        };
        env.map_err(|e| BenchError::Config(format!("environment {}: {e}", self.env)))
    }

    pub fn validate(&self, env: &Environment) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::Config(m));
        if self.runs == 0 {
            return bad("runs must be at least 1".into());
        }
        if self.planners.is_empty() || self.noise.is_empty() {
            return bad("need at least one planner and one noise preset".into());
        }
        let known = env.groups();
        for g in &self.groups {
            if !known.contains(g) {
                return bad(format!("environment {} has no start group {g:?}", env.name()));
            }
        }
        if self.jobs(env).is_empty() {
            return bad("the grid is empty".into());
        }
        Ok(())
    }

    /// The grid in index order: noise, planner, start, repetition.
    pub fn jobs(&self, env: &Environment) -> Vec<Job> {
        let mut out = Vec::new();
        for &noise in &self.noise {
            for &planner in &self.planners {
                for s in &env.starts {
                    if !self.groups.is_empty() && !self.groups.contains(&s.group) {
                        continue;
                    }
                    for _ in 0..self.runs {
                        let index = out.len();
                        out.push(Job {
                            index,
                            group: s.group.clone(),
                            start: s.pose,
                            planner,
                            noise,
                            seed: self.seed.wrapping_add(index as u64),
                        });
                    }
                }
            }
        }
        out
    }
}

impl Job {
    pub fn config(&self, env: &Environment) -> RunConfig {
        RunConfig::new(env, self.start, self.planner, self.noise.params(), self.seed)
    }

    pub fn row(&self, env: &Environment, rec: &RunRecord) -> RunRow {
        RunRow {
            env: env.name().to_string(),
            group: self.group.clone(),
            start: format_start(&self.start),
            planner: self.planner,
            noise: self.noise,
            seed: self.seed,
            outcome: rec.outcome,
            distance: rec.distance,
            sim_time: rec.sim_time,
        }
    }
}

/// Runs the whole grid on `workers` threads. Rows come back in job order
/// whatever the worker count.
pub fn run_experiment(spec: &ExperimentSpec, workers: usize) -> Result<Vec<RunRow>, BenchError> {
    let env = spec.load_environment()?;
    spec.validate(&env)?;
    let jobs = spec.jobs(&env);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| BenchError::Config(format!("worker pool: {e}")))?;
    pool.install(|| {
        jobs.par_iter()
            .map(|job| {
                let rec = run(&job.config(&env)).map_err(|e| BenchError::Run {
                    index: job.index,
                    msg: e.to_string(),
                })?;
                Ok(job.row(&env, &rec))
            })
            .collect()
    })
}

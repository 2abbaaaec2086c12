use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nbv_bench::experiment::format_start;
use nbv_bench::report;
use nbv_bench::sweep::seed_sweep;
use nbv_bench::verify::{verify_dir, Reference};
use nbv_bench::{run_experiment, BenchError, ExperimentSpec};
use nbv_core::sim::{run, NoiseLevel, PlannerKind};

#[derive(Parser)]
#[command(name = "bench", about = "Run planner experiments and check their results")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GridArgs {
    /// Bundled environment (open, room) or path to an environment file
    #[arg(long, default_value = "open")]
    env: String,
    #[arg(long, value_delimiter = ',', default_value = "nbv,b35,b7")]
    planner: Vec<PlannerKind>,
    #[arg(long, value_delimiter = ',', default_value = "low,high")]
    noise: Vec<NoiseLevel>,
    /// Base seed; run i of the grid uses seed + i
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Only these start groups
    #[arg(long, value_delimiter = ',')]
    group: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a grid of simulations and write raw.csv, table.md and spec.toml
    Run {
        #[command(flatten)]
        grid: GridArgs,
        /// Runs per start
        #[arg(long, default_value_t = 5)]
        runs: u32,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = default_workers())]
        workers: usize,
    },
    /// Check an experiment directory against a reference file
    Verify {
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-execute one row of raw.csv with trace logging
    Replay {
        #[arg(long)]
        out: PathBuf,
        /// Zero-based row of raw.csv
        #[arg(long)]
        record: usize,
    },
    /// Re-run one configuration and check the records are bit-identical
    Sweep {
        #[command(flatten)]
        grid: GridArgs,
        /// Index into the environment's start list
        #[arg(long, default_value_t = 0)]
        start: usize,
        #[arg(long, default_value_t = 3)]
        n: usize,
    },
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

impl GridArgs {
    fn spec(&self, runs: u32) -> ExperimentSpec {
        ExperimentSpec {
            env: self.env.clone(),
            planners: self.planner.clone(),
            noise: self.noise.clone(),
            runs,
            seed: self.seed,
            groups: self.group.clone(),
        }
    }
}

/// Ok(true) on success, Ok(false) when a check failed.
fn execute(cli: Cli) -> Result<bool, BenchError> {
    match cli.command {
        Command::Run {
            grid,
            runs,
            out,
            workers,
        } => {
            let spec = grid.spec(runs);
            let rows = run_experiment(&spec, workers)?;
            let table = report::write_experiment(&out, &spec, &rows)?;
            print!("{}", table.to_markdown());
            eprintln!("{} runs written to {}", rows.len(), out.display());
            Ok(true)
        }
        Command::Verify { reference, out } => {
            let reference = Reference::load(&reference)?;
            let results = verify_dir(&reference, &out)?;
            for r in &results {
                println!("{r}");
            }
            let failed = results.iter().filter(|r| !r.passed).count();
            println!("{} checks, {failed} failed", results.len());
            Ok(failed == 0)
        }
        Command::Replay { out, record } => {
            let (spec, rows) = report::read_experiment(&out)?;
            let env = spec.load_environment()?;
            let jobs = spec.jobs(&env);
            let (Some(job), Some(row)) = (jobs.get(record), rows.get(record)) else {
                return Err(BenchError::Config(format!(
                    "row {record} out of range ({} rows)",
                    rows.len()
                )));
            };
            let mut config = job.config(&env);
            config.trace = true;
            let rec = run(&config).map_err(|e| BenchError::Run {
                index: record,
                msg: e.to_string(),
            })?;
            for line in &rec.trace {
                println!("{line}");
            }
            let replayed = job.row(&env, &rec);
            println!(
                "{} {} {} seed {}: {} after {} m in {} s",
                replayed.group,
                format_start(&job.start),
                job.planner,
                job.seed,
                rec.outcome,
                rec.distance,
                rec.sim_time
            );
            let same = &replayed == row && replayed.distance.to_bits() == row.distance.to_bits();
            let verdict = if same { "matches" } else { "differs from" };
            println!("{verdict} raw.csv");
            Ok(same)
        }
        Command::Sweep { grid, start, n } => {
            let spec = grid.spec(1);
            let env = spec.load_environment()?;
            let Some(s) = env.starts.get(start) else {
                return Err(BenchError::Config(format!(
                    "start {start} out of range ({} starts)",
                    env.starts.len()
                )));
            };
            let mut ok = true;
            for &noise in &spec.noise {
                for &planner in &spec.planners {
                    let config = nbv_core::sim::RunConfig::new(&env, s.pose, planner, noise.params(), spec.seed);
                    let rep = seed_sweep(&config, n).map_err(|e| BenchError::Run {
                        index: start,
                        msg: e.to_string(),
                    })?;
                    let verdict = match rep.first_mismatch {
                        None => "identical".to_string(),
                        Some(i) => format!("repetition {i} differs"),
                    };
                    let dist = rep.record.as_ref().map_or(f64::NAN, |r| r.distance);
                    println!("{planner} {noise}: {} runs, {verdict}, distance {dist}", rep.runs);
                    ok &= rep.identical();
                }
            }
            Ok(ok)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

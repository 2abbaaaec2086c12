//! Prints the robot's occupancy map part-way through a run.
//!
//! `cargo run --example map_snapshot -- <open|room|file.env> <start> <planner> <noise> <seed> <seconds>`

use nbv_core::grid::{CellClass, CellIndex};
use nbv_core::sim::{Environment, NoiseLevel, PlannerKind, RunConfig, Simulation};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    if args.len() != 7 {
        eprintln!("usage: map_snapshot <env> <start> <planner> <noise> <seed> <seconds>");
        std::process::exit(2);
    }
    let env = if args[1].ends_with(".env") {
        Environment::parse(&std::fs::read_to_string(&args[1]).unwrap()).unwrap()
    } else {
        Environment::builtin(&args[1]).unwrap()
    };
    let start: usize = args[2].parse().unwrap();
    let planner: PlannerKind = args[3].parse().unwrap();
    let noise: NoiseLevel = args[4].parse().unwrap();
    let seed: u64 = args[5].parse().unwrap();
    let until: f64 = args[6].parse().unwrap();

    let cfg = RunConfig::new(&env, env.starts[start].pose, planner, noise.params(), seed);
    let mut sim = Simulation::new(&cfg).unwrap();
    while sim.time() < until - 1e-9 && sim.step() {}
    let g = sim.grid();
    let spec = *g.spec();
    let robot = spec.world_to_cell(sim.robot().point());
    let goal = spec.world_to_cell(env.goal.center);
    println!("t = {:.2} s, robot at {}", sim.time(), sim.robot());
    // R robot, G goal, # obstacle, n uncertain, . unknown
    for y in (0..spec.height).rev() {
        let row: String = (0..spec.width)
            .map(|x| {
                let c = CellIndex::new(x, y);
                if Some(c) == robot {
                    return 'R';
                }
                if Some(c) == goal {
                    return 'G';
                }
                match g.classify(c).unwrap() {
                    CellClass::Unknown => '.',
                    CellClass::Free => ' ',
                    CellClass::Obstacle => '#',
                    CellClass::Uncertain => 'n',
                }
            })
            .collect();
        println!("{row}");
    }
}

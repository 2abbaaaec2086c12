// The `pub` checks are also run by the bench acceptance target.
use std::collections::{BTreeSet, VecDeque};

use nbv_core::grid::{CellIndex, ClassifierConfig, GridSpec, OccupancyGrid};
use nbv_core::planner::check_goal_reachable;
use nbv_core::search::{astar, cell_collides, CollisionPolicy, Footprint, GoalRegion, SearchError};
use nbv_core::{CellClass, Path, Pose, WorldPoint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const N: usize = 20;

fn random_grid(rng: &mut ChaCha8Rng) -> OccupancyGrid {
    let spec = GridSpec::new(N, N, 1.0, WorldPoint::new(0.0, 0.0)).unwrap();
    let mut g = OccupancyGrid::new(spec, ClassifierConfig::default()).unwrap();
    let occ = rng.random_range(0.03..0.12);
    let unsure = rng.random_range(0.0..0.2);
    for c in spec.cells().collect::<Vec<_>>() {
        let u: f64 = rng.random();
        let p = if u < occ {
            Some(0.9)
        } else if u < occ + unsure {
            Some(0.5)
        } else if u < occ + 2.0 * unsure {
            None
        } else {
            Some(0.1)
        };
        g.set_probability(c, p).unwrap();
    }
    g
}

/// Collision by definition: out-of-bounds or obstacle in the 3x3 block, or
/// more than two uncertain cells in it. Unknown is free.
fn blocked(g: &OccupancyGrid, x: i64, y: i64) -> bool {
    let mut uncertain = 0;
    for dy in -1..=1 {
        for dx in -1..=1 {
            let (cx, cy) = (x + dx, y + dy);
            if cx < 0 || cy < 0 || cx >= N as i64 || cy >= N as i64 {
                return true;
            }
            match g.classify(CellIndex::new(cx as usize, cy as usize)).unwrap() {
                CellClass::Obstacle => return true,
                CellClass::Uncertain => uncertain += 1,
                _ => {}
            }
        }
    }
    uncertain > 2
}

fn goal_cells(goal: &GoalRegion) -> BTreeSet<(i64, i64)> {
    let mut out = BTreeSet::new();
    for y in 0..N as i64 {
        for x in 0..N as i64 {
            let c = WorldPoint::new(x as f64 + 0.5, y as f64 + 0.5);
            if c.distance(&goal.center) <= goal.radius {
                out.insert((x, y));
            }
        }
    }
    out
}

/// Plain Dijkstra over (straight, diagonal) step counts.
fn dijkstra(g: &OccupancyGrid, start: (i64, i64), goals: &BTreeSet<(i64, i64)>) -> Option<f64> {
    let cost = |s: u32, d: u32| s as f64 + d as f64 * std::f64::consts::SQRT_2;
    let mut best = vec![None::<(u32, u32)>; N * N];
    let mut done = vec![false; N * N];
    let id = |(x, y): (i64, i64)| y as usize * N + x as usize;
    best[id(start)] = Some((0, 0));
    loop {
        let mut cur = None;
        for y in 0..N as i64 {
            for x in 0..N as i64 {
                let i = id((x, y));
                if let (false, Some(b)) = (done[i], best[i]) {
                    if cur.is_none_or(|(_, cb): ((i64, i64), (u32, u32))| cost(b.0, b.1) < cost(cb.0, cb.1)) {
                        cur = Some(((x, y), b));
                    }
                }
            }
        }
        let ((x, y), (s, d)) = cur?;
        if goals.contains(&(x, y)) {
            return Some(cost(s, d));
        }
        done[id((x, y))] = true;
        for dy in -1..=1i64 {
            for dx in -1..=1i64 {
                let (nx, ny) = (x + dx, y + dy);
                if (dx, dy) == (0, 0) || nx < 0 || ny < 0 || nx >= N as i64 || ny >= N as i64 {
                    continue;
                }
                if done[id((nx, ny))] || blocked(g, nx, ny) {
                    continue;
                }
                let cand = if dx != 0 && dy != 0 { (s, d + 1) } else { (s + 1, d) };
                let better = best[id((nx, ny))].is_none_or(|b| cost(cand.0, cand.1) < cost(b.0, b.1));
                if better {
                    best[id((nx, ny))] = Some(cand);
                }
            }
        }
    }
}

pub fn astar_cost_equals_dijkstra() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let fp = Footprint::default();
    let policy = CollisionPolicy::default();
    let (mut found, mut instances) = (0, 0);
    while instances < 100 {
        let g = random_grid(&mut rng);
        let start = (rng.random_range(1..N as i64 - 1), rng.random_range(1..N as i64 - 1));
        if blocked(&g, start.0, start.1) {
            continue;
        }
        instances += 1;
        let goal = GoalRegion::new(
            WorldPoint::new(rng.random_range(1.0..19.0), rng.random_range(1.0..19.0)),
            rng.random_range(0.5..1.6),
        );
        let goals = goal_cells(&goal);
        let pose = Pose::new(start.0 as f64 + 0.5, start.1 as f64 + 0.5, 0.0);
        let oracle = dijkstra(&g, start, &goals);
        match (astar(&g, &pose, &goal, &fp, &policy), oracle) {
            (Ok(path), Some(cost)) => {
                found += 1;
                assert_eq!(path.cost(), cost);
                // the path itself is legal and its step counts add up
                assert_eq!(path.cells[0], CellIndex::new(start.0 as usize, start.1 as usize));
                let last = path.cells.last().unwrap();
                assert!(goals.contains(&(last.x as i64, last.y as i64)));
                let (mut s, mut d) = (0, 0);
                for w in path.cells.windows(2) {
                    assert_eq!(w[0].chebyshev(&w[1]), 1);
                    if w[0].manhattan(&w[1]) == 2 {
                        d += 1;
                    } else {
                        s += 1;
                    }
                    assert!(!blocked(&g, w[1].x as i64, w[1].y as i64));
                }
                assert_eq!((s, d), (path.straight, path.diagonal));
            }
            (Err(SearchError::NoPath), None) => {}
            (got, want) => panic!("astar {got:?} vs oracle {want:?}"),
        }
    }
    // the instance mix exercises both outcomes
    assert!(found > 30 && found < 100, "{found} reachable");
}

#[test]
fn collision_matches_definition() {
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    let fp = Footprint::default();
    let policy = CollisionPolicy::default();
    for _ in 0..20 {
        let g = random_grid(&mut rng);
        for c in g.spec().cells() {
            assert_eq!(cell_collides(&g, c, &fp, &policy), blocked(&g, c.x as i64, c.y as i64));
        }
    }
}

/// Flood fill over non-colliding cells; the start cell is exempt.
fn reachable(g: &OccupancyGrid, start: (i64, i64), goals: &BTreeSet<(i64, i64)>) -> bool {
    let mut seen = BTreeSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some((x, y)) = queue.pop_front() {
        if goals.contains(&(x, y)) {
            return true;
        }
        for dy in -1..=1 {
            for dx in -1..=1 {
                let n = (x + dx, y + dy);
                if n.0 < 0 || n.1 < 0 || n.0 >= N as i64 || n.1 >= N as i64 || seen.contains(&n) {
                    continue;
                }
                if !blocked(g, n.0, n.1) {
                    seen.insert(n);
                    queue.push_back(n);
                }
            }
        }
    }
    false
}

#[test]
fn reachability_matches_flood_fill() {
    let mut rng = ChaCha8Rng::seed_from_u64(62);
    let fp = Footprint::default();
    let policy = CollisionPolicy::default();
    let mut outcomes = [0, 0];
    for _ in 0..100 {
        let g = random_grid(&mut rng);
        let start = (rng.random_range(0..N as i64), rng.random_range(0..N as i64));
        let goal = GoalRegion::new(
            WorldPoint::new(rng.random_range(1.0..19.0), rng.random_range(1.0..19.0)),
            rng.random_range(0.5..1.6),
        );
        let pose = Pose::new(start.0 as f64 + 0.5, start.1 as f64 + 0.5, 0.0);
        let want = reachable(&g, start, &goal_cells(&goal));
        assert_eq!(check_goal_reachable(&g, &pose, &goal, &fp, &policy), want);
        outcomes[want as usize] += 1;
    }
    assert!(outcomes[0] > 0 && outcomes[1] > 0);
}

#[test]
fn goal_ringed_by_uncertain_cells() {
    let spec = GridSpec::new(N, N, 1.0, WorldPoint::new(0.0, 0.0)).unwrap();
    let mut g = OccupancyGrid::new(spec, ClassifierConfig::default()).unwrap();
    for c in spec.cells().collect::<Vec<_>>() {
        let ring = c.chebyshev(&CellIndex::new(10, 10)) == 3;
        g.set_probability(c, Some(if ring { 0.5 } else { 0.1 })).unwrap();
    }
    let goal = GoalRegion::new(WorldPoint::new(10.5, 10.5), 0.5);
    let fp = Footprint::default();
    let policy = CollisionPolicy::default();
    let pose = Pose::new(2.5, 2.5, 0.0);
    assert!(!reachable(&g, (2, 2), &goal_cells(&goal)));
    assert!(!check_goal_reachable(&g, &pose, &goal, &fp, &policy));

    // open one gap three cells wide: poses in it see at most two ring cells
    for x in 9..=11 {
        g.set_probability(CellIndex::new(x, 7), Some(0.1)).unwrap();
    }
    assert!(reachable(&g, (2, 2), &goal_cells(&goal)));
    assert!(check_goal_reachable(&g, &pose, &goal, &fp, &policy));
}

#[test]
fn masking_single_unknown_cell_marks_a_diamond() {
    let spec = GridSpec::new(30, 30, 1.0, WorldPoint::new(0.0, 0.0)).unwrap();
    let mut g = OccupancyGrid::new(spec, ClassifierConfig::default()).unwrap();
    for c in spec.cells().collect::<Vec<_>>() {
        g.set_probability(c, Some(0.1)).unwrap();
    }
    let hole = CellIndex::new(15, 15);
    g.set_probability(hole, None).unwrap();
    let path = Path::new((2..28).map(|x| Pose::unoriented(x as f64 + 0.5, 15.5)).collect());
    let (start, goal) = (WorldPoint::new(2.5, 15.5), WorldPoint::new(27.5, 15.5));

    let masked = g.mask_hypothesis_region(&path, &Footprint::default(), 4, start, goal, 2);

    let mut diamond = BTreeSet::new();
    for c in spec.cells() {
        if c.manhattan(&hole) <= 4 {
            diamond.insert(c);
        }
    }
    assert_eq!(diamond.len(), 41);
    assert_eq!(masked, 41);
    for c in spec.cells() {
        let expected = diamond.contains(&c);
        assert_eq!(g.is_masked(c), expected, "{c:?}");
        if expected {
            assert_eq!(g.classify(c).unwrap(), CellClass::Obstacle);
        }
    }
}

#[test]
fn masking_spares_start_and_goal() {
    let spec = GridSpec::new(30, 30, 1.0, WorldPoint::new(0.0, 0.0)).unwrap();
    let mut g = OccupancyGrid::new(spec, ClassifierConfig::default()).unwrap();
    for c in spec.cells().collect::<Vec<_>>() {
        g.set_probability(c, Some(0.1)).unwrap();
    }
    let hole = CellIndex::new(6, 15);
    g.set_probability(hole, Some(0.5)).unwrap();
    let path = Path::new((4..28).map(|x| Pose::unoriented(x as f64 + 0.5, 15.5)).collect());
    let start = CellIndex::new(4, 15);
    let masked = g.mask_hypothesis_region(
        &path,
        &Footprint::default(),
        4,
        WorldPoint::new(4.5, 15.5),
        WorldPoint::new(27.5, 15.5),
        2,
    );
    let expected = spec
        .cells()
        .filter(|c| c.manhattan(&hole) <= 4 && c.chebyshev(&start) > 2)
        .count();
    assert_eq!(masked, expected);
    assert!(!g.is_masked(start));
}

#[test]
fn astar_cost_equals_dijkstra_test() {
    astar_cost_equals_dijkstra();
}

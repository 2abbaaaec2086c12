use std::fmt::Write;

use nbv_core::sim::{NoiseLevel, Outcome, PlannerKind};

use crate::RunRow;

/// Outcome counts and distance statistics for a set of runs. Distances are
/// taken over successful runs only.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub success: usize,
    pub unreachable: usize,
    pub failure: usize,
    pub mean: Option<f64>,
    /// Half-width of the normal-approximation 95% interval of the mean.
    pub half_width: Option<f64>,
}

impl Summary {
    pub fn of<'a>(rows: impl IntoIterator<Item = &'a RunRow>) -> Self {
        let (mut u, mut f) = (0, 0);
        let mut d = Vec::new();
        for r in rows {
            match r.outcome {
                Outcome::Success => d.push(r.distance),
                Outcome::Unreachable => u += 1,
                Outcome::Failure => f += 1,
            }
        }
        let n = d.len() as f64;
        let mean = (!d.is_empty()).then(|| d.iter().sum::<f64>() / n);
        let half_width = mean.filter(|_| d.len() > 1).map(|m| {
            let var = d.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
            1.96 * var.sqrt() / n.sqrt()
        });
        Self {
            success: d.len(),
            unreachable: u,
            failure: f,
            mean,
            half_width,
        }
    }

    pub fn total(&self) -> usize {
        self.success + self.unreachable + self.failure
    }
}

/// Relative difference of a baseline mean against the NBV mean.
pub fn percent_diff(baseline: Option<f64>, nbv: Option<f64>) -> Option<f64> {
    match (baseline, nbv) {
        (Some(b), Some(n)) if n > 0.0 => Some(100.0 * (b - n) / n),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub group: String,
    pub noise: NoiseLevel,
    pub planner: PlannerKind,
    pub summary: Summary,
    /// Percent difference against NBV in the same group and noise preset.
    pub diff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsTable {
    pub env: String,
    pub cells: Vec<Cell>,
}

fn distinct<T: PartialEq + Clone>(it: impl Iterator<Item = T>) -> Vec<T> {
    let mut out = Vec::new();
    for x in it {
        if !out.contains(&x) {
            out.push(x);
        }
    }
    out
}

impl MetricsTable {
    /// Groups cells by (group, noise, planner), each in order of first
    /// appearance in `rows`.
    pub fn from_rows(rows: &[RunRow]) -> Self {
        let groups = distinct(rows.iter().map(|r| r.group.clone()));
        let noises = distinct(rows.iter().map(|r| r.noise));
        let planners = distinct(rows.iter().map(|r| r.planner));
        let mut cells = Vec::new();
        for g in &groups {
            for &noise in &noises {
                let of = |p: PlannerKind| {
                    Summary::of(
                        rows.iter()
                            .filter(|r| &r.group == g && r.noise == noise && r.planner == p),
                    )
                };
                let nbv = of(PlannerKind::Nbv).mean;
                for &planner in &planners {
                    let summary = of(planner);
                    if summary.total() == 0 {
                        continue;
                    }
                    let diff = match planner {
                        PlannerKind::Nbv => None,
                        _ => percent_diff(summary.mean, nbv),
                    };
                    cells.push(Cell {
                        group: g.clone(),
                        noise,
                        planner,
                        summary,
                        diff,
                    });
                }
            }
        }
        Self {
            env: rows.first().map(|r| r.env.clone()).unwrap_or_default(),
            cells,
        }
    }

    pub fn get(&self, group: &str, noise: NoiseLevel, planner: PlannerKind) -> Option<&Cell> {
        self.cells
            .iter()
            .find(|c| c.group == group && c.noise == noise && c.planner == planner)
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        writeln!(s, "# {}\n", self.env).unwrap();
        writeln!(
            s,
            "| group | noise | planner | S / U / F | distance (m) | 95% CI (m) | diff. |"
        )
        .unwrap();
        writeln!(s, "|---|---|---|---|---|---|---|").unwrap();
        let num = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.9}"));
        for c in &self.cells {
            let m = &c.summary;
            let diff = c.diff.map_or(String::new(), |d| format!("{d:+.1}%"));
            writeln!(
                s,
                "| {} | {} | {} | {} / {} / {} | {} | {} | {} |",
                c.group,
                c.noise,
                c.planner,
                m.success,
                m.unreachable,
                m.failure,
                num(m.mean),
                num(m.half_width),
                diff
            )
            .unwrap();
        }
        s
    }
}

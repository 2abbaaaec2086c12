//! Directional checks of an experiment's results against a reference file.
//!
//! ```toml
//! [experiment]
//! env = "open"
//! planners = ["nbv", "b35", "b7"]
//! noise = ["low", "high"]
//! runs = 5
//! seed = 1
//!
//! [[check]]
//! name = "B3.5 detours from the right"
//! kind = "mean_exceeds"     # mean(a) >= (1 + margin) * mean(b)
//! group = "right"
//! a = "b35"
//! b = "nbv"
//! margin = 0.10
//! ```
//!
//! A check without `noise` is evaluated once per noise preset of the
//! experiment; one without `group` pools all groups.

use std::fmt;
use std::path::Path;

use nbv_core::sim::{NoiseLevel, PlannerKind};
use serde::Deserialize;

use crate::{as_str, report, BenchError, ExperimentSpec, RunRow, Summary};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Rule {
    /// mean(a) >= (1 + margin) * mean(b)
    MeanExceeds {
        #[serde(with = "as_str")]
        a: PlannerKind,
        #[serde(with = "as_str")]
        b: PlannerKind,
        margin: f64,
    },
    /// mean(a) <= (1 + margin) * mean(b)
    MeanAtMost {
        #[serde(with = "as_str")]
        a: PlannerKind,
        #[serde(with = "as_str")]
        b: PlannerKind,
        margin: f64,
    },
    /// |mean(a) - mean(b)| / mean(b) <= tolerance
    MeanClose {
        #[serde(with = "as_str")]
        a: PlannerKind,
        #[serde(with = "as_str")]
        b: PlannerKind,
        tolerance: f64,
    },
    /// U(a) > U(b)
    UnreachableExceeds {
        #[serde(with = "as_str")]
        a: PlannerKind,
        #[serde(with = "as_str")]
        b: PlannerKind,
    },
    /// U(a) / runs(a) <= rate
    UnreachableRateAtMost {
        #[serde(with = "as_str")]
        a: PlannerKind,
        rate: f64,
    },
    Always,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct Check {
    pub name: String,
    #[serde(default)]
    pub group: Option<String>,
    #[serde(default, deserialize_with = "as_str::opt::deserialize")]
    pub noise: Option<NoiseLevel>,
    #[serde(flatten)]
    pub rule: Rule,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Reference {
    pub experiment: ExperimentSpec,
    #[serde(default, rename = "check")]
    pub checks: Vec<Check>,
}

impl Reference {
    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path).map_err(|source| BenchError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text).map_err(|source| BenchError::Toml {
            path: path.to_path_buf(),
            source,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub group: Option<String>,
    pub noise: Option<NoiseLevel>,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{status} {}", self.name)?;
        let scope: Vec<String> = self
            .group
            .iter()
            .cloned()
            .chain(self.noise.map(|n| n.to_string()))
            .collect();
        if !scope.is_empty() {
            write!(f, " [{}]", scope.join("/"))?;
        }
        write!(f, ": {}", self.detail)
    }
}

fn fmt_mean(m: Option<f64>) -> String {
    m.map_or("n/a".into(), |x| format!("{x:.3}"))
}

fn evaluate(rule: &Rule, of: impl Fn(PlannerKind) -> Summary) -> (bool, String) {
    let means = |a, b| {
        let (sa, sb) = (of(a), of(b));
        (
            sa.mean,
            sb.mean,
            format!("{a} {} vs {b} {}", fmt_mean(sa.mean), fmt_mean(sb.mean)),
        )
    };
    let rel = |x: f64, y: f64| format!(" ({:+.1}%)", 100.0 * (x - y) / y);
    match *rule {
        Rule::MeanExceeds { a, b, margin } => match means(a, b) {
            (Some(x), Some(y), d) => (x >= (1.0 + margin) * y, d + &rel(x, y)),
            (_, _, d) => (false, d),
        },
        Rule::MeanAtMost { a, b, margin } => match means(a, b) {
            (Some(x), Some(y), d) => (x <= (1.0 + margin) * y, d + &rel(x, y)),
            (_, _, d) => (false, d),
        },
        Rule::MeanClose { a, b, tolerance } => match means(a, b) {
            (Some(x), Some(y), d) => ((x - y).abs() <= tolerance * y, d + &rel(x, y)),
            (_, _, d) => (false, d),
        },
        Rule::UnreachableExceeds { a, b } => {
            let (ua, ub) = (of(a).unreachable, of(b).unreachable);
            (ua > ub, format!("unreachable {a} {ua} vs {b} {ub}"))
        }
        Rule::UnreachableRateAtMost { a, rate } => {
            let s = of(a);
            let total = s.total();
            let ok = total > 0 && s.unreachable as f64 <= rate * total as f64;
            (ok, format!("unreachable {a} {}/{total}", s.unreachable))
        }
        Rule::Always => (true, "trivially true".into()),
    }
}

/// Evaluates every check of `reference` on `rows`. Fails when the rows were
/// produced by a different experiment.
pub fn verify(reference: &Reference, produced: &ExperimentSpec, rows: &[RunRow]) -> Result<Vec<CheckResult>, String> {
    if &reference.experiment != produced {
        return Err(format!("expected {:?}, found {:?}", reference.experiment, produced));
    }
    let mut out = Vec::new();
    for check in &reference.checks {
        let noises: Vec<Option<NoiseLevel>> = match check.noise {
            Some(n) => vec![Some(n)],
            None => produced.noise.iter().copied().map(Some).collect(),
        };
        for noise in noises {
            let of = |p: PlannerKind| {
                Summary::of(rows.iter().filter(|r| {
                    r.planner == p
                        && noise.is_none_or(|n| r.noise == n)
                        && check.group.as_ref().is_none_or(|g| &r.group == g)
                }))
            };
            let (passed, detail) = evaluate(&check.rule, of);
            out.push(CheckResult {
                name: check.name.clone(),
                group: check.group.clone(),
                noise,
                passed,
                detail,
            });
        }
    }
    Ok(out)
}

/// Loads the experiment directory `dir` and verifies it against `reference`.
pub fn verify_dir(reference: &Reference, dir: &Path) -> Result<Vec<CheckResult>, BenchError> {
    let (spec, rows) = report::read_experiment(dir)?;
    verify(reference, &spec, &rows).map_err(|detail| BenchError::SpecMismatch {
        produced: dir.to_path_buf(),
        detail,
    })
}

use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

fn bench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bench")).args(args).output().unwrap()
}

fn small_run(out: &Path, workers: &str) -> Output {
    bench(&[
        "run",
        "--env",
        "open",
        "--group",
        "right",
        "--planner",
        "nbv,b35",
        "--runs",
        "2",
        "--seed",
        "7",
        "--workers",
        workers,
        "--out",
        out.to_str().unwrap(),
    ])
}

fn read(dir: &Path, f: &str) -> String {
    std::fs::read_to_string(dir.join(f)).unwrap()
}

#[test]
fn run_writes_the_full_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let out = small_run(tmp.path(), "2");
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let raw = read(tmp.path(), "raw.csv");
    let mut lines = raw.lines();
    assert_eq!(
        lines.next().unwrap(),
        "env,group,start,planner,noise,seed,outcome,distance,sim_time"
    );
    // 6 right starts x 2 runs x 2 planners x 2 noise presets
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 48);
    let seeds: Vec<u64> = rows
        .iter()
        .map(|r| r.split(',').nth(5).unwrap().parse().unwrap())
        .collect();
    assert_eq!(seeds, (7..55).collect::<Vec<_>>());
}

/// Means over successful runs, recomputed from raw.csv by hand.
fn means_from_raw(raw: &str) -> BTreeMap<(String, String, String), f64> {
    let mut acc: BTreeMap<(String, String, String), (f64, usize)> = BTreeMap::new();
    for line in raw.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if f[6] != "success" {
            continue;
        }
        let e = acc.entry((f[1].into(), f[4].into(), f[3].into())).or_default();
        e.0 += f[7].parse::<f64>().unwrap();
        e.1 += 1;
    }
    acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
}

#[test]
fn table_means_match_raw_rows() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(small_run(tmp.path(), "1").status.success());
    let expected = means_from_raw(&read(tmp.path(), "raw.csv"));
    let table = read(tmp.path(), "table.md");
    let mut seen = 0;
    for line in table.lines().filter(|l| l.starts_with("| right")) {
        let f: Vec<&str> = line.split('|').map(str::trim).collect();
        let key = (f[1].to_string(), f[2].to_string(), f[3].to_string());
        let mean: f64 = f[5].parse().unwrap();
        assert!((mean - expected[&key]).abs() <= 1e-9, "{key:?}");
        seen += 1;
    }
    assert_eq!(seen, expected.len());
}

#[test]
fn reports_do_not_depend_on_workers() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(small_run(&a, "1").status.success());
    assert!(small_run(&b, "3").status.success());
    for f in ["raw.csv", "table.md", "spec.toml"] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}

fn write_ref(dir: &Path, checks: &str) -> String {
    let text = format!(
        "[experiment]\nenv = \"open\"\nplanners = [\"nbv\", \"b35\"]\nnoise = [\"low\", \"high\"]\n\
         runs = 2\nseed = 7\ngroups = [\"right\"]\n\n{checks}"
    );
    let path = dir.join("ref.toml");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn verify_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    assert!(small_run(&out, "2").status.success());
    let out = out.to_str().unwrap();

    let pass = write_ref(tmp.path(), "[[check]]\nname = \"x = x\"\nkind = \"always\"\n");
    let res = bench(&["verify", "--ref", &pass, "--out", out]);
    assert_eq!(res.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&res.stdout).contains("PASS x = x"));

    // NBV is never longer than itself by 10%
    let fail = write_ref(
        tmp.path(),
        "[[check]]\nname = \"impossible\"\nkind = \"mean_exceeds\"\na = \"nbv\"\nb = \"nbv\"\nmargin = 0.1\n",
    );
    let res = bench(&["verify", "--ref", &fail, "--out", out]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stdout).contains("FAIL impossible"));

    // a different base seed is a different experiment
    let mismatched = write_ref(tmp.path(), "").replace("ref.toml", "other.toml");
    let text = std::fs::read_to_string(tmp.path().join("ref.toml")).unwrap();
    std::fs::write(&mismatched, text.replace("seed = 7", "seed = 8")).unwrap();
    assert_eq!(
        bench(&["verify", "--ref", &mismatched, "--out", out]).status.code(),
        Some(2)
    );
}

#[test]
fn configuration_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let out = out.to_str().unwrap();
    assert_eq!(bench(&["run", "--planner", "b9", "--out", out]).status.code(), Some(2));
    assert_eq!(bench(&["run", "--runs", "0", "--out", out]).status.code(), Some(2));
    assert_eq!(bench(&["run", "--env", "moon", "--out", out]).status.code(), Some(2));
    assert_eq!(
        bench(&["run", "--group", "middle", "--out", out]).status.code(),
        Some(2)
    );
    assert_eq!(
        bench(&["verify", "--ref", "/nonexistent.toml", "--out", out])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn replay_reproduces_a_row() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(small_run(tmp.path(), "2").status.success());
    let res = bench(&["replay", "--out", tmp.path().to_str().unwrap(), "--record", "30"]);
    assert_eq!(res.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert!(stdout.lines().count() > 2);
    assert!(stdout.ends_with("matches raw.csv\n"));
    assert_eq!(
        bench(&["replay", "--out", tmp.path().to_str().unwrap(), "--record", "48"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn sweep_reports_identical_records() {
    let res = bench(&[
        "sweep",
        "--env",
        "room",
        "--planner",
        "nbv,b7",
        "--noise",
        "high",
        "--start",
        "4",
        "--n",
        "2",
    ]);
    assert_eq!(res.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert_eq!(stdout.matches("identical").count(), 2);
}

//! Files of an experiment directory: `spec.toml`, `raw.csv` and `table.md`.

use std::path::Path;

use crate::{BenchError, ExperimentSpec, MetricsTable, RunRow};

pub const SPEC_FILE: &str = "spec.toml";
pub const RAW_FILE: &str = "raw.csv";
pub const TABLE_FILE: &str = "table.md";

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> BenchError + '_ {
    move |source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_rows(path: &Path, rows: &[RunRow]) -> Result<(), BenchError> {
    let csv_err = |source| BenchError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(io(path))
}

pub fn read_rows(path: &Path) -> Result<Vec<RunRow>, BenchError> {
    let csv_err = |source| BenchError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().collect::<Result<_, _>>().map_err(csv_err)
}

pub fn read_spec(path: &Path) -> Result<ExperimentSpec, BenchError> {
    let text = std::fs::read_to_string(path).map_err(io(path))?;
    toml::from_str(&text).map_err(|source| BenchError::Toml {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes all three files into `dir`, creating it if needed.
pub fn write_experiment(dir: &Path, spec: &ExperimentSpec, rows: &[RunRow]) -> Result<MetricsTable, BenchError> {
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let spec_path = dir.join(SPEC_FILE);
    let text = toml::to_string(spec).map_err(|e| BenchError::Config(format!("serializing spec: {e}")))?;
    std::fs::write(&spec_path, text).map_err(io(&spec_path))?;
    write_rows(&dir.join(RAW_FILE), rows)?;
    let table = MetricsTable::from_rows(rows);
    let table_path = dir.join(TABLE_FILE);
    std::fs::write(&table_path, table.to_markdown()).map_err(io(&table_path))?;
    Ok(table)
}

/// Spec and rows of a finished experiment directory.
pub fn read_experiment(dir: &Path) -> Result<(ExperimentSpec, Vec<RunRow>), BenchError> {
    Ok((read_spec(&dir.join(SPEC_FILE))?, read_rows(&dir.join(RAW_FILE))?))
}

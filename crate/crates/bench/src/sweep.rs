use nbv_core::sim::{run, RunConfig, RunError, RunRecord};

/// Result of re-running one configuration several times.
#[derive(Debug, Clone)]
pub struct SweepReport {
    pub runs: usize,
    /// Index of the first repetition that differed from the first one.
    pub first_mismatch: Option<usize>,
    pub record: Option<RunRecord>,
}

impl SweepReport {
    pub fn identical(&self) -> bool {
        self.first_mismatch.is_none()
    }
}

fn same(a: &RunRecord, b: &RunRecord) -> bool {
    a == b && a.distance.to_bits() == b.distance.to_bits() && a.sim_time.to_bits() == b.sim_time.to_bits()
}

/// Runs `config` `n` times and compares every record bit for bit with the
/// first one.
pub fn seed_sweep(config: &RunConfig, n: usize) -> Result<SweepReport, RunError> {
    let mut first: Option<RunRecord> = None;
    for i in 0..n {
        let rec = run(config)?;
        match &first {
            None => first = Some(rec),
            Some(f) if !same(f, &rec) => {
                return Ok(SweepReport {
                    runs: i + 1,
                    first_mismatch: Some(i),
                    record: first,
                })
            }
            Some(_) => {}
        }
    }
    Ok(SweepReport {
        runs: n,
        first_mismatch: None,
        record: first,
    })
}

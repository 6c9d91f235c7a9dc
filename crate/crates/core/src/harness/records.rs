use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One `(seed, grid point, arm)` outcome. Column order is the field order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub experiment_id: String,
    pub seed: u64,
    pub n_train: usize,
    pub m_target: usize,
    pub shift_param: String,
    pub arm: String,
    pub target_error: Option<f64>,
    pub source_error: Option<f64>,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    /// `ID`, `OOD`, empty when no hull was computed, or `error:<kind>`.
    pub verdict: String,
    pub wall_time: f64,
}

pub const COLUMNS: [&str; 12] = [
    "experiment_id",
    "seed",
    "n_train",
    "m_target",
    "shift_param",
    "arm",
    "target_error",
    "source_error",
    "epsilon",
    "delta",
    "verdict",
    "wall_time",
];

pub const ERROR_PREFIX: &str = "error:";

impl RunRecord {
    pub fn is_error(&self) -> bool {
        self.verdict.starts_with(ERROR_PREFIX)
    }
}

fn arm_rank(arm: &str) -> usize {
    ["vanilla", "random", "rl", "aug", "pretrain", "probe"]
        .iter()
        .position(|a| *a == arm)
        .unwrap_or(usize::MAX)
}

/// Stable sort by `(experiment_id, seed, n_train, arm)`.
pub fn sort_records(records: &mut [RunRecord]) {
    records.sort_by(|a, b| {
        (&a.experiment_id, a.seed, a.n_train, arm_rank(&a.arm), &a.arm).cmp(&(
            &b.experiment_id,
            b.seed,
            b.n_train,
            arm_rank(&b.arm),
            &b.arm,
        ))
    });
}

/// Header plus one row per record, in sorted order.
pub fn emit_records(records: &[RunRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut sorted = records.to_vec();
    sort_records(&mut sorted);
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))?;
    w.write_record(COLUMNS).map_err(|e| Error::csv(path, e))?;
    for r in &sorted {
        w.serialize(r).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<RunRecord>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let header = r.headers().map_err(|e| Error::csv(path, e))?.clone();
    if header.iter().ne(COLUMNS) {
        return Err(Error::Validation(format!(
            "{}: unexpected record columns {:?}",
            path.display(),
            header.iter().collect::<Vec<_>>()
        )));
    }
    r.deserialize().map(|row| row.map_err(|e| Error::csv(path, e))).collect()
}

/// A small matplotlib script that plots `target_error` against `n_train`
/// per `(arm, shift_param)` from a records CSV.
pub fn plot_script(csv_name: &str) -> String {
    format!(
        r#"import csv
import statistics
from collections import defaultdict

import matplotlib.pyplot as plt

rows = [r for r in csv.DictReader(open("{csv_name}")) if r["target_error"]]
curves = defaultdict(lambda: defaultdict(list))
for r in rows:
    curves[(r["arm"], r["shift_param"])][int(r["n_train"])].append(float(r["target_error"]))

for (arm, shift), pts in sorted(curves.items()):
    xs = sorted(pts)
    plt.plot(xs, [statistics.median(pts[x]) for x in xs], marker="o", label=f"{{arm}} {{shift}}")
plt.xscale("log")
plt.xlabel("N (training samples)")
plt.ylabel("target error (seed median)")
plt.legend()
plt.savefig("{csv_name}.png", dpi=150)
"#
    )
}

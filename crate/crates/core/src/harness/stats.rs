use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::records::RunRecord;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupKey {
    ExperimentId,
    Arm,
    ShiftParam,
    Seed,
}

impl GroupKey {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "experiment_id" => GroupKey::ExperimentId,
            "arm" => GroupKey::Arm,
            "shift_param" => GroupKey::ShiftParam,
            "seed" => GroupKey::Seed,
            other => return Err(Error::Config(format!("unknown group key '{other}'"))),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            GroupKey::ExperimentId => "experiment_id",
            GroupKey::Arm => "arm",
            GroupKey::ShiftParam => "shift_param",
            GroupKey::Seed => "seed",
        }
    }

    fn value(self, r: &RunRecord) -> String {
        match self {
            GroupKey::ExperimentId => r.experiment_id.clone(),
            GroupKey::Arm => r.arm.clone(),
            GroupKey::ShiftParam => r.shift_param.clone(),
            GroupKey::Seed => r.seed.to_string(),
        }
    }
}

/// Which record field is the independent variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    NTrain,
    MTarget,
}

impl Axis {
    fn of(self, r: &RunRecord) -> usize {
        match self {
            Axis::NTrain => r.n_train,
            Axis::MTarget => r.m_target,
        }
    }

    /// `m_target` when it varies and `n_train` does not.
    pub fn detect(records: &[RunRecord]) -> Self {
        let distinct = |f: fn(&RunRecord) -> usize| {
            let mut v: Vec<usize> = records.iter().map(f).collect();
            v.sort_unstable();
            v.dedup();
            v.len()
        };
        if distinct(|r| r.n_train) == 1 && distinct(|r| r.m_target) > 1 {
            Axis::MTarget
        } else {
            Axis::NTrain
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendStats {
    pub spearman_rho: f64,
    pub powerlaw_slope: f64,
    pub tail_ratio: f64,
    pub monotone_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrendRow {
    pub group: Vec<(GroupKey, String)>,
    pub x: Vec<usize>,
    pub median_error: Vec<f64>,
    pub stats: Option<TrendStats>,
    pub warning: Option<String>,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Ranks starting at 1 with ties averaged.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

/// Spearman correlation; 0 when either series is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.iter().chain(y).any(|v| *v <= 0.0) {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    Some(sxy / sxx)
}

/// Trend statistics of an error curve ordered by `x`.
pub fn curve_stats(x: &[f64], errors: &[f64]) -> Result<TrendStats> {
    if x.len() != errors.len() || x.len() < 3 {
        return Err(Error::Validation("trend statistics need at least 3 grid points".into()));
    }
    let min = errors.iter().cloned().fold(f64::INFINITY, f64::min);
    let last = *errors.last().expect("non-empty");
    let tail_ratio = if min > 0.0 {
        last / min
    } else if last == 0.0 {
        1.0
    } else {
        f64::INFINITY
    };
    let steps = errors.len() - 1;
    let decreasing = errors.windows(2).filter(|w| w[1] < w[0]).count();
    Ok(TrendStats {
        spearman_rho: spearman(x, errors),
        powerlaw_slope: loglog_slope(x, errors).unwrap_or(f64::NAN),
        tail_ratio,
        monotone_fraction: decreasing as f64 / steps as f64,
    })
}

type Groups = BTreeMap<Vec<String>, BTreeMap<usize, Vec<f64>>>;

fn grouped(records: &[RunRecord], keys: &[GroupKey], axis: Axis) -> Groups {
    let mut groups: Groups = BTreeMap::new();
    for r in records.iter().filter(|r| !r.is_error()) {
        if let Some(e) = r.target_error {
            let key: Vec<String> = keys.iter().map(|k| k.value(r)).collect();
            groups.entry(key).or_default().entry(axis.of(r)).or_default().push(e);
        }
    }
    groups
}

/// Per-group statistics of the seed-median target error against the grid.
pub fn trend_stats(records: &[RunRecord], keys: &[GroupKey]) -> Vec<TrendRow> {
    let axis = Axis::detect(records);
    grouped(records, keys, axis)
        .into_iter()
        .map(|(key, by_x)| {
            let x: Vec<usize> = by_x.keys().copied().collect();
            let median_error: Vec<f64> = by_x.values().map(|v| median(v)).collect();
            let xf: Vec<f64> = x.iter().map(|&v| v as f64).collect();
            let (stats, warning) = match curve_stats(&xf, &median_error) {
                Ok(s) => (Some(s), None),
                Err(e) => (None, Some(e.to_string())),
            };
            TrendRow {
                group: keys.iter().copied().zip(key).collect(),
                x,
                median_error,
                stats,
                warning,
            }
        })
        .collect()
}

/// Across-seed mean and sample variance of target error per grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedSpread {
    pub group: Vec<(GroupKey, String)>,
    pub x: Vec<usize>,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

pub fn seed_spread(records: &[RunRecord], keys: &[GroupKey]) -> Vec<SeedSpread> {
    let axis = Axis::detect(records);
    grouped(records, keys, axis)
        .into_iter()
        .map(|(key, by_x)| {
            let mut out = SeedSpread {
                group: keys.iter().copied().zip(key).collect(),
                x: Vec::new(),
                mean: Vec::new(),
                variance: Vec::new(),
            };
            for (x, v) in by_x {
                let n = v.len() as f64;
                let m = v.iter().sum::<f64>() / n;
                let var = if v.len() > 1 {
                    v.iter().map(|e| (e - m).powi(2)).sum::<f64>() / (n - 1.0)
                } else {
                    0.0
                };
                out.x.push(x);
                out.mean.push(m);
                out.variance.push(var);
            }
            out
        })
        .collect()
}

pub fn write_trend_csv(rows: &[TrendRow], keys: &[GroupKey], path: impl AsRef<std::path::Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut header: Vec<String> = keys.iter().map(|k| k.name().to_string()).collect();
    header.extend(
        ["points", "spearman_rho", "powerlaw_slope", "tail_ratio", "monotone_fraction", "warning"].map(String::from),
    );
    w.write_record(&header).map_err(|e| Error::csv(path, e))?;
    for row in rows {
        let mut rec: Vec<String> = row.group.iter().map(|(_, v)| v.clone()).collect();
        rec.push(row.x.len().to_string());
        match &row.stats {
            Some(s) => rec.extend([
                s.spearman_rho.to_string(),
                s.powerlaw_slope.to_string(),
                s.tail_ratio.to_string(),
                s.monotone_fraction.to_string(),
                String::new(),
            ]),
            None => {
                rec.extend(std::iter::repeat_n(String::new(), 4));
                rec.push(row.warning.clone().unwrap_or_default());
            }
        }
        w.write_record(&rec).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

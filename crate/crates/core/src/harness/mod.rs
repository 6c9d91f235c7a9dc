//! Experiment orchestration: sweeps over training size, OOD sample size,
//! technique and selection arms; trend statistics; CSV output.

mod config;
mod records;
mod stats;
mod sweep;

pub use config::{Arm, ExperimentConfig, ExperimentKind, PretrainSpec};
pub use records::{emit_records, plot_script, read_records, sort_records, RunRecord, COLUMNS, ERROR_PREFIX};
pub use stats::{
    average_ranks, curve_stats, loglog_slope, median, seed_spread, spearman, trend_stats, write_trend_csv, Axis,
    GroupKey, SeedSpread, TrendRow, TrendStats,
};
pub use sweep::{run_sweep, run_sweep_full, SweepOutput};

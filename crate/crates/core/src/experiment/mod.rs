//! Experiment harness: configuration files, seeded runs, strategy sweeps
//! and metrics files.

mod check;
mod config;
mod run;

pub use check::{run_checks, CheckResult};
pub use config::{
    parse_config, parse_config_str, parse_seeds, parse_strategies, DatasetConfig,
    ExperimentConfig,
};
pub use run::{
    compare_strategies, metrics_rows, read_metrics, run_experiment, write_metrics, Comparison,
    ExperimentOutcome, MetricsRow, StrategyDifference, StrategySummary, METRICS_VERSION_LINE,
};

use std::path::{Path, PathBuf};

/// Environment variable naming the output root when no `--out` is given.
pub const OUT_ENV: &str = "ACDA_OUT";

/// `--out`, then `$ACDA_OUT`, then the config's `out`, then `acda-out`.
pub fn resolve_out(flag: Option<&Path>, cfg: &ExperimentConfig) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(p) = std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(p);
    }
    cfg.out.clone().unwrap_or_else(|| PathBuf::from("acda-out"))
}

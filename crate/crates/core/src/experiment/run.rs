use std::collections::HashMap;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ExperimentConfig;
use crate::acda::{
    prepare_pair, run_from_stage1, run_stage1, EpochStats, RunOutput, RunRecord, Strategy,
    TrainConfig,
};
use crate::error::{Error, Result};
use crate::nets::checkpoint::write_checkpoint;

/// First line of every metrics file; bump when the columns change.
pub const METRICS_VERSION_LINE: &str = "# acda-metrics v1";

/// One epoch of one stage. Stage 1 is round 0; query round `r` is `r + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub strategy: Strategy,
    pub seed: u64,
    pub budget: f64,
    pub round: usize,
    pub epoch: usize,
    pub l_cls: f64,
    pub w1_estimate: f64,
    pub l_grad: f64,
    pub l_query: f64,
    pub source_accuracy: f64,
    pub target_accuracy: f64,
}

/// Metrics rows of one run, in stage order.
pub fn metrics_rows(record: &RunRecord) -> Vec<MetricsRow> {
    let row = |round: usize, e: &EpochStats| MetricsRow {
        strategy: record.config.strategy,
        seed: record.config.seed,
        budget: record.config.budget,
        round,
        epoch: e.epoch,
        l_cls: e.l_cls,
        w1_estimate: e.w1_estimate,
        l_grad: e.l_grad,
        l_query: e.l_query,
        source_accuracy: e.source_accuracy,
        target_accuracy: e.target_accuracy.unwrap_or(f64::NAN),
    };
    let mut rows: Vec<MetricsRow> = record.stage1.iter().map(|e| row(0, e)).collect();
    for r in &record.rounds {
        rows.extend(r.history.iter().map(|e| row(r.round + 1, e)));
    }
    rows
}

pub fn write_metrics(w: impl Write, rows: &[MetricsRow]) -> Result<()> {
    let mut w = w;
    writeln!(w, "{METRICS_VERSION_LINE}")?;
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a file written by [`write_metrics`].
pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let text = fs::read_to_string(path)?;
    let Some(body) = text.strip_prefix(METRICS_VERSION_LINE) else {
        return Err(Error::Format(format!(
            "{}: missing `{METRICS_VERSION_LINE}` line",
            path.display()
        )));
    };
    let mut rd = csv::Reader::from_reader(body.trim_start_matches(['\r', '\n']).as_bytes());
    Ok(rd.deserialize().collect::<std::result::Result<_, _>>()?)
}

fn run_dir(out: &Path, strategy: Strategy, seed: u64) -> PathBuf {
    out.join(format!("{}-seed{seed}", strategy.as_str()))
}

fn save_run(out: &Path, run: &RunOutput) -> Result<PathBuf> {
    let cfg = &run.record.config;
    let dir = run_dir(out, cfg.strategy, cfg.seed);
    fs::create_dir_all(&dir)?;
    let json = serde_json::to_string_pretty(&run.record)?;
    fs::write(dir.join("record.json"), json + "\n")?;
    let ckpt = BufWriter::new(File::create(dir.join("checkpoint.bin"))?);
    write_checkpoint(
        ckpt,
        &[&run.nets.feature, &run.nets.classifier, &run.nets.critic],
    )?;
    Ok(dir)
}

fn write_manifest(out: &Path, done: &[PathBuf], failure: Option<&Error>) -> Result<()> {
    let mut text = String::new();
    match failure {
        None => text.push_str("status: ok\n"),
        Some(e) => text.push_str(&format!("status: failed\nerror: {e}\n")),
    }
    text.push_str("metrics: metrics.csv\n");
    for d in done {
        text.push_str(&format!("run: {}\n", d.display()));
    }
    fs::write(out.join("MANIFEST"), text)?;
    Ok(())
}

/// Outputs of [`run_experiment`].
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub rows: Vec<MetricsRow>,
    pub records: Vec<RunRecord>,
    pub run_dirs: Vec<PathBuf>,
}

fn seeded(train: &TrainConfig, seed: u64, strategy: Strategy) -> TrainConfig {
    TrainConfig {
        seed,
        strategy,
        ..train.clone()
    }
}

/// One run per seed with the configured strategy. Writes `metrics.csv`, a
/// `record.json` and `checkpoint.bin` per run, and a `MANIFEST`; on failure
/// the completed runs are kept and the manifest records the error.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<ExperimentOutcome> {
    fs::create_dir_all(out)?;
    let mut outcome = ExperimentOutcome {
        rows: Vec::new(),
        records: Vec::new(),
        run_dirs: Vec::new(),
    };
    let mut attempt = || -> Result<()> {
        for seed in cfg.run_seeds() {
            let train = seeded(&cfg.train, seed, cfg.train.strategy);
            let pair = cfg.dataset.build(seed)?;
            let (prepared, standardizer) = prepare_pair(&pair, &train)?;
            let stage1 = run_stage1(&prepared, &train)?;
            let run = run_from_stage1(&prepared, &standardizer, &train, &stage1)?;
            outcome.run_dirs.push(save_run(out, &run)?);
            outcome.rows.extend(metrics_rows(&run.record));
            outcome.records.push(run.record);
        }
        Ok(())
    };
    let result = attempt();
    write_metrics(
        BufWriter::new(File::create(out.join("metrics.csv"))?),
        &outcome.rows,
    )?;
    write_manifest(out, &outcome.run_dirs, result.as_ref().err())?;
    result.map(|()| outcome)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub strategy: Strategy,
    pub runs: usize,
    pub mean_target_accuracy: f64,
    /// Sample standard deviation; zero for a single run.
    pub std_target_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyDifference {
    pub minuend: Strategy,
    pub subtrahend: Strategy,
    pub mean_difference: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub summary: Vec<StrategySummary>,
    /// Every listed pair `(i, j)` with `i < j`; empty for one strategy.
    pub differences: Vec<StrategyDifference>,
    /// `(strategy, seed, final target accuracy)` per run.
    pub runs: Vec<(Strategy, u64, f64)>,
}

impl Comparison {
    pub fn mean(&self, s: Strategy) -> Option<f64> {
        self.summary
            .iter()
            .find(|r| r.strategy == s)
            .map(|r| r.mean_target_accuracy)
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<10} {:>5} {:>10} {:>10}", "strategy", "runs", "mean", "std")?;
        for r in &self.summary {
            writeln!(
                f,
                "{:<10} {:>5} {:>10.4} {:>10.4}",
                r.strategy.as_str(),
                r.runs,
                r.mean_target_accuracy,
                r.std_target_accuracy
            )?;
        }
        for d in &self.differences {
            writeln!(
                f,
                "{} - {}: {:+.4}",
                d.minuend.as_str(),
                d.subtrahend.as_str(),
                d.mean_difference
            )?;
        }
        Ok(())
    }
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Final target accuracy of every strategy on every seed. Stage 1 does not
/// depend on the strategy, so it runs once per seed.
///
/// Writes `summary.csv`, `differences.csv` (two or more strategies),
/// `metrics.csv`, per-run records and a `MANIFEST` under `out`.
pub fn compare_strategies(
    cfg: &ExperimentConfig,
    strategies: &[Strategy],
    seeds: &[u64],
    out: &Path,
) -> Result<Comparison> {
    if strategies.is_empty() || seeds.is_empty() {
        return Err(Error::contract("need at least one strategy and one seed"));
    }
    fs::create_dir_all(out)?;
    let mut distinct: Vec<Strategy> = Vec::new();
    for &s in strategies {
        if !distinct.contains(&s) {
            distinct.push(s);
        }
    }
    let mut acc: HashMap<Strategy, Vec<f64>> = HashMap::new();
    let mut runs = Vec::new();
    let mut rows = Vec::new();
    let mut dirs = Vec::new();
    let mut attempt = || -> Result<()> {
        for &seed in seeds {
            let base = seeded(&cfg.train, seed, Strategy::None);
            let pair = cfg.dataset.build(seed)?;
            let (prepared, standardizer) = prepare_pair(&pair, &base)?;
            let stage1 = run_stage1(&prepared, &base)?;
            for &s in &distinct {
                let train = seeded(&cfg.train, seed, s);
                let run = run_from_stage1(&prepared, &standardizer, &train, &stage1)?;
                let a = run.record.final_metrics.target_accuracy;
                acc.entry(s).or_default().push(a);
                runs.push((s, seed, a));
                rows.extend(metrics_rows(&run.record));
                dirs.push(save_run(out, &run)?);
            }
        }
        Ok(())
    };
    let result = attempt();
    write_metrics(BufWriter::new(File::create(out.join("metrics.csv"))?), &rows)?;
    write_manifest(out, &dirs, result.as_ref().err())?;
    result?;

    let summary: Vec<StrategySummary> = strategies
        .iter()
        .map(|s| {
            let v = &acc[s];
            let (mean, std) = mean_std(v);
            StrategySummary {
                strategy: *s,
                runs: v.len(),
                mean_target_accuracy: mean,
                std_target_accuracy: std,
            }
        })
        .collect();
    let mut differences = Vec::new();
    for i in 0..summary.len() {
        for j in i + 1..summary.len() {
            differences.push(StrategyDifference {
                minuend: summary[i].strategy,
                subtrahend: summary[j].strategy,
                mean_difference: summary[i].mean_target_accuracy
                    - summary[j].mean_target_accuracy,
            });
        }
    }
    let mut w = csv::Writer::from_path(out.join("summary.csv"))?;
    for r in &summary {
        w.serialize(r)?;
    }
    w.flush()?;
    if !differences.is_empty() {
        let mut w = csv::Writer::from_path(out.join("differences.csv"))?;
        for d in &differences {
            w.serialize(d)?;
        }
        w.flush()?;
    }
    Ok(Comparison {
        summary,
        differences,
        runs,
    })
}

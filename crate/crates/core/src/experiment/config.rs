//! Flat `key = value` experiment files.
//!
//! Blank lines and text after `#` are ignored. Every key may appear once.
//! Absent keys take the defaults of [`TrainConfig`] and [`DatasetConfig`].

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::acda::{DiversityNormalization, PenaltyMode, QuerySign, Strategy, TrainConfig};
use crate::data::{
    gen_gaussian_shift_pair, gen_two_moons_pair, load_idx, Dataset, DomainPair, DomainTag,
    GaussianSpec, MoonsSpec, ShiftSpec,
};
use crate::error::{Error, Result};
use crate::nets::HiddenActivation;

/// Where the domain pair comes from. Generator seeds default to the run
/// seed so that every repeat sees fresh data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetConfig {
    TwoMoons {
        n_source: usize,
        n_target: usize,
        rotation_deg: f64,
        noise_sd: f64,
        label_flip_rate: f64,
        data_seed: Option<u64>,
    },
    Gaussian {
        classes: usize,
        dim: usize,
        mean_shift: f64,
        covariance_scale: f64,
        swap_fraction: f64,
        n_source: usize,
        n_target: usize,
        data_seed: Option<u64>,
    },
    Idx {
        source_images: PathBuf,
        source_labels: PathBuf,
        target_images: PathBuf,
        target_labels: PathBuf,
        max_items: usize,
    },
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig::TwoMoons {
            n_source: 1000,
            n_target: 1000,
            rotation_deg: 40.0,
            noise_sd: 0.1,
            label_flip_rate: 0.1,
            data_seed: None,
        }
    }
}

impl DatasetConfig {
    pub fn build(&self, run_seed: u64) -> Result<DomainPair> {
        match self {
            DatasetConfig::TwoMoons {
                n_source,
                n_target,
                rotation_deg,
                noise_sd,
                label_flip_rate,
                data_seed,
            } => gen_two_moons_pair(&MoonsSpec {
                n_source: *n_source,
                n_target: *n_target,
                rotation_deg: *rotation_deg,
                noise_sd: *noise_sd,
                label_flip_rate: *label_flip_rate,
                seed: data_seed.unwrap_or(run_seed),
            }),
            DatasetConfig::Gaussian {
                classes,
                dim,
                mean_shift,
                covariance_scale,
                swap_fraction,
                n_source,
                n_target,
                data_seed,
            } => gen_gaussian_shift_pair(&GaussianSpec {
                classes: *classes,
                dim: *dim,
                mean_shift: *mean_shift,
                covariance_scale: *covariance_scale,
                swap_fraction: *swap_fraction,
                n_source: *n_source,
                n_target: *n_target,
                seed: data_seed.unwrap_or(run_seed),
            }),
            DatasetConfig::Idx {
                source_images,
                source_labels,
                target_images,
                target_labels,
                max_items,
            } => {
                let s = load_idx(source_images, source_labels, *max_items)?;
                let t = load_idx(target_images, target_labels, *max_items)?;
                if s.dim() != t.dim() {
                    return Err(Error::Consistency(format!(
                        "source images have {} pixels, target images {}",
                        s.dim(),
                        t.dim()
                    )));
                }
                let classes = s.num_classes.max(t.num_classes);
                let truth = t.labels.clone().unwrap_or_default();
                DomainPair::new(
                    Dataset::new(s.features, s.labels, DomainTag::Source, classes)?,
                    Dataset::new(t.features, None, DomainTag::Target, classes)?,
                    truth,
                    None,
                    None,
                    ShiftSpec::Idx {
                        source_images: source_images.clone(),
                        source_labels: source_labels.clone(),
                        target_images: target_images.clone(),
                        target_labels: target_labels.clone(),
                        max_items: *max_items,
                    },
                )
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub train: TrainConfig,
    pub dataset: DatasetConfig,
    pub out: Option<PathBuf>,
    /// Run seeds; empty means the single seed `train.seed`.
    pub seeds: Vec<u64>,
    pub strategies: Vec<Strategy>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            train: TrainConfig::default(),
            dataset: DatasetConfig::default(),
            out: None,
            seeds: Vec::new(),
            strategies: vec![Strategy::Active, Strategy::Random, Strategy::None],
        }
    }
}

impl ExperimentConfig {
    pub fn run_seeds(&self) -> Vec<u64> {
        if self.seeds.is_empty() {
            vec![self.train.seed]
        } else {
            self.seeds.clone()
        }
    }
}

/// `a..b` (inclusive) or a comma-separated list.
pub fn parse_seeds(s: &str) -> std::result::Result<Vec<u64>, String> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| format!("bad seed range `{s}`"))?;
        let b: u64 = b
            .trim()
            .trim_start_matches('=')
            .parse()
            .map_err(|_| format!("bad seed range `{s}`"))?;
        if b < a {
            return Err(format!("empty seed range `{s}`"));
        }
        return Ok((a..=b).collect());
    }
    s.split(',')
        .map(|t| t.trim().parse().map_err(|_| format!("bad seed `{t}`")))
        .collect()
}

pub fn parse_strategies(s: &str) -> std::result::Result<Vec<Strategy>, String> {
    let out: Vec<Strategy> = s
        .split(',')
        .map(|t| t.trim().parse())
        .collect::<std::result::Result<_, _>>()?;
    if out.is_empty() {
        return Err("at least one strategy required".into());
    }
    Ok(out)
}

const MOONS_KEYS: &[&str] = &["rotation_deg", "noise_sd", "label_flip_rate"];
const GAUSSIAN_KEYS: &[&str] = &[
    "classes",
    "dim",
    "mean_shift",
    "covariance_scale",
    "swap_fraction",
];
const IDX_KEYS: &[&str] = &[
    "source_images",
    "source_labels",
    "target_images",
    "target_labels",
    "max_items",
];
const SHARED_DATA_KEYS: &[&str] = &["n_source", "n_target", "data_seed"];

struct Line<'a> {
    no: usize,
    key: &'a str,
    value: &'a str,
}

fn enum_value<T>(value: &str, options: &[(&str, T)]) -> std::result::Result<T, String>
where
    T: Copy,
{
    options
        .iter()
        .find(|(name, _)| *name == value)
        .map(|(_, v)| *v)
        .ok_or_else(|| {
            let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
            format!("expected one of {}", names.join(", "))
        })
}

fn typed<T: FromStr>(value: &str, what: &str) -> std::result::Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("expected {what}, got `{value}`"))
}

fn boolean(value: &str) -> std::result::Result<bool, String> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("expected true or false, got `{value}`")),
    }
}

fn in_range(v: f64, ok: bool, what: &str) -> std::result::Result<f64, String> {
    if ok {
        Ok(v)
    } else {
        Err(format!("{v} is out of range: {what}"))
    }
}

fn count(value: &str) -> std::result::Result<usize, String> {
    let v: usize = typed(value, "a positive integer")?;
    if v == 0 {
        return Err("must be at least 1".into());
    }
    Ok(v)
}

/// Applies one training key; `Ok(false)` when the key is not a training key.
fn apply_train(t: &mut TrainConfig, key: &str, value: &str) -> std::result::Result<bool, String> {
    match key {
        "budget" => {
            let v: f64 = typed(value, "a number")?;
            t.budget = in_range(v, v > 0.0 && v < 1.0, "budget must lie in (0, 1)")?;
        }
        "lambda_div" => {
            let v: f64 = typed(value, "a number")?;
            t.lambda_div = in_range(v, v >= 0.0 && v.is_finite(), "lambda_div must be >= 0")?;
        }
        "delta" => {
            let v: f64 = typed(value, "a number")?;
            t.delta = in_range(v, v > 0.0 && v.is_finite(), "delta must be > 0")?;
        }
        "query_rounds" => t.query_rounds = count(value)?,
        "critic_steps" => t.critic_steps = count(value)?,
        "stage1_epochs" => t.stage1_epochs = count(value)?,
        "stage3_epochs" => t.stage3_epochs = count(value)?,
        "batch_size" => t.batch_size = count(value)?,
        "learning_rate" => t.learning_rate = typed(value, "a number")?,
        "critic_learning_rate" => t.critic_learning_rate = typed(value, "a number")?,
        "adam_betas" => {
            let parts: Vec<&str> = value.split(',').map(str::trim).collect();
            let [a, b] = parts[..] else {
                return Err("expected two comma-separated numbers".into());
            };
            t.adam_betas = (typed(a, "a number")?, typed(b, "a number")?);
        }
        "seed" => t.seed = typed(value, "an unsigned integer")?,
        "strategy" => t.strategy = value.parse()?,
        "diversity_normalization" => {
            t.diversity_normalization = enum_value(
                value,
                &[
                    ("raw", DiversityNormalization::Raw),
                    ("minmax", DiversityNormalization::Minmax),
                    ("zscore", DiversityNormalization::Zscore),
                ],
            )?
        }
        "query_sign" => {
            t.query_sign = enum_value(
                value,
                &[
                    ("as_written", QuerySign::AsWritten),
                    ("far_from_source", QuerySign::FarFromSource),
                ],
            )?
        }
        "penalty_mode" => {
            t.penalty_mode = enum_value(
                value,
                &[
                    ("as_written", PenaltyMode::AsWritten),
                    ("separate", PenaltyMode::Separate),
                ],
            )?
        }
        "penalty_coef" => t.penalty_coef = typed(value, "a number")?,
        "lambda_w" => {
            t.lambda_w_override = if value == "schedule" {
                None
            } else {
                Some(typed(value, "a number or `schedule`")?)
            }
        }
        "early_stop" => t.early_stop = boolean(value)?,
        "patience" => t.patience = count(value)?,
        "min_delta" => t.min_delta = typed(value, "a number")?,
        "feature_hidden" => t.feature_hidden = count(value)?,
        "feature_dim" => t.feature_dim = count(value)?,
        "critic_hidden" => t.critic_hidden = count(value)?,
        "hidden_activation" => {
            t.hidden_activation = enum_value(
                value,
                &[
                    ("tanh", HiddenActivation::Tanh),
                    ("relu", HiddenActivation::Relu),
                ],
            )?
        }
        "standardize" => t.standardize = boolean(value)?,
        _ => return Ok(false),
    }
    Ok(true)
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Parses experiment text; `path` only labels error messages.
pub fn parse_config_str(text: &str, path: &Path) -> Result<ExperimentConfig> {
    let mut lines = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let no = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(parse_error(path, no, "expected `key = value`"));
        };
        let key = key.trim();
        if lines.iter().any(|l: &Line| l.key == key) {
            return Err(parse_error(path, no, format!("duplicate key `{key}`")));
        }
        lines.push(Line {
            no,
            key,
            value: value.trim(),
        });
    }

    let mut cfg = ExperimentConfig::default();
    let dataset_line = lines.iter().find(|l| l.key == "dataset");
    let kind = match dataset_line {
        Some(l) => match l.value {
            "two_moons" | "gaussian" | "idx" => Some(l.value),
            other => {
                return Err(parse_error(
                    path,
                    l.no,
                    format!("unknown dataset `{other}` (two_moons, gaussian, idx)"),
                ))
            }
        },
        None => None,
    };

    let mut data = Vec::new();
    for l in &lines {
        let here = |m: String| parse_error(path, l.no, format!("`{}`: {m}", l.key));
        if l.key == "dataset" {
            continue;
        }
        if apply_train(&mut cfg.train, l.key, l.value).map_err(here)? {
            continue;
        }
        match l.key {
            "out" => cfg.out = Some(PathBuf::from(l.value)),
            "seeds" => cfg.seeds = parse_seeds(l.value).map_err(here)?,
            "strategies" => cfg.strategies = parse_strategies(l.value).map_err(here)?,
            k if MOONS_KEYS.contains(&k)
                || GAUSSIAN_KEYS.contains(&k)
                || IDX_KEYS.contains(&k)
                || SHARED_DATA_KEYS.contains(&k) =>
            {
                data.push(l)
            }
            _ => return Err(parse_error(path, l.no, format!("unknown key `{}`", l.key))),
        }
    }

    if let Some(first) = data.first() {
        if kind.is_none() {
            return Err(parse_error(
                path,
                first.no,
                format!(
                    "missing dataset block: `{}` given without `dataset = ...`",
                    first.key
                ),
            ));
        }
    }
    let get = |k: &str| data.iter().find(|l| l.key == k).copied();
    let num = |k: &str, default: f64| -> Result<f64> {
        get(k).map_or(Ok(default), |l| {
            typed(l.value, "a number").map_err(|m| parse_error(path, l.no, format!("`{k}`: {m}")))
        })
    };
    let int = |k: &str, default: usize| -> Result<usize> {
        get(k).map_or(Ok(default), |l| {
            typed(l.value, "a non-negative integer")
                .map_err(|m| parse_error(path, l.no, format!("`{k}`: {m}")))
        })
    };
    let seed = || -> Result<Option<u64>> {
        get("data_seed")
            .map(|l| {
                typed(l.value, "an unsigned integer")
                    .map_err(|m| parse_error(path, l.no, format!("`data_seed`: {m}")))
            })
            .transpose()
    };
    let foreign = |allowed: &[&str]| -> Result<()> {
        match data
            .iter()
            .find(|l| !allowed.contains(&l.key) && !SHARED_DATA_KEYS.contains(&l.key))
        {
            Some(l) => Err(parse_error(
                path,
                l.no,
                format!("`{}` does not apply to dataset `{}`", l.key, kind.unwrap_or("")),
            )),
            None => Ok(()),
        }
    };

    cfg.dataset = match kind {
        None | Some("two_moons") => {
            foreign(MOONS_KEYS)?;
            DatasetConfig::TwoMoons {
                n_source: int("n_source", 1000)?,
                n_target: int("n_target", 1000)?,
                rotation_deg: num("rotation_deg", 40.0)?,
                noise_sd: num("noise_sd", 0.1)?,
                label_flip_rate: num("label_flip_rate", 0.1)?,
                data_seed: seed()?,
            }
        }
        Some("gaussian") => {
            foreign(GAUSSIAN_KEYS)?;
            DatasetConfig::Gaussian {
                classes: int("classes", 3)?,
                dim: int("dim", 2)?,
                mean_shift: num("mean_shift", 2.0)?,
                covariance_scale: num("covariance_scale", 1.0)?,
                swap_fraction: num("swap_fraction", 0.0)?,
                n_source: int("n_source", 600)?,
                n_target: int("n_target", 600)?,
                data_seed: seed()?,
            }
        }
        _ => {
            foreign(IDX_KEYS)?;
            let line = dataset_line.map_or(0, |l| l.no);
            let p = |k: &str| -> Result<PathBuf> {
                get(k).map(|l| PathBuf::from(l.value)).ok_or_else(|| {
                    parse_error(path, line, format!("missing dataset block: idx needs `{k}`"))
                })
            };
            DatasetConfig::Idx {
                source_images: p("source_images")?,
                source_labels: p("source_labels")?,
                target_images: p("target_images")?,
                target_labels: p("target_labels")?,
                max_items: int("max_items", 1000)?,
            }
        }
    };
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text, path)
}

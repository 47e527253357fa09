//! Datasets, shifted domain pairs with known labelling rules, and batch
//! plumbing.

mod csv_io;
mod gaussian;
mod idx;
mod moons;

pub use csv_io::{read_pair_csv, write_pair_csv};
pub use gaussian::{gen_gaussian_shift_pair, GaussianRule, GaussianSpec};
pub use idx::{load_idx, write_idx_images, write_idx_labels};
pub use moons::{gen_two_moons_pair, MoonsRule, MoonsSpec, MOONS_CENTER};

use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainTag {
    Source,
    Target,
}

impl DomainTag {
    pub fn as_str(self) -> &'static str {
        match self {
            DomainTag::Source => "source",
            DomainTag::Target => "target",
        }
    }
}

/// Feature rows with optional labels in `[0, num_classes)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// `n x d`.
    pub features: Tensor,
    pub labels: Option<Vec<usize>>,
    pub domain: DomainTag,
    pub num_classes: usize,
}

impl Dataset {
    pub fn new(
        features: Tensor,
        labels: Option<Vec<usize>>,
        domain: DomainTag,
        num_classes: usize,
    ) -> Result<Self> {
        if features.shape().len() != 2 {
            return Err(Error::contract("features must be an n x d matrix"));
        }
        if let Some(y) = &labels {
            if y.len() != features.rows() {
                return Err(Error::contract(format!(
                    "{} labels for {} rows",
                    y.len(),
                    features.rows()
                )));
            }
            if let Some(&bad) = y.iter().find(|&&c| c >= num_classes) {
                return Err(Error::contract(format!(
                    "label {bad} outside [0, {num_classes})"
                )));
            }
        }
        Ok(Dataset {
            features,
            labels,
            domain,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(indices),
            labels: self
                .labels
                .as_ref()
                .map(|y| indices.iter().map(|&i| y[i]).collect()),
            domain: self.domain,
            num_classes: self.num_classes,
        }
    }
}

/// A known labelling function of a synthetic domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Labeler {
    Moons(MoonsRule),
    Gaussian(GaussianRule),
}

impl Labeler {
    pub fn label(&self, x: &[f64]) -> usize {
        match self {
            Labeler::Moons(r) => r.label(x),
            Labeler::Gaussian(r) => r.label(x),
        }
    }
}

/// Generator parameters, or the files a real pair was loaded from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShiftSpec {
    TwoMoons(MoonsSpec),
    Gaussian(GaussianSpec),
    Idx {
        source_images: PathBuf,
        source_labels: PathBuf,
        target_images: PathBuf,
        target_labels: PathBuf,
        max_items: usize,
    },
    Loaded,
}

/// A labelled source domain and an unlabelled target domain.
///
/// True target labels are private: only [`DomainPair::oracle_label`] and
/// the accuracy helpers read them.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainPair {
    pub source: Dataset,
    pub target: Dataset,
    target_truth: Vec<usize>,
    f_source: Option<Labeler>,
    f_target: Option<Labeler>,
    pub shift_spec: ShiftSpec,
}

impl DomainPair {
    pub fn new(
        source: Dataset,
        target: Dataset,
        target_truth: Vec<usize>,
        f_source: Option<Labeler>,
        f_target: Option<Labeler>,
        shift_spec: ShiftSpec,
    ) -> Result<Self> {
        if source.labels.is_none() {
            return Err(Error::contract("source domain must be labelled"));
        }
        if source.dim() != target.dim() {
            return Err(Error::contract(format!(
                "source width {} differs from target width {}",
                source.dim(),
                target.dim()
            )));
        }
        if source.num_classes != target.num_classes {
            return Err(Error::contract("domains disagree on the class count"));
        }
        if target_truth.len() != target.len() {
            return Err(Error::contract("one true label per target row required"));
        }
        if target_truth.iter().any(|&c| c >= target.num_classes) {
            return Err(Error::contract("target label outside the class range"));
        }
        let target = Dataset {
            labels: None,
            ..target
        };
        Ok(DomainPair {
            source,
            target,
            target_truth,
            f_source,
            f_target,
            shift_spec,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.source.num_classes
    }

    pub fn source_labels(&self) -> &[usize] {
        self.source.labels.as_deref().unwrap_or(&[])
    }

    pub fn f_source(&self) -> Option<&Labeler> {
        self.f_source.as_ref()
    }

    pub fn f_target(&self) -> Option<&Labeler> {
        self.f_target.as_ref()
    }

    /// Simulated annotator for target row `i`.
    pub fn oracle_label(&self, i: usize) -> usize {
        self.target_truth[i]
    }

    pub fn oracle_labels(&self, indices: &[usize]) -> Vec<usize> {
        indices.iter().map(|&i| self.target_truth[i]).collect()
    }

    /// Fraction of target rows whose prediction equals the true label.
    pub fn target_accuracy(&self, predictions: &[usize]) -> f64 {
        crate::nets::accuracy(predictions, &self.target_truth)
    }

    /// Applies `standardizer` to both domains' features.
    pub fn standardized(&self, standardizer: &Standardizer) -> Result<DomainPair> {
        let mut out = self.clone();
        out.source.features = standardizer.apply(&self.source.features)?;
        out.target.features = standardizer.apply(&self.target.features)?;
        Ok(out)
    }

    /// The target domain with its true labels attached, for export only.
    pub fn labelled_target(&self) -> Dataset {
        Dataset {
            labels: Some(self.target_truth.clone()),
            ..self.target.clone()
        }
    }
}

/// Per-column affine map to zero mean and unit variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Columns with zero variance keep unit scale.
    pub fn fit(x: &Tensor) -> Result<Self> {
        let (n, d) = (x.rows(), x.cols());
        if n == 0 {
            return Err(Error::contract("cannot fit a standardizer on no rows"));
        }
        let mut mean = vec![0.0; d];
        for row in x.row_iter() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = vec![0.0; d];
        for row in x.row_iter() {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n as f64).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Standardizer { mean, scale })
    }

    pub fn identity(d: usize) -> Self {
        Standardizer {
            mean: vec![0.0; d],
            scale: vec![1.0; d],
        }
    }

    pub fn apply(&self, x: &Tensor) -> Result<Tensor> {
        if x.cols() != self.mean.len() {
            return Err(Error::contract("standardizer width mismatch"));
        }
        let d = self.mean.len();
        let data = x
            .data()
            .iter()
            .enumerate()
            .map(|(k, v)| (v - self.mean[k % d]) / self.scale[k % d])
            .collect();
        Tensor::matrix(x.rows(), d, data)
    }
}

/// Index batches for one epoch: a permutation of `0..n` determined by
/// `(seed, epoch)`, cut into chunks of `batch_size` with the short tail kept.
pub fn batch_iterator(n: usize, batch_size: usize, seed: u64, epoch: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch);
    order.shuffle(&mut rng);
    order
        .chunks(batch_size.max(1))
        .map(<[usize]>::to_vec)
        .collect()
}

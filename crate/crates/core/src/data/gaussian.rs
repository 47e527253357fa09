//! Gaussian class clusters with a translated, rescaled and partially
//! relabelled target domain.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Dataset, DomainPair, DomainTag, Labeler, ShiftSpec};
use crate::autodiff::Tensor;
use crate::error::{Error, Result};

/// Distance between neighbouring cluster means.
const MEAN_SPACING: f64 = 6.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpec {
    pub classes: usize,
    pub dim: usize,
    pub mean_shift: f64,
    pub covariance_scale: f64,
    pub swap_fraction: f64,
    pub n_source: usize,
    pub n_target: usize,
    pub seed: u64,
}

/// Nearest-mean rule over the union of source and shifted target means,
/// followed by a label permutation (identity for the source rule).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianRule {
    /// Row-major `(2C) x d` means; row `j` and `C + j` carry class `j`.
    pub means: Vec<f64>,
    pub dim: usize,
    pub permutation: Vec<usize>,
}

impl GaussianRule {
    pub fn label(&self, x: &[f64]) -> usize {
        let c = self.permutation.len();
        let mut best = (f64::INFINITY, 0usize);
        for (k, m) in self.means.chunks(self.dim).enumerate() {
            let d: f64 = m.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best.0 {
                best = (d, k % c);
            }
        }
        self.permutation[best.1]
    }
}

fn source_means(classes: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..classes)
        .map(|j| {
            let mut m = vec![0.0; dim];
            if dim == 1 {
                m[0] = MEAN_SPACING * j as f64;
            } else {
                let radius = MEAN_SPACING / 2.0 / (PI / classes as f64).sin();
                let a = 2.0 * PI * j as f64 / classes as f64;
                m[0] = radius * a.cos();
                m[1] = radius * a.sin();
            }
            m
        })
        .collect()
}

/// The first `round(swap * C)` labels are rotated cyclically.
fn swap_permutation(classes: usize, swap_fraction: f64) -> Vec<usize> {
    let k = ((swap_fraction * classes as f64) + 0.5).floor() as usize;
    (0..classes)
        .map(|j| if j < k && k >= 2 { (j + 1) % k } else { j })
        .collect()
}

pub fn gen_gaussian_shift_pair(spec: &GaussianSpec) -> Result<DomainPair> {
    if spec.classes < 2 {
        return Err(Error::contract("need at least 2 classes"));
    }
    if spec.dim < 1 {
        return Err(Error::contract("need at least 1 dimension"));
    }
    if spec.n_source < 1 || spec.n_target < 1 {
        return Err(Error::contract("both domains need samples"));
    }
    if !(0.0..=1.0).contains(&spec.swap_fraction) {
        return Err(Error::contract("swap_fraction must lie in [0, 1]"));
    }
    if !(spec.covariance_scale > 0.0) || !spec.mean_shift.is_finite() {
        return Err(Error::contract(
            "covariance_scale must be positive and mean_shift finite",
        ));
    }
    let (c, d) = (spec.classes, spec.dim);
    let shift_dir = 1.0 / (d as f64).sqrt();
    let src = source_means(c, d);
    let tgt: Vec<Vec<f64>> = src
        .iter()
        .map(|m| m.iter().map(|v| v + spec.mean_shift * shift_dir).collect())
        .collect();
    let means: Vec<f64> = src.iter().chain(&tgt).flatten().copied().collect();
    let f_source = GaussianRule {
        means: means.clone(),
        dim: d,
        permutation: (0..c).collect(),
    };
    let f_target = GaussianRule {
        means,
        dim: d,
        permutation: swap_permutation(c, spec.swap_fraction),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut draw = |n: usize, centres: &[Vec<f64>], scale: f64| -> Vec<f64> {
        let mut data = Vec::with_capacity(n * d);
        for _ in 0..n {
            let j = rng.random_range(0..c);
            for mu in &centres[j] {
                let z: f64 = StandardNormal.sample(&mut rng);
                data.push(mu + scale * z);
            }
        }
        data
    };
    let xs = Tensor::matrix(spec.n_source, d, draw(spec.n_source, &src, 1.0))?;
    let xt = Tensor::matrix(
        spec.n_target,
        d,
        draw(spec.n_target, &tgt, spec.covariance_scale),
    )?;
    let ys = xs.row_iter().map(|x| f_source.label(x)).collect();
    let yt = xt.row_iter().map(|x| f_target.label(x)).collect();
    DomainPair::new(
        Dataset::new(xs, Some(ys), DomainTag::Source, c)?,
        Dataset::new(xt, None, DomainTag::Target, c)?,
        yt,
        Some(Labeler::Gaussian(f_source)),
        Some(Labeler::Gaussian(f_target)),
        ShiftSpec::Gaussian(spec.clone()),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(c: usize, d: usize, swap: f64, n: usize) -> GaussianSpec {
        GaussianSpec {
            classes: c,
            dim: d,
            mean_shift: 1.5,
            covariance_scale: 1.0,
            swap_fraction: swap,
            n_source: n,
            n_target: n,
            seed: 3,
        }
    }

    #[test]
    fn full_swap_of_two_classes_inverts_the_rule() {
        let p = gen_gaussian_shift_pair(&spec(2, 3, 1.0, 10)).unwrap();
        let (fs, ft) = (p.f_source().unwrap(), p.f_target().unwrap());
        for x in p.source.features.row_iter().chain(p.target.features.row_iter()) {
            assert_eq!(ft.label(x), 1 - fs.label(x));
        }
    }

    #[test]
    fn no_swap_means_shared_rule() {
        let p = gen_gaussian_shift_pair(&spec(4, 2, 0.0, 100)).unwrap();
        let (fs, ft) = (p.f_source().unwrap(), p.f_target().unwrap());
        for x in p.source.features.row_iter() {
            assert_eq!(fs.label(x), ft.label(x));
        }
    }

    #[test]
    fn class_priors_are_balanced() {
        let c = 4;
        let n = 10_000;
        let p = gen_gaussian_shift_pair(&spec(c, 2, 0.0, n)).unwrap();
        let mut counts = vec![0usize; c];
        for &y in p.source.labels.as_ref().unwrap() {
            counts[y] += 1;
        }
        let prob = 1.0 / c as f64;
        let sigma = (n as f64 * prob * (1.0 - prob)).sqrt();
        for k in counts {
            assert!((k as f64 - n as f64 * prob).abs() <= 3.0 * sigma, "{k}");
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(gen_gaussian_shift_pair(&spec(1, 2, 0.0, 10)).is_err());
        assert!(gen_gaussian_shift_pair(&spec(2, 0, 0.0, 10)).is_err());
        assert!(gen_gaussian_shift_pair(&spec(2, 2, 1.5, 10)).is_err());
    }
}

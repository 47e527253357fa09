use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DiversityNormalization, Nets, QuerySign, TrainConfig};
use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::nets::predictive_entropy;

/// Scores for every instance of a target pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResult {
    /// Pool positions ordered by decreasing `combined`, ties by position.
    pub indices: Vec<usize>,
    /// Predictive entropy, indexed by pool position.
    pub uncertainty: Vec<f64>,
    /// Normalised critic score, indexed by pool position.
    pub diversity: Vec<f64>,
    pub combined: Vec<f64>,
}

/// Per-class weights of the query loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub alpha: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Positions sorted by decreasing score; equal scores keep ascending order.
pub fn rank_descending(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// Constant inputs normalise to all zeros under `minmax` and `zscore`.
pub fn normalize_diversity(raw: &[f64], mode: DiversityNormalization) -> Vec<f64> {
    let n = raw.len() as f64;
    match mode {
        DiversityNormalization::Raw => raw.to_vec(),
        DiversityNormalization::Minmax => {
            let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if hi > lo {
                raw.iter().map(|v| (v - lo) / (hi - lo)).collect()
            } else {
                vec![0.0; raw.len()]
            }
        }
        DiversityNormalization::Zscore => {
            let mean = raw.iter().sum::<f64>() / n;
            let sd = (raw.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
            if sd > 0.0 {
                raw.iter().map(|v| (v - mean) / sd).collect()
            } else {
                vec![0.0; raw.len()]
            }
        }
    }
}

/// `U -/+ lambda_div * d` with `d` the normalised critic score.
pub fn combine_scores(
    uncertainty: Vec<f64>,
    raw_critic: &[f64],
    lambda_div: f64,
    normalization: DiversityNormalization,
    sign: QuerySign,
) -> Result<QueryResult> {
    if uncertainty.is_empty() {
        return Err(Error::contract("target pool is empty"));
    }
    if uncertainty.len() != raw_critic.len() {
        return Err(Error::contract("one critic score per instance required"));
    }
    let diversity = normalize_diversity(raw_critic, normalization);
    let s = match sign {
        QuerySign::AsWritten => -lambda_div,
        QuerySign::FarFromSource => lambda_div,
    };
    let combined: Vec<f64> = uncertainty
        .iter()
        .zip(&diversity)
        .map(|(u, d)| u + s * d)
        .collect();
    Ok(QueryResult {
        indices: rank_descending(&combined),
        uncertainty,
        diversity,
        combined,
    })
}

pub fn query_scores(nets: &Nets, target: &Tensor, config: &TrainConfig) -> Result<QueryResult> {
    if target.rows() == 0 {
        return Err(Error::contract("target pool is empty"));
    }
    let probs = nets.class_probabilities(target)?;
    let uncertainty = probs.row_iter().map(predictive_entropy).collect();
    let critic = nets.critic_scores(target)?;
    combine_scores(
        uncertainty,
        &critic,
        config.lambda_div,
        config.diversity_normalization,
        config.query_sign,
    )
}

/// `max(1, round_half_up(budget * m_t))`.
pub fn budget_count(m_t: usize, budget: f64) -> usize {
    ((budget * m_t as f64 + 0.5).floor() as usize).max(1)
}

fn checked_count(m_t: usize, budget: f64) -> Result<usize> {
    if !(budget > 0.0 && budget < 1.0) {
        return Err(Error::contract(format!("budget {budget} outside (0, 1)")));
    }
    let m_q = budget_count(m_t, budget);
    if m_q > m_t {
        return Err(Error::Capacity(format!(
            "{m_q} queries requested from a pool of {m_t}"
        )));
    }
    Ok(m_q)
}

/// The `m_q` best-ranked positions.
pub fn select_queries(scores: &QueryResult, m_t: usize, budget: f64) -> Result<Vec<usize>> {
    if scores.combined.len() != m_t {
        return Err(Error::contract("scores must cover the whole pool"));
    }
    let m_q = checked_count(m_t, budget)?;
    Ok(scores.indices[..m_q].to_vec())
}

/// `m_q` distinct positions drawn uniformly, in ascending order.
pub fn random_queries(m_t: usize, budget: f64, seed: u64) -> Result<Vec<usize>> {
    let m_q = checked_count(m_t, budget)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, m_t, m_q).into_vec();
    picked.sort_unstable();
    Ok(picked)
}

/// `alpha_j = N_j * mean_entropy_j / sum_i entropy_i`; class frequencies
/// when the total entropy is below `1e-12`.
pub fn uncertainty_weights(
    labels: &[usize],
    entropies: &[f64],
    num_classes: usize,
) -> Result<WeightVector> {
    if labels.is_empty() || labels.len() != entropies.len() {
        return Err(Error::contract(
            "need one entropy per queried instance and at least one instance",
        ));
    }
    let mut counts = vec![0usize; num_classes];
    let mut mass = vec![0.0; num_classes];
    for (&y, &u) in labels.iter().zip(entropies) {
        if y >= num_classes {
            return Err(Error::contract(format!(
                "label {y} outside [0, {num_classes})"
            )));
        }
        counts[y] += 1;
        mass[y] += u;
    }
    let total: f64 = entropies.iter().sum();
    let m_q = labels.len() as f64;
    let alpha = if total < 1e-12 {
        counts.iter().map(|&n| n as f64 / m_q).collect()
    } else {
        counts
            .iter()
            .zip(&mass)
            .map(|(&n, &s)| if n == 0 { 0.0 } else { n as f64 * (s / n as f64) / total })
            .collect()
    };
    Ok(WeightVector { alpha, counts })
}

/// `mean_i alpha[y_i] * (-ln p_i[y_i])`.
pub fn weighted_query_loss(probabilities: &Tensor, labels: &[usize], alpha: &[f64]) -> Result<f64> {
    let (n, c) = (probabilities.rows(), probabilities.cols());
    if labels.len() != n || n == 0 {
        return Err(Error::contract("one label per probability row required"));
    }
    if alpha.len() != c {
        return Err(Error::contract("one weight per class required"));
    }
    let mut total = 0.0;
    for (row, &y) in probabilities.row_iter().zip(labels) {
        if y >= c {
            return Err(Error::contract(format!("label {y} outside [0, {c})")));
        }
        if alpha[y] != 0.0 {
            total -= alpha[y] * row[y].ln();
        }
    }
    Ok(total / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_evaluated_combined_scores() {
        let r = combine_scores(
            vec![0.1, 0.9, 0.5, 0.2],
            &[1.0, 0.0, 0.5, 0.0],
            1.0,
            DiversityNormalization::Minmax,
            QuerySign::AsWritten,
        )
        .unwrap();
        let want = [-0.9, 0.9, 0.0, 0.2];
        for (a, b) in r.combined.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(r.indices, vec![1, 3, 2, 0]);
    }

    #[test]
    fn constant_critic_falls_back_to_entropy_ranking() {
        let r = combine_scores(
            vec![0.3, 0.1, 0.7],
            &[2.0, 2.0, 2.0],
            10.0,
            DiversityNormalization::Minmax,
            QuerySign::AsWritten,
        )
        .unwrap();
        assert_eq!(r.diversity, vec![0.0; 3]);
        assert_eq!(r.indices, vec![2, 0, 1]);
    }

    #[test]
    fn ties_prefer_lower_positions() {
        let r = combine_scores(
            vec![0.5, 0.9, 0.9],
            &[0.0; 3],
            0.0,
            DiversityNormalization::Raw,
            QuerySign::AsWritten,
        )
        .unwrap();
        assert_eq!(select_queries(&r, 3, 0.34).unwrap(), vec![1]);
    }

    #[test]
    fn budget_rounding() {
        assert_eq!(budget_count(1000, 0.05), 50);
        assert_eq!(budget_count(10, 0.05), 1);
        assert_eq!(budget_count(10, 0.25), 3);
        assert_eq!(budget_count(3, 0.01), 1);
        assert!(matches!(random_queries(0, 0.5, 1), Err(Error::Capacity(_))));
    }

    #[test]
    fn random_queries_are_seeded_and_distinct() {
        let a = random_queries(100, 0.99, 4).unwrap();
        assert_eq!(a, random_queries(100, 0.99, 4).unwrap());
        assert_eq!(a.len(), 99);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn hand_evaluated_weights() {
        let w = uncertainty_weights(&[0, 0, 1], &[0.2, 0.6, 0.2], 2).unwrap();
        assert!((w.alpha[0] - 0.8).abs() < 1e-12 && (w.alpha[1] - 0.2).abs() < 1e-12);
        assert_eq!(w.counts, vec![2, 1]);
        let single = uncertainty_weights(&[2, 2], &[0.4, 0.1], 3).unwrap();
        assert_eq!(single.alpha, vec![0.0, 0.0, 1.0]);
        let flat = uncertainty_weights(&[0, 1, 1, 1], &[0.0; 4], 2).unwrap();
        assert_eq!(flat.alpha, vec![0.25, 0.75]);
        assert!(uncertainty_weights(&[3], &[0.1], 2).is_err());
    }

    #[test]
    fn hand_evaluated_query_loss() {
        let p = Tensor::from_rows(&[[0.5, 0.5], [0.5, 0.5]]).unwrap();
        let l = weighted_query_loss(&p, &[0, 1], &[0.8, 0.2]).unwrap();
        assert!((l - 0.346574).abs() < 1e-6);
        assert_eq!(weighted_query_loss(&p, &[0, 0], &[0.0, 1.0]).unwrap(), 0.0);
    }
}

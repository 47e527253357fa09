use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{
    query_scores, random_queries, select_queries, stage1_train, stage3_train, stream_seed,
    uncertainty_weights, EpochStats, Nets, StageOutput, Strategy, TrainConfig, WeightVector,
};
use crate::autodiff::Tensor;
use crate::data::{DomainPair, ShiftSpec, Standardizer};
use crate::error::{Error, Result};
use crate::nets::accuracy;

pub const RECORD_VERSION: u32 = 1;

/// Training pools: the original labelled source `S`, the queried set `Q`
/// with oracle labels, and the remaining unlabelled target pool `T'`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pools {
    pub source: Tensor,
    pub source_labels: Vec<usize>,
    pub queried: Tensor,
    pub queried_labels: Vec<usize>,
    /// Original target row of every queried instance.
    pub queried_ids: Vec<usize>,
    /// Entropy of every queried instance at query time.
    pub queried_entropy: Vec<f64>,
    pub target: Tensor,
    /// Original target row of every remaining pool position.
    pub target_ids: Vec<usize>,
}

impl Pools {
    pub fn from_pair(pair: &DomainPair) -> Pools {
        Pools {
            source: pair.source.features.clone(),
            source_labels: pair.source_labels().to_vec(),
            queried: Tensor::zeros(&[0, pair.source.dim()]),
            queried_labels: Vec::new(),
            queried_ids: Vec::new(),
            queried_entropy: Vec::new(),
            target: pair.target.features.clone(),
            target_ids: (0..pair.target.len()).collect(),
        }
    }

    /// Features of `S' = S u Q`.
    pub fn adversarial_source(&self) -> Result<Tensor> {
        self.source.vstack(&self.queried)
    }

    /// Size of `S'`.
    pub fn labelled_len(&self) -> usize {
        self.source.rows() + self.queried.rows()
    }
}

/// Moves target pool positions into the queried set with their labels.
pub fn update_pools(
    pools: &Pools,
    positions: &[usize],
    labels: &[usize],
    entropies: &[f64],
) -> Result<Pools> {
    if labels.len() != positions.len() || entropies.len() != positions.len() {
        return Err(Error::contract("one label and entropy per queried position"));
    }
    let mut seen = HashSet::with_capacity(positions.len());
    for &p in positions {
        if p >= pools.target.rows() {
            return Err(Error::contract(format!(
                "position {p} outside a pool of {}",
                pools.target.rows()
            )));
        }
        if !seen.insert(p) {
            return Err(Error::contract(format!("position {p} queried twice")));
        }
    }
    let keep: Vec<usize> = (0..pools.target.rows())
        .filter(|p| !seen.contains(p))
        .collect();
    let mut out = pools.clone();
    out.queried = pools.queried.vstack(&pools.target.select_rows(positions))?;
    out.queried_labels.extend_from_slice(labels);
    out.queried_ids
        .extend(positions.iter().map(|&p| pools.target_ids[p]));
    out.queried_entropy.extend_from_slice(entropies);
    out.target = pools.target.select_rows(&keep);
    out.target_ids = keep.iter().map(|&p| pools.target_ids[p]).collect();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    /// Fraction of the current pool queried this round.
    pub budget: f64,
    pub pool_size: usize,
    pub query_positions: Vec<usize>,
    pub target_ids: Vec<usize>,
    pub uncertainty: Vec<f64>,
    pub diversity: Vec<f64>,
    pub combined: Vec<f64>,
    pub oracle_labels: Vec<usize>,
    /// Class weights over every instance queried so far.
    pub weights: Option<WeightVector>,
    pub history: Vec<EpochStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalMetrics {
    pub stage1_source_accuracy: f64,
    pub stage1_target_accuracy: f64,
    pub source_accuracy: f64,
    pub target_accuracy: f64,
    pub queried: usize,
}

/// Everything a run produced, in serialisable form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub format_version: u32,
    pub config: TrainConfig,
    pub dataset: ShiftSpec,
    pub standardizer: Standardizer,
    pub stage1: Vec<EpochStats>,
    pub rounds: Vec<RoundRecord>,
    pub final_metrics: FinalMetrics,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub nets: Nets,
    pub record: RunRecord,
}

/// Standardises both domains with statistics of the source features, or
/// leaves them as they are when `config.standardize` is off.
pub fn prepare_pair(pair: &DomainPair, config: &TrainConfig) -> Result<(DomainPair, Standardizer)> {
    let s = if config.standardize {
        Standardizer::fit(&pair.source.features)?
    } else {
        Standardizer::identity(pair.source.dim())
    };
    Ok((pair.standardized(&s)?, s))
}

fn target_accuracy(pair: &DomainPair, nets: &Nets) -> Result<f64> {
    Ok(pair.target_accuracy(&nets.predict(&pair.target.features)?))
}

/// Initialises the networks and runs stage 1 on a prepared pair. The result
/// does not depend on the strategy.
pub fn run_stage1(pair: &DomainPair, config: &TrainConfig) -> Result<StageOutput> {
    config.validate()?;
    let nets = Nets::init(pair.source.dim(), pair.num_classes(), config)?;
    let eval = |n: &Nets| target_accuracy(pair, n);
    stage1_train(nets, &Pools::from_pair(pair), config, Some(&eval))
}

/// Query rounds and stage 3, continuing from a stage-1 result on the same
/// prepared pair.
pub fn run_from_stage1(
    pair: &DomainPair,
    standardizer: &Standardizer,
    config: &TrainConfig,
    stage1: &StageOutput,
) -> Result<RunOutput> {
    config.validate()?;
    let eval = |n: &Nets| target_accuracy(pair, n);
    let mut nets = stage1.nets.clone();
    let stage1_source_accuracy = accuracy(
        &nets.predict(&pair.source.features)?,
        pair.source_labels(),
    );
    let stage1_target_accuracy = target_accuracy(pair, &nets)?;
    let mut pools = Pools::from_pair(pair);
    let round_budget = config.budget / config.query_rounds as f64;
    let mut rounds = Vec::with_capacity(config.query_rounds);

    for round in 0..config.query_rounds {
        let pool_size = pools.target.rows();
        let mut rec = RoundRecord {
            round,
            budget: round_budget,
            pool_size,
            query_positions: Vec::new(),
            target_ids: Vec::new(),
            uncertainty: Vec::new(),
            diversity: Vec::new(),
            combined: Vec::new(),
            oracle_labels: Vec::new(),
            weights: None,
            history: Vec::new(),
        };
        if config.strategy != Strategy::None {
            let scores = query_scores(&nets, &pools.target, config)?;
            let positions = match config.strategy {
                Strategy::Active => select_queries(&scores, pool_size, round_budget)?,
                _ => random_queries(
                    pool_size,
                    round_budget,
                    stream_seed(config.seed, 100 + round as u64),
                )?,
            };
            let ids: Vec<usize> = positions.iter().map(|&p| pools.target_ids[p]).collect();
            let labels = pair.oracle_labels(&ids);
            let pick = |v: &[f64]| positions.iter().map(|&p| v[p]).collect::<Vec<f64>>();
            rec.uncertainty = pick(&scores.uncertainty);
            rec.diversity = pick(&scores.diversity);
            rec.combined = pick(&scores.combined);
            pools = update_pools(&pools, &positions, &labels, &rec.uncertainty)?;
            rec.query_positions = positions;
            rec.target_ids = ids;
            rec.oracle_labels = labels;
            rec.weights = Some(uncertainty_weights(
                &pools.queried_labels,
                &pools.queried_entropy,
                pair.num_classes(),
            )?);
        }
        let uniform = vec![0.0; pair.num_classes()];
        let alpha = rec.weights.as_ref().map_or(&uniform[..], |w| &w.alpha[..]);
        let out = stage3_train(nets, &pools, alpha, config, Some(&eval))?;
        nets = out.nets;
        rec.history = out.history;
        rounds.push(rec);
    }

    let final_metrics = FinalMetrics {
        stage1_source_accuracy,
        stage1_target_accuracy,
        source_accuracy: accuracy(&nets.predict(&pair.source.features)?, pair.source_labels()),
        target_accuracy: target_accuracy(pair, &nets)?,
        queried: pools.queried_labels.len(),
    };
    Ok(RunOutput {
        nets,
        record: RunRecord {
            format_version: RECORD_VERSION,
            config: config.clone(),
            dataset: pair.shift_spec.clone(),
            standardizer: standardizer.clone(),
            stage1: stage1.history.clone(),
            rounds,
            final_metrics,
        },
    })
}

/// Stage 1, then `query_rounds` rounds of query, pool update, weighting and
/// stage 3, each round querying `budget / query_rounds` of the current pool.
pub fn run_algorithm_1(pair: &DomainPair, config: &TrainConfig) -> Result<RunOutput> {
    let (prepared, standardizer) = prepare_pair(pair, config)?;
    let stage1 = run_stage1(&prepared, config)?;
    run_from_stage1(&prepared, &standardizer, config, &stage1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pools(n_t: usize) -> Pools {
        Pools {
            source: Tensor::zeros(&[2, 1]),
            source_labels: vec![0, 1],
            queried: Tensor::zeros(&[0, 1]),
            queried_labels: vec![],
            queried_ids: vec![],
            queried_entropy: vec![],
            target: Tensor::matrix(n_t, 1, (0..n_t).map(|i| i as f64).collect()).unwrap(),
            target_ids: (0..n_t).collect(),
        }
    }

    #[test]
    fn update_moves_rows_and_tracks_ids() {
        let p = pools(5);
        let q = update_pools(&p, &[3, 1], &[1, 0], &[0.5, 0.2]).unwrap();
        assert_eq!(q.queried.data(), &[3.0, 1.0]);
        assert_eq!(q.queried_ids, vec![3, 1]);
        assert_eq!(q.target_ids, vec![0, 2, 4]);
        assert_eq!(q.labelled_len(), 4);
        let r = update_pools(&q, &[1], &[1], &[0.1]).unwrap();
        assert_eq!(r.queried_ids, vec![3, 1, 2]);
        assert_eq!(r.target.data(), &[0.0, 4.0]);
    }

    #[test]
    fn update_rejects_duplicates_and_out_of_range() {
        let p = pools(3);
        assert!(update_pools(&p, &[1, 1], &[0, 0], &[0.0, 0.0]).is_err());
        assert!(update_pools(&p, &[3], &[0], &[0.0]).is_err());
        assert_eq!(update_pools(&p, &[], &[], &[]).unwrap(), p);
    }
}

//! Active discriminative domain adaptation: adversarial alignment with a
//! Wasserstein critic, entropy-plus-critic querying, and uncertainty
//! weighted retraining on the queried labels.

mod pipeline;
mod query;
mod train;

pub use pipeline::{
    prepare_pair, run_algorithm_1, run_from_stage1, run_stage1, update_pools, FinalMetrics,
    Pools, RoundRecord, RunOutput, RunRecord,
};
pub use query::{
    budget_count, combine_scores, normalize_diversity, query_scores, random_queries,
    rank_descending, select_queries, uncertainty_weights, weighted_query_loss, QueryResult,
    WeightVector,
};
pub use train::{stage1_train, stage3_train, EpochStats, StageOutput};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::nets::{
    argmax_rows, init_network, softmax_rows, HiddenActivation, NetworkParams, NetworkSpec,
    OutputActivation,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Active,
    Random,
    None,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Active => "active",
            Strategy::Random => "random",
            Strategy::None => "none",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "active" => Ok(Strategy::Active),
            "random" => Ok(Strategy::Random),
            "none" => Ok(Strategy::None),
            _ => Err(format!("unknown strategy `{s}` (active, random, none)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiversityNormalization {
    Raw,
    Minmax,
    Zscore,
}

/// Sign of the critic term in the query score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuerySign {
    /// `U - lambda_div * d`.
    AsWritten,
    /// `U + lambda_div * d`.
    FarFromSource,
}

/// How the gradient penalty enters the critic objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyMode {
    /// Maximise `lambda_w * (W1 - L_grad)`.
    AsWritten,
    /// Maximise `W1 - penalty_coef * L_grad`.
    Separate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub budget: f64,
    pub lambda_div: f64,
    pub delta: f64,
    pub query_rounds: usize,
    pub critic_steps: usize,
    pub stage1_epochs: usize,
    pub stage3_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub critic_learning_rate: f64,
    pub adam_betas: (f64, f64),
    pub seed: u64,
    pub strategy: Strategy,
    pub diversity_normalization: DiversityNormalization,
    pub query_sign: QuerySign,
    pub penalty_mode: PenaltyMode,
    pub penalty_coef: f64,
    /// Replaces the `lambda_w` schedule with a constant.
    pub lambda_w_override: Option<f64>,
    pub early_stop: bool,
    pub patience: usize,
    pub min_delta: f64,
    pub feature_hidden: usize,
    pub feature_dim: usize,
    pub critic_hidden: usize,
    pub hidden_activation: HiddenActivation,
    pub standardize: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            budget: 0.1,
            lambda_div: 10.0,
            delta: 10.0,
            query_rounds: 1,
            critic_steps: 5,
            stage1_epochs: 30,
            stage3_epochs: 30,
            batch_size: 64,
            learning_rate: 5e-3,
            critic_learning_rate: 5e-3,
            adam_betas: (0.5, 0.9),
            seed: 0,
            strategy: Strategy::Active,
            diversity_normalization: DiversityNormalization::Minmax,
            query_sign: QuerySign::AsWritten,
            penalty_mode: PenaltyMode::AsWritten,
            penalty_coef: 10.0,
            lambda_w_override: None,
            early_stop: true,
            patience: 5,
            min_delta: 1e-4,
            feature_hidden: 32,
            feature_dim: 16,
            critic_hidden: 32,
            hidden_activation: HiddenActivation::Tanh,
            standardize: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.budget > 0.0 && self.budget < 1.0) {
            return Err(Error::contract(format!(
                "budget must lie in (0, 1), got {}",
                self.budget
            )));
        }
        if !(self.lambda_div >= 0.0) || !self.lambda_div.is_finite() {
            return Err(Error::contract("lambda_div must be finite and non-negative"));
        }
        let counts = [
            ("query_rounds", self.query_rounds),
            ("critic_steps", self.critic_steps),
            ("stage1_epochs", self.stage1_epochs),
            ("stage3_epochs", self.stage3_epochs),
            ("batch_size", self.batch_size),
            ("patience", self.patience),
            ("feature_hidden", self.feature_hidden),
            ("feature_dim", self.feature_dim),
            ("critic_hidden", self.critic_hidden),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::contract(format!("{name} must be at least 1")));
        }
        let positive = [
            ("learning_rate", self.learning_rate),
            ("critic_learning_rate", self.critic_learning_rate),
            ("delta", self.delta),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::contract(format!("{name} must be positive")));
        }
        let (b1, b2) = self.adam_betas;
        if !(0.0..1.0).contains(&b1) || !(0.0..1.0).contains(&b2) {
            return Err(Error::contract("adam betas must lie in [0, 1)"));
        }
        Ok(())
    }

    /// The adversarial weight at training progress `p` (clamped to `[0, 1]`).
    pub fn lambda_w_at(&self, p: f64) -> f64 {
        self.lambda_w_override
            .unwrap_or_else(|| lambda_w(p, self.delta))
    }
}

/// `2 / (1 + exp(-delta * p)) - 1` for `p` clamped to `[0, 1]`.
pub fn lambda_w(p: f64, delta: f64) -> f64 {
    let p = p.clamp(0.0, 1.0);
    2.0 / (1.0 + (-delta * p).exp()) - 1.0
}

/// Feature extractor, classifier and critic.
#[derive(Debug, Clone, PartialEq)]
pub struct Nets {
    pub feature: NetworkParams,
    pub classifier: NetworkParams,
    pub critic: NetworkParams,
}

impl Nets {
    /// `F: d -> hidden -> feature_dim`, `C: feature_dim -> classes` and
    /// `D: feature_dim -> hidden -> 1`, seeded from `config.seed`.
    pub fn init(input_dim: usize, num_classes: usize, config: &TrainConfig) -> Result<Nets> {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let act = config.hidden_activation;
        let feature = NetworkSpec::new(
            vec![input_dim, config.feature_hidden, config.feature_dim],
            act,
            OutputActivation::Identity,
        )?;
        let classifier = NetworkSpec::new(
            vec![config.feature_dim, num_classes],
            act,
            OutputActivation::Softmax,
        )?;
        let critic = NetworkSpec::new(
            vec![config.feature_dim, config.critic_hidden, 1],
            act,
            OutputActivation::Identity,
        )?;
        Ok(Nets {
            feature: init_network(&feature, rng.next_u64())?,
            classifier: init_network(&classifier, rng.next_u64())?,
            critic: init_network(&critic, rng.next_u64())?,
        })
    }

    /// Rows of `C(F(x))`.
    pub fn class_probabilities(&self, x: &Tensor) -> Result<Tensor> {
        let logits = self.classifier.pre_output(&self.feature.forward(x)?)?;
        Ok(softmax_rows(&logits))
    }

    pub fn predict(&self, x: &Tensor) -> Result<Vec<usize>> {
        Ok(argmax_rows(&self.class_probabilities(x)?))
    }

    /// `D(F(x))` per row.
    pub fn critic_scores(&self, x: &Tensor) -> Result<Vec<f64>> {
        Ok(self.critic.forward(&self.feature.forward(x)?)?.into_data())
    }
}

/// Independent seed for a named sub-stream of a run.
pub(crate) fn stream_seed(seed: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.next_u64()
}

/// Seed of the interpolation draw for critic step `k` of iteration `iter`.
pub(crate) fn interpolation_seed(seed: u64, iter: usize, k: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ ((iter as u64) << 16 | k as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_endpoints_and_monotonicity() {
        assert_eq!(lambda_w(0.0, 10.0), 0.0);
        let expected = 2.0 / (1.0 + (-10.0f64).exp()) - 1.0;
        assert!((lambda_w(1.0, 10.0) - expected).abs() < 1e-15);
        assert!((lambda_w(1.0, 10.0) - 0.999909).abs() < 1e-6);
        assert_eq!(lambda_w(-3.0, 10.0), 0.0);
        let grid: Vec<f64> = (0..100).map(|i| lambda_w(i as f64 / 99.0, 10.0)).collect();
        assert!(grid.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn config_validation() {
        let ok = TrainConfig::default();
        assert!(ok.validate().is_ok());
        for bad in [
            TrainConfig { budget: 1.5, ..ok.clone() },
            TrainConfig { budget: 0.0, ..ok.clone() },
            TrainConfig { lambda_div: -1.0, ..ok.clone() },
            TrainConfig { critic_steps: 0, ..ok.clone() },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn nets_are_seeded() {
        let c = TrainConfig::default();
        let a = Nets::init(2, 3, &c).unwrap();
        assert_eq!(a, Nets::init(2, 3, &c).unwrap());
        assert_ne!(a.feature.layers[0].weight, a.critic.layers[0].weight);
        let p = a.class_probabilities(&Tensor::zeros(&[4, 2])).unwrap();
        assert_eq!(p.shape(), &[4, 3]);
    }
}

//! Dense networks for the feature extractor, classifier and critic, plus
//! the classification losses and the entropy uncertainty measure.

pub mod checkpoint;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{self, Bindings, Graph, NodeId, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HiddenActivation {
    Tanh,
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputActivation {
    Identity,
    Softmax,
    Sigmoid,
}

/// Layer widths `[input, hidden.., output]` and activations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub layer_widths: Vec<usize>,
    pub hidden_activation: HiddenActivation,
    pub output_activation: OutputActivation,
}

impl NetworkSpec {
    pub fn new(
        layer_widths: Vec<usize>,
        hidden_activation: HiddenActivation,
        output_activation: OutputActivation,
    ) -> Result<Self> {
        let spec = Self {
            layer_widths,
            hidden_activation,
            output_activation,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_widths.len() < 2 {
            return Err(Error::contract(
                "a network needs at least one layer (two widths)",
            ));
        }
        if self.layer_widths.iter().any(|&w| w == 0) {
            return Err(Error::contract("layer widths must be positive"));
        }
        Ok(())
    }

    pub fn input_width(&self) -> usize {
        self.layer_widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.layer_widths.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.layer_widths.len() - 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `[fan_in, fan_out]`
    pub weight: Tensor,
    /// `[fan_out]`
    pub bias: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub spec: NetworkSpec,
    pub init_seed: u64,
    pub layers: Vec<Layer>,
}

/// Glorot-uniform weights, zero biases; a pure function of `(spec, seed)`.
pub fn init_network(spec: &NetworkSpec, seed: u64) -> Result<NetworkParams> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = spec
        .layer_widths
        .windows(2)
        .map(|w| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let data = (0..fan_in * fan_out)
                .map(|_| rng.random_range(-bound..bound))
                .collect();
            Layer {
                weight: Tensor::with_shape(vec![fan_in, fan_out], data),
                bias: Tensor::zeros(&[fan_out]),
            }
        })
        .collect();
    Ok(NetworkParams {
        spec: spec.clone(),
        init_seed: seed,
        layers,
    })
}

impl NetworkParams {
    /// Output before the output activation.
    pub fn pre_output(&self, x: &Tensor) -> Result<Tensor> {
        if x.shape().len() != 2 || x.cols() != self.spec.input_width() {
            return Err(Error::shape(
                0,
                format!(
                    "input of shape {:?} does not match network input width {}",
                    x.shape(),
                    self.spec.input_width()
                ),
            ));
        }
        let last = self.layers.len() - 1;
        let mut h = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = autodiff::matmul(&h, &layer.weight);
            let out = layer.bias.len();
            for row in z.data_mut().chunks_mut(out) {
                for (v, b) in row.iter_mut().zip(layer.bias.data()) {
                    *v += b;
                }
            }
            if i < last {
                z = match self.spec.hidden_activation {
                    HiddenActivation::Tanh => z.map(f64::tanh),
                    HiddenActivation::Relu => z.map(|v| v.max(0.0)),
                };
            }
            h = z;
        }
        Ok(h)
    }

    /// Batch forward pass; rows of a softmax head are probability vectors.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let z = self.pre_output(x)?;
        Ok(match self.spec.output_activation {
            OutputActivation::Identity => z,
            OutputActivation::Sigmoid => z.map(autodiff::sigmoid),
            OutputActivation::Softmax => softmax_rows(&z),
        })
    }

    pub fn tensors(&self) -> impl Iterator<Item = &Tensor> + '_ {
        self.layers.iter().flat_map(|l| [&l.weight, &l.bias])
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Tensor> + '_ {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().map(Tensor::len).sum()
    }

    /// Adds this network's parameters to `graph` as leaves `{prefix}.w{i}`
    /// and `{prefix}.b{i}`.
    pub fn bind_graph(&self, graph: &mut Graph, prefix: &str) -> Result<NetHandle> {
        let mut weights = Vec::with_capacity(self.layers.len());
        let mut biases = Vec::with_capacity(self.layers.len());
        for (i, l) in self.layers.iter().enumerate() {
            weights.push(graph.param(format!("{prefix}.w{i}"), l.weight.shape())?);
            biases.push(graph.param(format!("{prefix}.b{i}"), l.bias.shape())?);
        }
        Ok(NetHandle {
            spec: self.spec.clone(),
            weights,
            biases,
        })
    }

    pub fn bind_values<'a>(&'a self, prefix: &str, bindings: &mut Bindings<'a>) {
        for (i, l) in self.layers.iter().enumerate() {
            bindings.bind(format!("{prefix}.w{i}"), &l.weight);
            bindings.bind(format!("{prefix}.b{i}"), &l.bias);
        }
    }

    /// Upper bound on the Lipschitz constant w.r.t. the Euclidean norm:
    /// product of per-layer spectral bounds `sqrt(|W|_1 |W|_inf)` times the
    /// activations' Lipschitz constants.
    pub fn lipschitz_upper_bound(&self) -> f64 {
        let layers: f64 = self
            .layers
            .iter()
            .map(|l| spectral_upper_bound(&l.weight))
            .product();
        let head = match self.spec.output_activation {
            OutputActivation::Sigmoid => 0.25,
            OutputActivation::Identity | OutputActivation::Softmax => 1.0,
        };
        layers * head
    }

    /// Copy with every weight matrix divided by its spectral upper bound, so
    /// the network is 1-Lipschitz by construction.
    pub fn lipschitz_normalized(&self) -> NetworkParams {
        let mut out = self.clone();
        for l in &mut out.layers {
            let s = spectral_upper_bound(&l.weight);
            if s > 0.0 {
                l.weight = l.weight.map(|v| v / s);
            }
        }
        out
    }
}

/// `sqrt(max column abs-sum * max row abs-sum)`, which bounds the spectral norm.
fn spectral_upper_bound(w: &Tensor) -> f64 {
    let (r, c) = (w.shape()[0], w.shape()[1]);
    let max_row = (0..r)
        .map(|i| w.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let max_col = (0..c)
        .map(|j| (0..r).map(|i| w.data()[i * c + j].abs()).sum::<f64>())
        .fold(0.0, f64::max);
    (max_row * max_col).sqrt()
}

/// Parameter leaves of one network inside a graph.
#[derive(Debug, Clone)]
pub struct NetHandle {
    spec: NetworkSpec,
    weights: Vec<NodeId>,
    biases: Vec<NodeId>,
}

impl NetHandle {
    /// Parameter ids in the order of [`NetworkParams::tensors`].
    pub fn param_ids(&self) -> Vec<NodeId> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(&w, &b)| [w, b])
            .collect()
    }

    pub fn pre_output(&self, g: &mut Graph, x: NodeId) -> Result<NodeId> {
        let last = self.weights.len() - 1;
        let mut h = x;
        for (i, (&w, &b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let z = g.dense(h, w, b)?;
            h = if i < last {
                match self.spec.hidden_activation {
                    HiddenActivation::Tanh => g.tanh(z)?,
                    HiddenActivation::Relu => g.relu(z)?,
                }
            } else {
                z
            };
        }
        Ok(h)
    }

    pub fn output(&self, g: &mut Graph, x: NodeId) -> Result<NodeId> {
        let z = self.pre_output(g, x)?;
        match self.spec.output_activation {
            OutputActivation::Identity => Ok(z),
            OutputActivation::Sigmoid => g.sigmoid(z),
            OutputActivation::Softmax => {
                let s = g.shape(z).to_vec();
                let lse = g.row_logsumexp(z)?;
                let lse = g.broadcast(lse, &s)?;
                let shifted = g.sub(z, lse)?;
                g.exp(shifted)
            }
        }
    }
}

/// Reassembles per-tensor values (e.g. gradients) into the shape of `like`.
pub fn params_from_tensors(like: &NetworkParams, tensors: Vec<Tensor>) -> NetworkParams {
    let mut out = like.clone();
    for (dst, src) in out.tensors_mut().zip(tensors) {
        *dst = src;
    }
    out
}

pub fn softmax_rows(logits: &Tensor) -> Tensor {
    let c = logits.cols();
    let mut data = Vec::with_capacity(logits.len());
    for row in logits.row_iter() {
        let lse = autodiff::log_sum_exp(row);
        data.extend(row.iter().map(|v| (v - lse).exp()));
    }
    Tensor::with_shape(vec![logits.rows(), c], data)
}

fn check_labels(rows: usize, classes: usize, labels: &[usize]) -> Result<()> {
    if labels.len() != rows {
        return Err(Error::contract(format!(
            "{} labels for {} rows",
            labels.len(),
            rows
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
        return Err(Error::contract(format!(
            "label {bad} out of range for {classes} classes"
        )));
    }
    Ok(())
}

/// Mean of `-ln p[label]` over a batch of probability rows.
pub fn cross_entropy(probabilities: &Tensor, labels: &[usize]) -> Result<f64> {
    check_labels(probabilities.rows(), probabilities.cols(), labels)?;
    if labels.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = labels
        .iter()
        .enumerate()
        .map(|(i, &y)| -probabilities.row(i)[y].ln())
        .sum();
    Ok((total / labels.len() as f64).max(0.0))
}

/// Cross-entropy from unnormalised scores, via log-softmax.
pub fn cross_entropy_from_logits(logits: &Tensor, labels: &[usize]) -> Result<f64> {
    check_labels(logits.rows(), logits.cols(), labels)?;
    if labels.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = labels
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let row = logits.row(i);
            autodiff::log_sum_exp(row) - row[y]
        })
        .sum();
    Ok((total / labels.len() as f64).max(0.0))
}

/// Shannon entropy in nats, with `0 ln 0 = 0`.
pub fn predictive_entropy(probabilities: &[f64]) -> f64 {
    // folding from +0.0 keeps one-hot rows at +0.0 rather than -0.0
    probabilities
        .iter()
        .filter(|&&p| p > 0.0)
        .fold(0.0, |acc, &p| acc - p * p.ln())
}

pub fn argmax_rows(t: &Tensor) -> Vec<usize> {
    t.row_iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, &v)| {
                    if v > best.1 {
                        (i, v)
                    } else {
                        best
                    }
                })
                .0
        })
        .collect()
}

pub fn accuracy(predictions: &[usize], labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let hits = predictions
        .iter()
        .zip(labels)
        .filter(|(a, b)| a == b)
        .count();
    hits as f64 / labels.len() as f64
}

/// Graph node for `mean_i w_i * (-log softmax(logits_i)[y_i])`; unit
/// weights when `row_weights` is `None`.
pub fn weighted_cross_entropy_node(
    g: &mut Graph,
    logits: NodeId,
    labels: &[usize],
    row_weights: Option<&[f64]>,
) -> Result<NodeId> {
    let shape = g.shape(logits).to_vec();
    if shape.len() != 2 {
        return Err(Error::contract("logits must be a matrix"));
    }
    let (n, c) = (shape[0], shape[1]);
    check_labels(n, c, labels)?;
    let mut onehot = vec![0.0; n * c];
    for (i, &y) in labels.iter().enumerate() {
        onehot[i * c + y] = 1.0;
    }
    let onehot = g.constant(Tensor::with_shape(vec![n, c], onehot));
    let picked = g.mul(onehot, logits)?;
    let picked = g.reduce_to(picked, &[n, 1])?;
    let lse = g.row_logsumexp(logits)?;
    let mut nll = g.sub(lse, picked)?;
    if let Some(w) = row_weights {
        if w.len() != n {
            return Err(Error::contract("one weight per row required"));
        }
        let w = g.constant(Tensor::with_shape(vec![n, 1], w.to_vec()));
        nll = g.mul(nll, w)?;
    }
    g.mean(nll)
}

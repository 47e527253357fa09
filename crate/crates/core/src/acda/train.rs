use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{interpolation_seed, stream_seed, Nets, PenaltyMode, Pools, TrainConfig};
use crate::autodiff::{Bindings, Graph, NodeId, Tensor};
use crate::data::batch_iterator;
use crate::error::{Error, Result};
use crate::nets::accuracy;
use crate::optim::Adam;
use crate::transport::{build_critic_graph, interpolate, CriticGraph};

/// Epoch means of the stage losses plus accuracies after the epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub lambda_w: f64,
    pub l_cls: f64,
    pub l_query: f64,
    pub w1_estimate: f64,
    pub l_grad: f64,
    pub source_accuracy: f64,
    pub target_accuracy: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct StageOutput {
    pub nets: Nets,
    pub history: Vec<EpochStats>,
}

/// Target-domain accuracy of the current networks, for monitoring only.
pub type TargetEval<'a> = &'a dyn Fn(&Nets) -> Result<f64>;

/// Stream tags of the per-run samplers.
const SOURCE_STREAM: u64 = 11;
const ADVERSARIAL_STREAM: u64 = 12;
const TARGET_STREAM: u64 = 13;
const QUERY_STREAM: u64 = 14;

/// Endless fixed-size batches over `0..n`, reshuffled on every pass.
struct Cycler {
    n: usize,
    size: usize,
    seed: u64,
    pass: u64,
    order: Vec<usize>,
    pos: usize,
}

impl Cycler {
    fn new(n: usize, size: usize, seed: u64) -> Self {
        Cycler {
            n,
            size,
            seed,
            pass: 0,
            order: Vec::new(),
            pos: n,
        }
    }

    fn next_batch(&mut self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.size);
        while out.len() < self.size {
            if self.pos == self.n {
                self.order = batch_iterator(self.n, self.n, self.seed, self.pass)
                    .pop()
                    .unwrap_or_default();
                self.pass += 1;
                self.pos = 0;
            }
            out.push(self.order[self.pos]);
            self.pos += 1;
        }
        out
    }
}

fn onehot(labels: &[usize], classes: usize) -> Tensor {
    let mut data = vec![0.0; labels.len() * classes];
    for (i, &y) in labels.iter().enumerate() {
        data[i * classes + y] = 1.0;
    }
    Tensor::matrix(labels.len(), classes, data).expect("shape matches data")
}

/// `mean_i w_i * (lse(z_i) - <onehot_i, z_i>)`, with inputs for labels and
/// optional row weights so one graph serves every batch.
fn cross_entropy_node(
    g: &mut Graph,
    logits: NodeId,
    onehot: NodeId,
    weights: Option<NodeId>,
) -> Result<NodeId> {
    let n = g.shape(logits)[0];
    let picked = g.mul(onehot, logits)?;
    let picked = g.reduce_to(picked, &[n, 1])?;
    let lse = g.row_logsumexp(logits)?;
    let mut nll = g.sub(lse, picked)?;
    if let Some(w) = weights {
        nll = g.mul(nll, w)?;
    }
    g.mean(nll)
}

/// Descent graph for `(F, C)`: `L_cls [+ L_w^q] + lambda * W1`.
struct GeneratorGraph {
    graph: Graph,
    grads: Vec<NodeId>,
    l_cls: NodeId,
    l_query: Option<NodeId>,
    w1: NodeId,
}

fn build_generator(
    nets: &Nets,
    n_cls: usize,
    n_adv: usize,
    n_query: usize,
) -> Result<GeneratorGraph> {
    let d = nets.feature.spec.input_width();
    let c = nets.classifier.spec.output_width();
    let mut g = Graph::new();
    let xs = g.input("xs", &[n_cls, d])?;
    let ys = g.input("ys", &[n_cls, c])?;
    let xa = g.input("xa", &[n_adv, d])?;
    let xt = g.input("xt", &[n_adv, d])?;
    let lambda = g.input("lambda", &[])?;
    let fh = nets.feature.bind_graph(&mut g, "f")?;
    let ch = nets.classifier.bind_graph(&mut g, "c")?;
    let dh = nets.critic.bind_graph(&mut g, "d")?;

    let hs = fh.output(&mut g, xs)?;
    let zs = ch.pre_output(&mut g, hs)?;
    let l_cls = cross_entropy_node(&mut g, zs, ys, None)?;
    let mut total = l_cls;
    let mut l_query = None;
    if n_query > 0 {
        let xq = g.input("xq", &[n_query, d])?;
        let yq = g.input("yq", &[n_query, c])?;
        let wq = g.input("wq", &[n_query, 1])?;
        let hq = fh.output(&mut g, xq)?;
        let zq = ch.pre_output(&mut g, hq)?;
        let lq = cross_entropy_node(&mut g, zq, yq, Some(wq))?;
        total = g.add(total, lq)?;
        l_query = Some(lq);
    }
    let critic_mean = |g: &mut Graph, x: NodeId| -> Result<NodeId> {
        let h = fh.output(g, x)?;
        let s = dh.output(g, h)?;
        g.mean(s)
    };
    let ms = critic_mean(&mut g, xa)?;
    let mt = critic_mean(&mut g, xt)?;
    let w1 = g.sub(ms, mt)?;
    let adv = g.mul(lambda, w1)?;
    total = g.add(total, adv)?;

    let mut wrt = fh.param_ids();
    wrt.extend(ch.param_ids());
    let grads = g.gradient_nodes(total, &wrt)?;
    Ok(GeneratorGraph {
        graph: g,
        grads,
        l_cls,
        l_query,
        w1,
    })
}

/// Descent graph for `D` on the negated critic objective.
struct CriticStep {
    cg: CriticGraph,
    grads: Vec<NodeId>,
}

fn build_critic(nets: &Nets, n: usize, config: &TrainConfig) -> Result<CriticStep> {
    let mut cg = build_critic_graph(&nets.feature, &nets.critic, n, n)?;
    let g = &mut cg.graph;
    let objective = match config.penalty_mode {
        PenaltyMode::AsWritten => {
            let lambda = g.input("lambda", &[])?;
            let inner = g.sub(cg.w1, cg.penalty)?;
            g.mul(lambda, inner)?
        }
        PenaltyMode::Separate => {
            let pen = g.scale(cg.penalty, config.penalty_coef)?;
            g.sub(cg.w1, pen)?
        }
    };
    let loss = g.neg(objective)?;
    let grads = g.gradient_nodes(loss, &cg.critic.param_ids())?;
    Ok(CriticStep { cg, grads })
}

struct QuerySet<'a> {
    x: &'a Tensor,
    onehot: Tensor,
    row_weights: Tensor,
}

fn diverged(stage: &str, epoch: usize) -> Error {
    Error::TrainingDiverged {
        stage: stage.to_string(),
        epoch,
    }
}

/// Shared alternating scheme of both training stages.
///
/// Per iteration: `critic_steps` ascent steps on the critic objective over
/// an adversarial source/target batch pair, then one descent step on
/// `(F, C)`. The classification batches cover `pools.source` once per
/// epoch; adversarial source batches come from `S u Q`.
fn train_stage(
    stage: &str,
    mut nets: Nets,
    pools: &Pools,
    alpha: Option<&[f64]>,
    epochs: usize,
    config: &TrainConfig,
    target_eval: Option<TargetEval<'_>>,
) -> Result<StageOutput> {
    config.validate()?;
    let n_s = pools.source.rows();
    let n_t = pools.target.rows();
    if n_s == 0 || n_t == 0 {
        return Err(Error::contract(format!("{stage}: pools must be non-empty")));
    }
    let c = nets.classifier.spec.output_width();
    let adversarial = pools.adversarial_source()?;
    let n_adv = config.batch_size.min(adversarial.rows()).min(n_t);
    let query = match alpha {
        Some(alpha) if !pools.queried_labels.is_empty() => {
            if alpha.len() != c {
                return Err(Error::contract("one query weight per class required"));
            }
            Some(QuerySet {
                x: &pools.queried,
                onehot: onehot(&pools.queried_labels, c),
                row_weights: Tensor::matrix(
                    pools.queried_labels.len(),
                    1,
                    pools.queried_labels.iter().map(|&y| alpha[y]).collect(),
                )?,
            })
        }
        _ => None,
    };
    let n_query = query
        .as_ref()
        .map_or(0, |q| config.batch_size.min(q.x.rows()));
    let source_onehot = onehot(&pools.source_labels, c);

    let mut adv_cycle = Cycler::new(
        adversarial.rows(),
        n_adv,
        stream_seed(config.seed, ADVERSARIAL_STREAM),
    );
    let mut tgt_cycle = Cycler::new(n_t, n_adv, stream_seed(config.seed, TARGET_STREAM));
    let mut query_cycle = query
        .as_ref()
        .map(|q| Cycler::new(q.x.rows(), n_query, stream_seed(config.seed, QUERY_STREAM)));
    let source_seed = stream_seed(config.seed, SOURCE_STREAM);

    let critic_step = build_critic(&nets, n_adv, config)?;
    let mut generators: HashMap<usize, GeneratorGraph> = HashMap::new();
    let (b1, b2) = config.adam_betas;
    let mut gen_opt = Adam::new(config.learning_rate, b1, b2);
    let mut critic_opt = Adam::new(config.critic_learning_rate, b1, b2);

    let iters_per_epoch = n_s.div_ceil(config.batch_size);
    let total_iters = (epochs * iters_per_epoch).max(2);
    let mut iter = 0usize;
    let mut history = Vec::with_capacity(epochs);
    let mut best = f64::INFINITY;
    let mut stale = 0usize;

    for epoch in 0..epochs {
        let mut sums = [0.0f64; 4];
        let batches = batch_iterator(n_s, config.batch_size, source_seed, epoch as u64);
        let mut lambda = 0.0;
        for batch in &batches {
            lambda = config.lambda_w_at(iter as f64 / (total_iters - 1) as f64);
            let lambda_t = Tensor::scalar(lambda);
            let xa = adversarial.select_rows(&adv_cycle.next_batch());
            let xt = pools.target.select_rows(&tgt_cycle.next_batch());

            let mut l_grad = 0.0;
            for k in 0..config.critic_steps {
                let seed = interpolation_seed(config.seed, iter, k);
                let xhat = interpolate(&xa, &xt, seed)?;
                let mut b = critic_step
                    .cg
                    .bindings(&nets.feature, &nets.critic, &xa, &xt, &xhat);
                b.bind("lambda", &lambda_t);
                let values = critic_step.cg.graph.forward_eval(&b)?;
                l_grad = values.scalar(critic_step.cg.penalty);
                let grads: Vec<Tensor> = critic_step
                    .grads
                    .iter()
                    .map(|&id| values.get(id).clone())
                    .collect();
                if !l_grad.is_finite() || grads.iter().any(|t| !t.all_finite()) {
                    return Err(diverged(stage, epoch));
                }
                critic_opt.step(nets.critic.tensors_mut(), &grads);
            }

            let gen = match generators.entry(batch.len()) {
                std::collections::hash_map::Entry::Occupied(e) => e.into_mut(),
                std::collections::hash_map::Entry::Vacant(e) => {
                    e.insert(build_generator(&nets, batch.len(), n_adv, n_query)?)
                }
            };
            let xs = pools.source.select_rows(batch);
            let ys = source_onehot.select_rows(batch);
            let mut b = Bindings::new();
            b.bind("xs", &xs)
                .bind("ys", &ys)
                .bind("xa", &xa)
                .bind("xt", &xt)
                .bind("lambda", &lambda_t);
            if let (Some(q), Some(cycle)) = (&query, query_cycle.as_mut()) {
                let rows = cycle.next_batch();
                b.bind_owned("xq", q.x.select_rows(&rows))
                    .bind_owned("yq", q.onehot.select_rows(&rows))
                    .bind_owned("wq", q.row_weights.select_rows(&rows));
            }
            nets.feature.bind_values("f", &mut b);
            nets.classifier.bind_values("c", &mut b);
            nets.critic.bind_values("d", &mut b);
            let values = gen.graph.forward_eval(&b)?;
            let l_cls = values.scalar(gen.l_cls);
            let l_query = gen.l_query.map_or(0.0, |id| values.scalar(id));
            let w1 = values.scalar(gen.w1);
            let grads: Vec<Tensor> = gen.grads.iter().map(|&id| values.get(id).clone()).collect();
            drop(b);
            if !(l_cls + l_query + w1).is_finite() || grads.iter().any(|t| !t.all_finite()) {
                return Err(diverged(stage, epoch));
            }
            gen_opt.step(
                nets.feature
                    .tensors_mut()
                    .chain(nets.classifier.tensors_mut()),
                &grads,
            );
            for (s, v) in sums.iter_mut().zip([l_cls, l_query, w1, l_grad]) {
                *s += v;
            }
            iter += 1;
        }
        let k = batches.len() as f64;
        let source_accuracy = accuracy(&nets.predict(&pools.source)?, &pools.source_labels);
        let target_accuracy = target_eval.map(|f| f(&nets)).transpose()?;
        let stats = EpochStats {
            epoch,
            lambda_w: lambda,
            l_cls: sums[0] / k,
            l_query: sums[1] / k,
            w1_estimate: sums[2] / k,
            l_grad: sums[3] / k,
            source_accuracy,
            target_accuracy,
        };
        let monitored = stats.l_cls + stats.l_query;
        history.push(stats);
        if config.early_stop {
            if monitored < best - config.min_delta {
                best = monitored;
                stale = 0;
            } else {
                stale += 1;
                if stale >= config.patience {
                    break;
                }
            }
        }
    }
    Ok(StageOutput { nets, history })
}

/// Adversarial training on the labelled source and unlabelled target pools.
pub fn stage1_train(
    nets: Nets,
    pools: &Pools,
    config: &TrainConfig,
    target_eval: Option<TargetEval<'_>>,
) -> Result<StageOutput> {
    let base = Pools {
        queried: Tensor::zeros(&[0, pools.source.cols()]),
        queried_labels: Vec::new(),
        queried_ids: Vec::new(),
        queried_entropy: Vec::new(),
        ..pools.clone()
    };
    train_stage(
        "stage1",
        nets,
        &base,
        None,
        config.stage1_epochs,
        config,
        target_eval,
    )
}

/// Retraining with the queried set: `L_cls` on the original source,
/// `alpha`-weighted cross-entropy on the queried instances and the
/// adversarial term between `S u Q` and the remaining target pool.
pub fn stage3_train(
    nets: Nets,
    pools: &Pools,
    alpha: &[f64],
    config: &TrainConfig,
    target_eval: Option<TargetEval<'_>>,
) -> Result<StageOutput> {
    train_stage(
        "stage3",
        nets,
        pools,
        Some(alpha),
        config.stage3_epochs,
        config,
        target_eval,
    )
}

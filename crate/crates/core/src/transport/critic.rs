use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Bindings, Graph, NodeId, Tensor};
use crate::error::{Error, Result};
use crate::nets::{NetHandle, NetworkParams};

fn check_batches(batch_s: &Tensor, batch_t: &Tensor) -> Result<()> {
    if batch_s.rows() == 0 || batch_t.rows() == 0 || batch_s.is_empty() || batch_t.is_empty() {
        return Err(Error::contract("critic batches must be non-empty"));
    }
    Ok(())
}

fn mean_score(feature: &NetworkParams, critic: &NetworkParams, x: &Tensor) -> Result<f64> {
    let scores = critic.forward(&feature.forward(x)?)?;
    Ok(scores.data().iter().sum::<f64>() / scores.len() as f64)
}

/// `mean D(F(x_s)) - mean D(F(x_t))`.
pub fn critic_w1_estimate(
    feature: &NetworkParams,
    critic: &NetworkParams,
    batch_s: &Tensor,
    batch_t: &Tensor,
) -> Result<f64> {
    check_batches(batch_s, batch_t)?;
    Ok(mean_score(feature, critic, batch_s)? - mean_score(feature, critic, batch_t)?)
}

/// Pairs the first `min(n_s, n_t)` rows and mixes each pair with its own
/// `eps ~ U(0,1)`: `eps * x_s + (1 - eps) * x_t`.
pub fn interpolate(batch_s: &Tensor, batch_t: &Tensor, seed: u64) -> Result<Tensor> {
    check_batches(batch_s, batch_t)?;
    if batch_s.cols() != batch_t.cols() {
        return Err(Error::contract("source and target widths differ"));
    }
    let k = batch_s.rows().min(batch_t.rows());
    let d = batch_s.cols();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(k * d);
    for i in 0..k {
        let eps: f64 = rng.random();
        data.extend(
            batch_s
                .row(i)
                .iter()
                .zip(batch_t.row(i))
                .map(|(s, t)| eps * s + (1.0 - eps) * t),
        );
    }
    Tensor::matrix(k, d, data)
}

/// Graph holding both halves of the critic objective for fixed batch sizes.
///
/// Leaves: inputs `xs`, `xt`, `xhat`; parameters `f.*` and `d.*`.
#[derive(Debug, Clone)]
pub struct CriticGraph {
    pub graph: Graph,
    pub xs: NodeId,
    pub xt: NodeId,
    pub xhat: NodeId,
    pub feature: NetHandle,
    pub critic: NetHandle,
    /// Scalar W1 estimate on `(xs, xt)`.
    pub w1: NodeId,
    /// Scalar `mean (|grad_xhat D(F(xhat))| - 1)^2`.
    pub penalty: NodeId,
}

impl CriticGraph {
    pub fn bindings<'a>(
        &self,
        feature: &'a NetworkParams,
        critic: &'a NetworkParams,
        xs: &'a Tensor,
        xt: &'a Tensor,
        xhat: &'a Tensor,
    ) -> Bindings<'a> {
        let mut b = Bindings::new();
        b.bind("xs", xs).bind("xt", xt).bind("xhat", xhat);
        feature.bind_values("f", &mut b);
        critic.bind_values("d", &mut b);
        b
    }
}

pub fn build_critic_graph(
    feature: &NetworkParams,
    critic: &NetworkParams,
    n_s: usize,
    n_t: usize,
) -> Result<CriticGraph> {
    let width = feature.spec.input_width();
    let pairs = n_s.min(n_t);
    let mut g = Graph::new();
    let xs = g.input("xs", &[n_s, width])?;
    let xt = g.input("xt", &[n_t, width])?;
    let xhat = g.input("xhat", &[pairs, width])?;
    let fh = feature.bind_graph(&mut g, "f")?;
    let dh = critic.bind_graph(&mut g, "d")?;

    let mean_critic = |g: &mut Graph, x: NodeId| -> Result<NodeId> {
        let h = fh.output(g, x)?;
        let s = dh.output(g, h)?;
        g.mean(s)
    };
    let ms = mean_critic(&mut g, xs)?;
    let mt = mean_critic(&mut g, xt)?;
    let w1 = g.sub(ms, mt)?;

    let h = fh.output(&mut g, xhat)?;
    let s = dh.output(&mut g, h)?;
    let total = g.sum(s)?;
    // rows are independent, so d(sum)/d(xhat) holds each row's own gradient
    let grad = g.input_gradient_node(total, xhat)?;
    let norms = g.row_norm(grad)?;
    let dev = g.affine(norms, 1.0, -1.0)?;
    let sq = g.square(dev)?;
    let penalty = g.mean(sq)?;

    Ok(CriticGraph {
        graph: g,
        xs,
        xt,
        xhat,
        feature: fh,
        critic: dh,
        w1,
        penalty,
    })
}

/// Gradient penalty on seeded interpolates between the two batches.
pub fn gradient_penalty(
    feature: &NetworkParams,
    critic: &NetworkParams,
    batch_s: &Tensor,
    batch_t: &Tensor,
    seed: u64,
) -> Result<f64> {
    let xhat = interpolate(batch_s, batch_t, seed)?;
    let cg = build_critic_graph(feature, critic, batch_s.rows(), batch_t.rows())?;
    let b = cg.bindings(feature, critic, batch_s, batch_t, &xhat);
    Ok(cg.graph.forward_eval(&b)?.scalar(cg.penalty))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nets::{init_network, HiddenActivation, NetworkSpec, OutputActivation};

    fn linear(weights: &[f64]) -> NetworkParams {
        let spec = NetworkSpec::new(
            vec![weights.len(), 1],
            HiddenActivation::Tanh,
            OutputActivation::Identity,
        )
        .unwrap();
        let mut p = init_network(&spec, 0).unwrap();
        p.layers[0].weight = Tensor::matrix(weights.len(), 1, weights.to_vec()).unwrap();
        p
    }

    fn identity(d: usize) -> NetworkParams {
        let spec =
            NetworkSpec::new(vec![d, d], HiddenActivation::Tanh, OutputActivation::Identity)
                .unwrap();
        let mut p = init_network(&spec, 0).unwrap();
        let mut w = vec![0.0; d * d];
        for i in 0..d {
            w[i * d + i] = 1.0;
        }
        p.layers[0].weight = Tensor::matrix(d, d, w).unwrap();
        p
    }

    #[test]
    fn constant_critic_gives_zero_estimate_and_unit_penalty() {
        let f = identity(2);
        let d = linear(&[0.0, 0.0]);
        let s = Tensor::from_rows(&[[0.0, 1.0], [2.0, 3.0]]).unwrap();
        let t = Tensor::from_rows(&[[5.0, 1.0], [-2.0, 0.0], [1.0, 1.0]]).unwrap();
        assert_eq!(critic_w1_estimate(&f, &d, &s, &t).unwrap(), 0.0);
        assert_eq!(gradient_penalty(&f, &d, &s, &t, 3).unwrap(), 1.0);
    }

    #[test]
    fn identical_batches_give_zero_estimate() {
        let f = identity(2);
        let d = linear(&[0.7, -0.2]);
        let s = Tensor::from_rows(&[[0.0, 1.0], [2.0, 3.0]]).unwrap();
        assert_eq!(critic_w1_estimate(&f, &d, &s, &s).unwrap(), 0.0);
    }

    #[test]
    fn hand_computed_means() {
        // 1-D scores equal the inputs: source [1,3], target [0,2]
        let f = identity(1);
        let d = linear(&[1.0]);
        let s = Tensor::matrix(2, 1, vec![1.0, 3.0]).unwrap();
        let t = Tensor::matrix(2, 1, vec![0.0, 2.0]).unwrap();
        assert_eq!(critic_w1_estimate(&f, &d, &s, &t).unwrap(), 1.0);
    }

    #[test]
    fn unit_norm_linear_critic_has_no_penalty() {
        let f = identity(2);
        let d = linear(&[0.6, 0.8]);
        let s = Tensor::from_rows(&[[0.0, 1.0], [2.0, 3.0]]).unwrap();
        let t = Tensor::from_rows(&[[5.0, 1.0], [-2.0, 0.0]]).unwrap();
        assert!(gradient_penalty(&f, &d, &s, &t, 1).unwrap() < 1e-30);
    }

    #[test]
    fn interpolates_lie_on_segments_and_are_seeded() {
        let s = Tensor::from_rows(&[[0.0, 0.0], [1.0, 1.0], [9.0, 9.0]]).unwrap();
        let t = Tensor::from_rows(&[[2.0, 4.0], [1.0, 1.0]]).unwrap();
        let a = interpolate(&s, &t, 4).unwrap();
        assert_eq!(a, interpolate(&s, &t, 4).unwrap());
        assert_eq!(a.rows(), 2);
        assert!((a.row(0)[1] - 2.0 * a.row(0)[0]).abs() < 1e-12);
        assert_eq!(a.row(1), &[1.0, 1.0]);
    }

    #[test]
    fn empty_batches_are_rejected() {
        let f = identity(1);
        let d = linear(&[1.0]);
        let e = Tensor::zeros(&[0, 1]);
        let s = Tensor::matrix(1, 1, vec![1.0]).unwrap();
        assert!(critic_w1_estimate(&f, &d, &e, &s).is_err());
        assert!(gradient_penalty(&f, &d, &s, &e, 0).is_err());
    }
}

//! Reverse-mode automatic differentiation over small dense graphs.
//!
//! Gradients are emitted as new graph nodes rather than computed on a tape,
//! so a gradient can be fed back into further arithmetic and differentiated
//! again. The critic's gradient penalty relies on this.

mod graph;
mod tensor;

pub use graph::{Bindings, Graph, NodeId, Op, Values};
pub use tensor::Tensor;

pub(crate) use graph::{log_sum_exp, sigmoid};
pub(crate) use tensor::matmul;

use crate::error::{Error, Result};

/// Compares reverse-mode gradients against central finite differences.
///
/// Returns the largest `|ad - fd| / max(1e-12, |ad|, |fd|)` over the
/// coordinates of `leaf`, or `+inf` if any evaluation is non-finite.
pub fn finite_difference_check(
    graph: &Graph,
    target: NodeId,
    leaf: NodeId,
    bindings: &Bindings<'_>,
    step: f64,
) -> Result<f64> {
    if step <= 0.0 {
        return Err(Error::contract("finite difference step must be positive"));
    }
    let name = graph
        .leaf_name_of(leaf)
        .ok_or_else(|| Error::contract(format!("node {} is not a leaf", leaf.index())))?
        .to_string();
    let base = bindings
        .get(&name)
        .ok_or_else(|| Error::MissingBinding { name: name.clone() })?
        .clone();
    let analytic = graph.gradient(target, &[leaf], bindings)?.remove(0);
    if !analytic.all_finite() {
        return Ok(f64::INFINITY);
    }

    let mut worst = 0.0f64;
    let mut probe = bindings.clone();
    for k in 0..base.len() {
        let mut eval_at = |delta: f64| -> Result<f64> {
            let mut t = base.clone();
            t.data_mut()[k] += delta;
            probe.bind_owned(name.clone(), t);
            Ok(graph.forward_eval(&probe)?.scalar(target))
        };
        let hi = eval_at(step)?;
        let lo = eval_at(-step)?;
        let fd = (hi - lo) / (2.0 * step);
        let ad = analytic.data()[k];
        if !fd.is_finite() {
            return Ok(f64::INFINITY);
        }
        let rel = (ad - fd).abs() / 1e-12f64.max(ad.abs()).max(fd.abs());
        worst = worst.max(rel);
    }
    Ok(worst)
}

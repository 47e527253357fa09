use serde::{Deserialize, Serialize};

use super::exact_w1;
use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::nets::NetworkParams;

/// Empirical terms of the target-risk bound
/// `eps_T(h) <= eps_S(h) + 2 W1(D_S, D_T) + E_S|f_S - f_T|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub source_risk: f64,
    /// `2 * W1` between the labelled source and target samples.
    pub w1_term: f64,
    pub disagreement: f64,
    pub rhs: f64,
    pub target_risk: f64,
    pub holds: bool,
}

pub type Labeling<'a> = &'a dyn Fn(&[f64]) -> usize;

fn binary(f: Labeling<'_>, x: &[f64]) -> Result<f64> {
    match f(x) {
        0 => Ok(0.0),
        1 => Ok(1.0),
        other => Err(Error::contract(format!(
            "bound diagnostic needs binary labels, got {other}"
        ))),
    }
}

/// Joint sample rows `[x, f(x)]`.
fn with_labels(x: &Tensor, f: Labeling<'_>) -> Result<(Tensor, Vec<f64>)> {
    let mut labels = Vec::with_capacity(x.rows());
    let mut data = Vec::with_capacity(x.rows() * (x.cols() + 1));
    for row in x.row_iter() {
        let y = binary(f, row)?;
        data.extend_from_slice(row);
        data.push(y);
        labels.push(y);
    }
    Ok((Tensor::matrix(x.rows(), x.cols() + 1, data)?, labels))
}

/// Evaluates every term of the bound for hypothesis `h` on samples drawn
/// from the two domains.
///
/// `h` must have one output and a Lipschitz bound of at most 1; its output
/// is clipped to `[0, 1]` and the risk is `E|h(x) - f(x)|`, which is the 0-1
/// loss whenever `h` is binary. The W1 term is computed exactly between the
/// joint samples `(x, f(x))` under Euclidean cost.
pub fn bound_rhs(
    h: &NetworkParams,
    source: &Tensor,
    target: &Tensor,
    f_source: Option<Labeling<'_>>,
    f_target: Option<Labeling<'_>>,
) -> Result<BoundReport> {
    let (Some(f_s), Some(f_t)) = (f_source, f_target) else {
        return Err(Error::contract(
            "bound diagnostic needs both labeling functions (synthetic data only)",
        ));
    };
    if h.spec.output_width() != 1 {
        return Err(Error::contract("hypothesis must have a single output"));
    }
    let lip = h.lipschitz_upper_bound();
    if lip > 1.0 + 1e-9 {
        return Err(Error::contract(format!(
            "hypothesis Lipschitz bound {lip} exceeds 1; normalise it first"
        )));
    }

    let risk = |x: &Tensor, labels: &[f64]| -> Result<f64> {
        let out = h.forward(x)?;
        Ok(out
            .data()
            .iter()
            .zip(labels)
            .map(|(p, y)| (p.clamp(0.0, 1.0) - y).abs())
            .sum::<f64>()
            / labels.len() as f64)
    };

    let (joint_s, y_s) = with_labels(source, f_s)?;
    let (joint_t, y_t) = with_labels(target, f_t)?;
    let source_risk = risk(source, &y_s)?;
    let target_risk = risk(target, &y_t)?;
    let disagreement = source
        .row_iter()
        .map(|x| Ok((binary(f_s, x)? - binary(f_t, x)?).abs()))
        .sum::<Result<f64>>()?
        / source.rows() as f64;
    let (w1, _) = exact_w1(&joint_s, &joint_t)?;
    let w1_term = 2.0 * w1;
    let rhs = source_risk + w1_term + disagreement;
    Ok(BoundReport {
        source_risk,
        w1_term,
        disagreement,
        rhs,
        target_risk,
        holds: target_risk <= rhs + 1e-6,
    })
}

//! Differentiates a gradient: the penalty `(|d/dx tanh(x . w)| - 1)^2`
//! with respect to `w`, checked against central differences.

use acda::autodiff::{finite_difference_check, Bindings, Graph, Tensor};

fn main() -> acda::Result<()> {
    let mut g = Graph::new();
    let x = g.input("x", &[3, 2])?;
    let w = g.param("w", &[2, 1])?;
    let z = g.matmul(x, w)?;
    let s = g.tanh(z)?;
    let total = g.sum(s)?;
    let grad_x = g.input_gradient_node(total, x)?;
    let norms = g.row_norm(grad_x)?;
    let dev = g.affine(norms, 1.0, -1.0)?;
    let sq = g.square(dev)?;
    let penalty = g.mean(sq)?;

    let xv = Tensor::from_rows(&[[0.5, -1.0], [1.5, 0.2], [-0.3, 0.8]])?;
    let wv = Tensor::from_rows(&[[0.9], [-1.7]])?;
    let mut b = Bindings::new();
    b.bind("x", &xv).bind("w", &wv);

    let values = g.forward_eval(&b)?;
    println!("per-row input gradients: {:?}", values.get(grad_x).data());
    println!("penalty: {:.6}", values.scalar(penalty));
    let dw = g.gradient(penalty, &[w], &b)?.remove(0);
    println!("d penalty / d w: {:?}", dw.data());
    let err = finite_difference_check(&g, penalty, w, &b, 1e-5)?;
    println!("max relative error against central differences: {err:.2e}");
    Ok(())
}

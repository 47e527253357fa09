use proptest::prelude::*;

use acda::autodiff::{finite_difference_check, Bindings, Graph, Tensor};
use acda::Error;

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Tensor> {
    proptest::collection::vec(-2.0f64..2.0, rows * cols)
        .prop_map(move |d| Tensor::matrix(rows, cols, d).unwrap())
}

fn dims() -> impl Strategy<Value = (usize, usize)> {
    (1usize..5, 1usize..4)
}

#[test]
fn missing_binding_is_named() {
    let mut g = Graph::new();
    let x = g.input("x", &[2, 2]).unwrap();
    g.sum(x).unwrap();
    match g.forward_eval(&Bindings::new()) {
        Err(Error::MissingBinding { name }) => assert_eq!(name, "x"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn binding_shape_must_match_leaf() {
    let mut g = Graph::new();
    let x = g.input("x", &[2, 2]).unwrap();
    g.sum(x).unwrap();
    let wrong = Tensor::zeros(&[2, 3]);
    let mut b = Bindings::new();
    b.bind("x", &wrong);
    assert!(matches!(g.forward_eval(&b), Err(Error::Shape { .. })));
}

#[test]
fn incompatible_operands_are_shape_errors() {
    let mut g = Graph::new();
    let a = g.input("a", &[2, 3]).unwrap();
    let b = g.input("b", &[2, 3]).unwrap();
    assert!(matches!(g.matmul(a, b), Err(Error::Shape { .. })));
    let c = g.input("c", &[3, 2]).unwrap();
    assert!(matches!(g.add(a, c), Err(Error::Shape { .. })));
    assert!(g.input("a", &[1]).is_err());
}

#[test]
fn relu_on_a_double_backprop_path_is_flagged() {
    let mut g = Graph::new();
    let x = g.input("x", &[2, 1]).unwrap();
    let r = g.relu(x).unwrap();
    let s = g.sum(r).unwrap();
    assert!(g.warnings().is_empty());
    g.input_gradient_node(s, x).unwrap();
    assert_eq!(g.warnings().len(), 1);
}

#[test]
fn log_sum_exp_is_stable_for_large_inputs() {
    let mut g = Graph::new();
    let x = g.input("x", &[1, 3]).unwrap();
    let l = g.row_logsumexp(x).unwrap();
    let v = Tensor::matrix(1, 3, vec![1000.0, 1000.0, 1000.0]).unwrap();
    let mut b = Bindings::new();
    b.bind("x", &v);
    let got = g.forward_eval(&b).unwrap().get(l).data()[0];
    assert!((got - (1000.0 + 3f64.ln())).abs() < 1e-9);
}

proptest! {
    #[test]
    fn square_mean_gradient_is_scaled_input((n, d) in dims(), xv in matrix(4, 3)) {
        let mut g = Graph::new();
        let x = g.param("x", &[n, d]).unwrap();
        let sq = g.square(x).unwrap();
        let m = g.mean(sq).unwrap();
        let v = Tensor::matrix(n, d, xv.data()[..n * d].to_vec()).unwrap();
        let mut b = Bindings::new();
        b.bind("x", &v);
        let grad = g.gradient(m, &[x], &b).unwrap().remove(0);
        for (gi, xi) in grad.data().iter().zip(v.data()) {
            prop_assert!((gi - 2.0 * xi / (n * d) as f64).abs() < 1e-14);
        }
    }

    #[test]
    fn composite_gradients_match_differences(
        (n, d) in dims(),
        xv in matrix(4, 3),
        wv in matrix(3, 2),
    ) {
        // sum(tanh(xW) * sigmoid(xW)) + logsumexp rows, on a slice of the samples
        let x_data = xv.select_rows(&(0..n).collect::<Vec<_>>());
        let x_data = Tensor::matrix(n, d, x_data.row_iter().flat_map(|r| r[..d].to_vec()).collect()).unwrap();
        let w_data = Tensor::matrix(d, 2, wv.data()[..d * 2].to_vec()).unwrap();
        let mut g = Graph::new();
        let x = g.input("x", &[n, d]).unwrap();
        let w = g.param("w", &[d, 2]).unwrap();
        let z = g.matmul(x, w).unwrap();
        let t = g.tanh(z).unwrap();
        let s = g.sigmoid(z).unwrap();
        let p = g.mul(t, s).unwrap();
        let ps = g.sum(p).unwrap();
        let l = g.row_logsumexp(z).unwrap();
        let ls = g.mean(l).unwrap();
        let out = g.add(ps, ls).unwrap();
        let mut b = Bindings::new();
        b.bind("x", &x_data).bind("w", &w_data);
        prop_assert!(finite_difference_check(&g, out, w, &b, 1e-5).unwrap() < 1e-5);
        prop_assert!(finite_difference_check(&g, out, x, &b, 1e-5).unwrap() < 1e-5);
    }

    #[test]
    fn input_gradient_matches_closed_form(xv in matrix(3, 2), wv in matrix(2, 1)) {
        // s_i = tanh(x_i . w); d sum / d x_i = (1 - s_i^2) w
        let mut g = Graph::new();
        let x = g.input("x", &[3, 2]).unwrap();
        let w = g.param("w", &[2, 1]).unwrap();
        let z = g.matmul(x, w).unwrap();
        let s = g.tanh(z).unwrap();
        let total = g.sum(s).unwrap();
        let grad = g.input_gradient_node(total, x).unwrap();
        let norms = g.row_norm(grad).unwrap();
        let dev = g.affine(norms, 1.0, -1.0).unwrap();
        let sq = g.square(dev).unwrap();
        let pen = g.mean(sq).unwrap();
        let mut b = Bindings::new();
        b.bind("x", &xv).bind("w", &wv);
        let vals = g.forward_eval(&b).unwrap();
        for i in 0..3 {
            let zi: f64 = xv.row(i).iter().zip(wv.data()).map(|(a, b)| a * b).sum();
            let k = 1.0 - zi.tanh().powi(2);
            for j in 0..2 {
                prop_assert!((vals.get(grad).row(i)[j] - k * wv.data()[j]).abs() < 1e-14);
            }
        }
        // second order: the penalty's gradient with respect to w
        prop_assert!(finite_difference_check(&g, pen, w, &b, 1e-5).unwrap() < 1e-4);
    }

    #[test]
    fn gradients_are_linear(xv in matrix(2, 3), a in -3.0f64..3.0, c in -3.0f64..3.0) {
        let mut g = Graph::new();
        let x = g.param("x", &[2, 3]).unwrap();
        let t = g.tanh(x).unwrap();
        let f = g.sum(t).unwrap();
        let sq = g.square(x).unwrap();
        let h = g.sum(sq).unwrap();
        let fa = g.scale(f, a).unwrap();
        let hc = g.scale(h, c).unwrap();
        let comb = g.add(fa, hc).unwrap();
        let mut b = Bindings::new();
        b.bind("x", &xv);
        let gs = g.gradient(comb, &[x], &b).unwrap().remove(0);
        let gf = g.gradient(f, &[x], &b).unwrap().remove(0);
        let gh = g.gradient(h, &[x], &b).unwrap().remove(0);
        for k in 0..6 {
            let expect = a * gf.data()[k] + c * gh.data()[k];
            prop_assert!((gs.data()[k] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn slicing_and_concatenation_round_trip(xv in matrix(4, 2), yv in matrix(3, 2)) {
        let mut g = Graph::new();
        let x = g.input("x", &[4, 2]).unwrap();
        let y = g.input("y", &[3, 2]).unwrap();
        let c = g.concat_rows(x, y).unwrap();
        let back = g.slice_rows(c, 4, 7).unwrap();
        let mut b = Bindings::new();
        b.bind("x", &xv).bind("y", &yv);
        let vals = g.forward_eval(&b).unwrap();
        prop_assert_eq!(vals.get(back), &yv);
    }
}

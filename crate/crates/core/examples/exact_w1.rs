//! Exact Wasserstein-1 distance between two point clouds, including an
//! unequal-size pair solved as a transportation problem.

use acda::autodiff::Tensor;
use acda::transport::exact_w1;

fn main() -> acda::Result<()> {
    let a = Tensor::from_rows(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])?;
    let b = Tensor::from_rows(&[[3.0, 0.0], [4.0, 0.0], [3.0, 1.0]])?;
    let (w, plan) = exact_w1(&a, &b)?;
    println!("translated copy: W1 = {w:.6} (shift length 3)");
    for i in 0..plan.rows {
        let row: Vec<String> = (0..plan.cols).map(|j| format!("{:.3}", plan.at(i, j))).collect();
        println!("  {}", row.join(" "));
    }

    let c = Tensor::from_rows(&[[0.0, 0.0], [2.0, 0.0]])?;
    let (w, plan) = exact_w1(&a, &c)?;
    println!("3 vs 2 points: W1 = {w:.6}, marginal error {:.1e}", plan.marginal_error());
    Ok(())
}

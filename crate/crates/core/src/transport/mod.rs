//! Wasserstein-1 machinery: an exact solver for small empirical measures,
//! the critic-based estimate and its gradient penalty, and the target-risk
//! bound diagnostic.

mod assignment;
mod bound;
mod critic;
mod flow;

pub use assignment::solve_assignment;
pub use bound::{bound_rhs, BoundReport};
pub use critic::{
    build_critic_graph, critic_w1_estimate, gradient_penalty, interpolate, CriticGraph,
};
pub use flow::solve_transportation;

use serde::Serialize;

use crate::autodiff::Tensor;
use crate::error::{Error, Result};

/// Largest point set the exact solver accepts.
pub const MAX_EXACT_POINTS: usize = 512;

/// An optimal coupling between two uniform empirical measures.
#[derive(Debug, Clone, Serialize)]
pub struct TransportPlan {
    /// Row-major `m x n` coupling.
    pub coupling: Vec<f64>,
    pub rows: usize,
    pub cols: usize,
    pub row_marginal: Vec<f64>,
    pub col_marginal: Vec<f64>,
    /// Row-major `m x n` Euclidean pairing costs.
    pub cost: Vec<f64>,
}

impl TransportPlan {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.coupling[i * self.cols + j]
    }

    pub fn total_cost(&self) -> f64 {
        self.coupling
            .iter()
            .zip(&self.cost)
            .map(|(g, c)| g * c)
            .sum()
    }

    /// Largest deviation of the coupling's row and column sums from the
    /// marginals.
    pub fn marginal_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            let s: f64 = self.coupling[i * self.cols..(i + 1) * self.cols].iter().sum();
            worst = worst.max((s - self.row_marginal[i]).abs());
        }
        for j in 0..self.cols {
            let s: f64 = (0..self.rows).map(|i| self.at(i, j)).sum();
            worst = worst.max((s - self.col_marginal[j]).abs());
        }
        worst
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Exact W1 between the uniform empirical measures on the rows of `a` and
/// `b` under Euclidean ground cost.
///
/// Equal sizes are solved as an assignment problem; unequal sizes as a
/// transportation problem with integer masses `n/g` and `m/g`.
pub fn exact_w1(a: &Tensor, b: &Tensor) -> Result<(f64, TransportPlan)> {
    let (m, n) = (a.rows(), b.rows());
    if a.is_empty() || b.is_empty() || m == 0 || n == 0 {
        return Err(Error::contract("exact_w1 needs two non-empty point sets"));
    }
    if a.cols() != b.cols() {
        return Err(Error::contract(format!(
            "point dimensions differ: {} vs {}",
            a.cols(),
            b.cols()
        )));
    }
    if m > MAX_EXACT_POINTS || n > MAX_EXACT_POINTS {
        return Err(Error::Capacity(format!(
            "exact solver handles at most {MAX_EXACT_POINTS} points per set, got {m} and {n}"
        )));
    }
    let mut cost = Vec::with_capacity(m * n);
    for i in 0..m {
        for j in 0..n {
            cost.push(euclidean(a.row(i), b.row(j)));
        }
    }
    let mut coupling = vec![0.0; m * n];
    if m == n {
        let perm = solve_assignment(&cost, n);
        for (i, &j) in perm.iter().enumerate() {
            coupling[i * n + j] = 1.0 / n as f64;
        }
    } else {
        let g = gcd(m, n);
        let supply = vec![(n / g) as i64; m];
        let demand = vec![(m / g) as i64; n];
        let mass = (m * n / g) as f64;
        let x = solve_transportation(&supply, &demand, &cost);
        for (c, f) in coupling.iter_mut().zip(x) {
            *c = f as f64 / mass;
        }
    }
    let plan = TransportPlan {
        coupling,
        rows: m,
        cols: n,
        row_marginal: vec![1.0 / m as f64; m],
        col_marginal: vec![1.0 / n as f64; n],
        cost,
    };
    Ok((plan.total_cost(), plan))
}

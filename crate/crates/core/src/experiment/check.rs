//! Quick self-checks behind the `check` subcommand.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::acda::{
    budget_count, combine_scores, lambda_w, select_queries, uncertainty_weights,
    DiversityNormalization, QuerySign,
};
use crate::autodiff::{finite_difference_check, Bindings, Graph, Tensor};
use crate::data::{gen_two_moons_pair, MoonsSpec};
use crate::error::Result;
use crate::nets::{init_network, predictive_entropy, HiddenActivation, NetworkSpec, OutputActivation};
use crate::transport::{bound_rhs, euclidean, exact_w1, gradient_penalty};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn random_points(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Tensor {
    let data = (0..n * d).map(|_| rng.random_range(-2.0..2.0)).collect();
    Tensor::matrix(n, d, data).expect("shape matches data")
}

fn permutations_min(cost: &[f64], n: usize, row: usize, used: &mut [bool]) -> f64 {
    if row == n {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    for j in 0..n {
        if !used[j] {
            used[j] = true;
            best = best.min(cost[row * n + j] + permutations_min(cost, n, row + 1, used));
            used[j] = false;
        }
    }
    best
}

fn gradients(rng: &mut ChaCha8Rng) -> Result<CheckResult> {
    let mut worst = 0.0f64;
    for case in 0..10u64 {
        let d = rng.random_range(1..4);
        let spec = NetworkSpec::new(
            vec![d, rng.random_range(1..5), 1],
            HiddenActivation::Tanh,
            OutputActivation::Identity,
        )?;
        let net = init_network(&spec, case)?;
        let x = random_points(rng, 3, d);
        let mut g = Graph::new();
        let xi = g.input("x", &[3, d])?;
        let h = net.bind_graph(&mut g, "n")?;
        let out = h.output(&mut g, xi)?;
        let sq = g.square(out)?;
        let loss = g.mean(sq)?;
        let mut b = Bindings::new();
        b.bind("x", &x);
        net.bind_values("n", &mut b);
        for id in h.param_ids() {
            worst = worst.max(finite_difference_check(&g, loss, id, &b, 1e-5)?);
        }
    }
    Ok(CheckResult {
        name: "autodiff matches central differences",
        passed: worst < 1e-4,
        detail: format!("max relative error {worst:.2e}"),
    })
}

fn transport(rng: &mut ChaCha8Rng) -> Result<CheckResult> {
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let n = rng.random_range(1..6);
        let a = random_points(rng, n, 2);
        let b = random_points(rng, n, 2);
        let cost: Vec<f64> = (0..n * n)
            .map(|k| euclidean(a.row(k / n), b.row(k % n)))
            .collect();
        let brute = permutations_min(&cost, n, 0, &mut vec![false; n]) / n as f64;
        worst = worst.max((exact_w1(&a, &b)?.0 - brute).abs());
    }
    Ok(CheckResult {
        name: "exact W1 equals brute-force assignment",
        passed: worst < 1e-9,
        detail: format!("max deviation {worst:.2e}"),
    })
}

fn penalty(rng: &mut ChaCha8Rng) -> Result<CheckResult> {
    let f = NetworkSpec::new(vec![2, 4, 3], HiddenActivation::Tanh, OutputActivation::Identity)?;
    let d = NetworkSpec::new(vec![3, 4, 1], HiddenActivation::Tanh, OutputActivation::Identity)?;
    let (f, d) = (init_network(&f, 1)?, init_network(&d, 2)?);
    let s = random_points(rng, 8, 2);
    let t = random_points(rng, 8, 2);
    let p = gradient_penalty(&f, &d, &s, &t, 3)?;
    Ok(CheckResult {
        name: "gradient penalty is finite and non-negative",
        passed: p.is_finite() && p >= 0.0,
        detail: format!("penalty {p:.4}"),
    })
}

fn schedule() -> CheckResult {
    let grid: Vec<f64> = (0..100).map(|i| lambda_w(i as f64 / 99.0, 10.0)).collect();
    let ok = grid[0] == 0.0
        && (grid[99] - 0.999909).abs() < 1e-6
        && grid.windows(2).all(|w| w[1] > w[0]);
    CheckResult {
        name: "lambda_w schedule",
        passed: ok,
        detail: format!("lambda_w(1) = {:.6}", grid[99]),
    }
}

fn queries(rng: &mut ChaCha8Rng) -> Result<CheckResult> {
    let mut ok = true;
    for _ in 0..100 {
        let n = rng.random_range(1..40);
        let u: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let c: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let beta = rng.random_range(0.01..0.99);
        let r = combine_scores(
            u.clone(),
            &c,
            0.0,
            DiversityNormalization::Minmax,
            QuerySign::AsWritten,
        )?;
        let got = select_queries(&r, n, beta)?;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| u[b].partial_cmp(&u[a]).expect("finite").then(a.cmp(&b)));
        ok &= got == order[..budget_count(n, beta)];
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
        let w = uncertainty_weights(&labels, &u, 3)?;
        ok &= (w.alpha.iter().sum::<f64>() - 1.0).abs() < 1e-9;
    }
    let uniform = predictive_entropy(&[0.25; 4]);
    ok &= (uniform - 4f64.ln()).abs() < 1e-12 && predictive_entropy(&[0.0, 1.0]) == 0.0;
    Ok(CheckResult {
        name: "query ranking, weights and entropy identities",
        passed: ok,
        detail: "100 random pools".into(),
    })
}

fn bound() -> Result<CheckResult> {
    let spec = NetworkSpec::new(vec![2, 8, 1], HiddenActivation::Tanh, OutputActivation::Sigmoid)?;
    let mut all = true;
    let mut tightest = f64::INFINITY;
    for seed in 0..5 {
        let pair = gen_two_moons_pair(&MoonsSpec {
            n_source: 60,
            n_target: 50,
            rotation_deg: 30.0 * seed as f64,
            noise_sd: 0.1,
            label_flip_rate: 0.1,
            seed,
        })?;
        let h = init_network(&spec, seed)?.lipschitz_normalized();
        let (fs, ft) = (
            pair.f_source().expect("synthetic"),
            pair.f_target().expect("synthetic"),
        );
        let r = bound_rhs(
            &h,
            &pair.source.features,
            &pair.target.features,
            Some(&|x: &[f64]| fs.label(x)),
            Some(&|x: &[f64]| ft.label(x)),
        )?;
        all &= r.holds;
        tightest = tightest.min(r.rhs - r.target_risk);
    }
    Ok(CheckResult {
        name: "target risk bound holds",
        passed: all,
        detail: format!("smallest slack {tightest:.4}"),
    })
}

/// Runs every diagnostic; errors inside a check count as failures.
pub fn run_checks() -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut out = Vec::new();
    let mut push = |name: &'static str, r: Result<CheckResult>| {
        out.push(r.unwrap_or_else(|e| CheckResult {
            name,
            passed: false,
            detail: e.to_string(),
        }))
    };
    push("gradients", gradients(&mut rng));
    push("transport", transport(&mut rng));
    push("penalty", penalty(&mut rng));
    push("schedule", Ok(schedule()));
    push("queries", queries(&mut rng));
    push("bound", bound());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass() {
        for r in run_checks() {
            assert!(r.passed, "{}: {}", r.name, r.detail);
        }
    }
}

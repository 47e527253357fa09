//! Trains a gradient-penalised critic on two fixed clouds and compares its
//! dual estimate with the exact distance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use acda::autodiff::Tensor;
use acda::nets::{init_network, HiddenActivation, NetworkSpec, OutputActivation};
use acda::optim::Adam;
use acda::transport::{build_critic_graph, critic_w1_estimate, exact_w1, interpolate};

fn cloud(rng: &mut ChaCha8Rng, cx: f64, cy: f64) -> acda::Result<Tensor> {
    let data = (0..64)
        .flat_map(|_| [cx + rng.random_range(-1.0..1.0), cy + rng.random_range(-1.0..1.0)])
        .collect();
    Tensor::matrix(64, 2, data)
}

fn main() -> acda::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let s = cloud(&mut rng, 0.0, 0.0)?;
    let t = cloud(&mut rng, 1.0, 0.5)?;
    let exact = exact_w1(&s, &t)?.0;

    // identity feature map, so the critic sees raw coordinates
    let fspec = NetworkSpec::new(vec![2, 2], HiddenActivation::Tanh, OutputActivation::Identity)?;
    let mut feature = init_network(&fspec, 0)?;
    feature.layers[0].weight = Tensor::from_rows(&[[1.0, 0.0], [0.0, 1.0]])?;
    let dspec = NetworkSpec::new(vec![2, 32, 1], HiddenActivation::Tanh, OutputActivation::Identity)?;
    let mut critic = init_network(&dspec, 1)?;

    let mut cg = build_critic_graph(&feature, &critic, 64, 64)?;
    let scaled = cg.graph.scale(cg.penalty, 10.0)?;
    let gap = cg.graph.sub(cg.w1, scaled)?;
    let objective = cg.graph.neg(gap)?;
    let grads = cg.graph.gradient_nodes(objective, &cg.critic.param_ids())?;
    let mut adam = Adam::new(1e-3, 0.5, 0.9);
    for step in 0..2000u64 {
        let xhat = interpolate(&s, &t, step)?;
        let v = cg.graph.forward_eval(&cg.bindings(&feature, &critic, &s, &t, &xhat))?;
        let g: Vec<Tensor> = grads.iter().map(|&id| v.get(id).clone()).collect();
        adam.step(critic.tensors_mut(), &g);
        if step % 400 == 399 {
            let est = critic_w1_estimate(&feature, &critic, &s, &t)?;
            println!("step {:>4}: estimate {est:.4}, penalty {:.4}", step + 1, v.scalar(cg.penalty));
        }
    }
    let est = critic_w1_estimate(&feature, &critic, &s, &t)?;
    println!("exact {exact:.4}, critic {est:.4}, ratio {:.3}", est / exact);
    Ok(())
}

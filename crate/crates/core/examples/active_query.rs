//! One query round by hand: stage-1 training, scores for every target
//! instance, the selected batch and its class weights.

use acda::acda::{
    prepare_pair, query_scores, run_stage1, select_queries, uncertainty_weights, TrainConfig,
};
use acda::data::{gen_two_moons_pair, MoonsSpec};

fn main() -> acda::Result<()> {
    let pair = gen_two_moons_pair(&MoonsSpec {
        n_source: 400,
        n_target: 400,
        rotation_deg: 40.0,
        noise_sd: 0.1,
        label_flip_rate: 0.1,
        seed: 2,
    })?;
    let cfg = TrainConfig {
        budget: 0.05,
        lambda_div: 1.0,
        stage1_epochs: 15,
        ..TrainConfig::default()
    };
    let (prepared, _) = prepare_pair(&pair, &cfg)?;
    let stage1 = run_stage1(&prepared, &cfg)?;
    let scores = query_scores(&stage1.nets, &prepared.target.features, &cfg)?;
    let picked = select_queries(&scores, prepared.target.len(), cfg.budget)?;
    println!("{:>5} {:>8} {:>8} {:>8} {:>6}", "row", "entropy", "div", "score", "label");
    let labels = prepared.oracle_labels(&picked);
    for (&p, y) in picked.iter().zip(&labels) {
        println!(
            "{p:>5} {:>8.4} {:>8.4} {:>8.4} {y:>6}",
            scores.uncertainty[p], scores.diversity[p], scores.combined[p]
        );
    }
    let ent: Vec<f64> = picked.iter().map(|&p| scores.uncertainty[p]).collect();
    let w = uncertainty_weights(&labels, &ent, prepared.num_classes())?;
    println!("class counts {:?}, weights {:?}", w.counts, w.alpha);
    Ok(())
}

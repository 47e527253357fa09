//! The full algorithm on rotated two moons for each query strategy, with
//! per-round accuracy.

use acda::acda::{prepare_pair, run_from_stage1, run_stage1, Strategy, TrainConfig};
use acda::data::{gen_two_moons_pair, MoonsSpec};

fn main() -> acda::Result<()> {
    let seed = std::env::args().nth(1).map_or(Ok(1), |s| s.parse()).expect("seed must be an integer");
    let pair = gen_two_moons_pair(&MoonsSpec {
        n_source: 1000,
        n_target: 1000,
        rotation_deg: 40.0,
        noise_sd: 0.1,
        label_flip_rate: 0.1,
        seed,
    })?;
    let cfg = TrainConfig {
        budget: 0.05,
        lambda_div: 1.0,
        query_rounds: 10,
        stage1_epochs: 40,
        stage3_epochs: 5,
        early_stop: false,
        seed,
        ..TrainConfig::default()
    };
    let (prepared, standardizer) = prepare_pair(&pair, &cfg)?;
    let stage1 = run_stage1(&prepared, &cfg)?;
    for strategy in [Strategy::Active, Strategy::Random, Strategy::None] {
        let cfg = TrainConfig { strategy, ..cfg.clone() };
        let run = run_from_stage1(&prepared, &standardizer, &cfg, &stage1)?;
        let per_round: Vec<String> = run
            .record
            .rounds
            .iter()
            .filter_map(|r| r.history.last()?.target_accuracy)
            .map(|a| format!("{a:.3}"))
            .collect();
        let m = &run.record.final_metrics;
        println!(
            "{:<6} stage1 {:.3} -> final {:.3} ({} queried)  rounds: {}",
            strategy.as_str(),
            m.stage1_target_accuracy,
            m.target_accuracy,
            m.queried,
            per_round.join(" ")
        );
    }
    Ok(())
}

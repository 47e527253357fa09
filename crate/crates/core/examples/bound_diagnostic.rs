//! Evaluates the target-risk bound for a 1-Lipschitz hypothesis on rotated
//! two-moons pairs of increasing rotation.

use acda::data::{gen_two_moons_pair, MoonsSpec};
use acda::nets::{init_network, HiddenActivation, NetworkSpec, OutputActivation};
use acda::transport::bound_rhs;

fn main() -> acda::Result<()> {
    let spec = NetworkSpec::new(vec![2, 8, 1], HiddenActivation::Tanh, OutputActivation::Sigmoid)?;
    let h = init_network(&spec, 3)?.lipschitz_normalized();
    println!("Lipschitz bound of h: {:.3}", h.lipschitz_upper_bound());
    println!("{:>8} {:>8} {:>8} {:>8} {:>8} {:>8}", "rot", "eps_T", "eps_S", "2 W1", "disagree", "rhs");
    for rot in [0.0, 20.0, 40.0, 60.0, 90.0] {
        let pair = gen_two_moons_pair(&MoonsSpec {
            n_source: 300,
            n_target: 300,
            rotation_deg: rot,
            noise_sd: 0.1,
            label_flip_rate: 0.1,
            seed: 1,
        })?;
        let (fs, ft) = (pair.f_source().unwrap(), pair.f_target().unwrap());
        let r = bound_rhs(
            &h,
            &pair.source.features,
            &pair.target.features,
            Some(&|x: &[f64]| fs.label(x)),
            Some(&|x: &[f64]| ft.label(x)),
        )?;
        println!(
            "{rot:>8.0} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4}  holds {}",
            r.target_risk, r.source_risk, r.w1_term, r.disagreement, r.rhs, r.holds
        );
    }
    Ok(())
}

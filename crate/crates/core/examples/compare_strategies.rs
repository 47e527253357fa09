//! Strategy comparison over several seeds from a config file, writing the
//! summary tables under an output directory.

use std::path::PathBuf;

use acda::acda::Strategy;
use acda::experiment::{compare_strategies, parse_config};

fn main() -> acda::Result<()> {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let config = std::env::args()
        .nth(1)
        .map_or_else(|| manifest.join("configs/quick.cfg"), PathBuf::from);
    let cfg = parse_config(&config)?;
    let out = std::env::temp_dir().join("acda-compare-example");
    let strategies = [Strategy::Active, Strategy::Random, Strategy::None];
    let seeds: Vec<u64> = (1..=3).collect();
    let cmp = compare_strategies(&cfg, &strategies, &seeds, &out)?;
    print!("{cmp}");
    println!("tables in {}", out.display());
    Ok(())
}

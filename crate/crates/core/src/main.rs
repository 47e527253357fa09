use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use acda::acda::Strategy;
use acda::data::write_pair_csv;
use acda::experiment::{
    compare_strategies, parse_config, parse_seeds, parse_strategies, resolve_out, run_checks,
    run_experiment, ExperimentConfig,
};

#[derive(Parser)]
#[command(name = "acda", version, about = "Active discriminative domain adaptation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Overrides {
    #[arg(long)]
    budget: Option<f64>,
    #[arg(long = "lambda-div")]
    lambda_div: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    strategy: Option<Strategy>,
    /// Output root; falls back to $ACDA_OUT, then the config's `out`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured strategy once per seed.
    Run {
        config: PathBuf,
        #[command(flatten)]
        flags: Overrides,
    },
    /// Compare strategies over a list of seeds.
    Compare {
        config: PathBuf,
        #[arg(long, value_parser = parse_strategies)]
        strategies: Option<::std::vec::Vec<Strategy>>,
        /// `1..20` or `1,2,3`.
        #[arg(long, value_parser = parse_seeds)]
        seeds: Option<::std::vec::Vec<u64>>,
        #[command(flatten)]
        flags: Overrides,
    },
    /// Write the configured dataset pair as CSV.
    Gen {
        config: PathBuf,
        #[command(flatten)]
        flags: Overrides,
    },
    /// Run the built-in diagnostics.
    Check,
}

fn load(config: &PathBuf, flags: &Overrides) -> acda::Result<(ExperimentConfig, PathBuf)> {
    let mut cfg = parse_config(config)?;
    if let Some(b) = flags.budget {
        cfg.train.budget = b;
    }
    if let Some(l) = flags.lambda_div {
        cfg.train.lambda_div = l;
    }
    if let Some(s) = flags.seed {
        cfg.train.seed = s;
        cfg.seeds = vec![s];
    }
    if let Some(s) = flags.strategy {
        cfg.train.strategy = s;
    }
    cfg.train.validate()?;
    let out = resolve_out(flags.out.as_deref(), &cfg);
    Ok((cfg, out))
}

fn execute(cli: Cli) -> acda::Result<bool> {
    match cli.command {
        Command::Run { config, flags } => {
            let (cfg, out) = load(&config, &flags)?;
            let outcome = run_experiment(&cfg, &out)?;
            for r in &outcome.records {
                println!(
                    "seed {:>4}  {:<6}  target accuracy {:.4}  (stage 1 {:.4})",
                    r.config.seed,
                    r.config.strategy.as_str(),
                    r.final_metrics.target_accuracy,
                    r.final_metrics.stage1_target_accuracy
                );
            }
            println!("wrote {}", out.display());
        }
        Command::Compare {
            config,
            strategies,
            seeds,
            flags,
        } => {
            let (cfg, out) = load(&config, &flags)?;
            let strategies = strategies.unwrap_or_else(|| cfg.strategies.clone());
            let seeds = seeds.unwrap_or_else(|| cfg.run_seeds());
            let table = compare_strategies(&cfg, &strategies, &seeds, &out)?;
            print!("{table}");
            println!("wrote {}", out.display());
        }
        Command::Gen { config, flags } => {
            let (cfg, out) = load(&config, &flags)?;
            std::fs::create_dir_all(&out)?;
            let pair = cfg.dataset.build(cfg.train.seed)?;
            let path = out.join("dataset.csv");
            write_pair_csv(BufWriter::new(File::create(&path)?), &pair)?;
            println!("wrote {}", path.display());
        }
        Command::Check => {
            let results = run_checks();
            for r in &results {
                let mark = if r.passed { "PASS" } else { "FAIL" };
                println!("{mark}  {}  ({})", r.name, r.detail);
            }
            return Ok(results.iter().all(|r| r.passed));
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

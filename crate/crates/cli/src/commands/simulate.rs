use std::path::PathBuf;

use nonlocal::experiments::{simulate_dataset, ExperimentConfig};
use nonlocal::numerics::make_stream;
use nonlocal::ModelIndex;
use serde::Serialize;

use crate::args::SimulateArgs;
use crate::error::{Failure, Outcome};
use crate::output::{dataset_csv, to_json, with_extension, write_atomic};
use crate::settings::{experiment_config, resolve_family};

#[derive(Debug, Serialize)]
struct SimulateConfig {
    command: &'static str,
    out: PathBuf,
    n: usize,
    seed: u64,
    experiment: ExperimentConfig,
}

#[derive(Debug, Serialize)]
struct Truth {
    support: ModelIndex,
    beta0: Vec<f64>,
    seed: u64,
    config: SimulateConfig,
}

pub fn run(args: &SimulateArgs) -> Outcome<()> {
    let family = resolve_family(&args.family)?;
    if args.n < 2 {
        return Err(Failure::Config("--n must be at least 2".into()));
    }
    let mut cfg = experiment_config(&args.design, family, vec![args.n])?;
    cfg.seed = args.seed;
    cfg.replications = 1;
    cfg.validate()?;
    let (data, beta0) = simulate_dataset(&cfg, args.n, &make_stream(args.seed))?;
    let y: Vec<f64> = data.y().iter().copied().collect();
    write_atomic(&args.out, dataset_csv(&y, data.x())?.as_bytes())?;
    let truth = Truth {
        support: cfg.support.clone(),
        beta0: beta0.iter().copied().collect(),
        seed: args.seed,
        config: SimulateConfig {
            command: "simulate",
            out: args.out.clone(),
            n: args.n,
            seed: args.seed,
            experiment: cfg,
        },
    };
    let json = to_json(&truth)?;
    write_atomic(&with_extension(&args.out, ".truth.json"), json.as_bytes())?;
    print!("{json}");
    Ok(())
}

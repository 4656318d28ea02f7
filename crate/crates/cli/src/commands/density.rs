use std::io::Write;
use std::path::PathBuf;

use serde::Serialize;

use crate::args::DensityArgs;
use crate::error::{Failure, Outcome};
use crate::output::{emit, format_float, to_json, CsvTable};
use crate::settings::{resolve_prior, PriorEcho};

const VERIFY_TOL: f64 = 1e-9;

#[derive(Debug, Serialize)]
struct DensityConfig {
    command: &'static str,
    prior: PriorEcho,
    lo: f64,
    hi: f64,
    points: usize,
    verify: bool,
    out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct DensitySummary {
    config: DensityConfig,
    integral: Option<f64>,
}

pub fn run(args: &DensityArgs) -> Outcome<()> {
    let prior = resolve_prior(&args.prior)?;
    if !(args.lo.is_finite() && args.hi.is_finite() && args.lo < args.hi) {
        return Err(Failure::Config(format!(
            "grid needs finite --lo < --hi, got [{}, {}]",
            args.lo, args.hi
        )));
    }
    if args.points < 2 {
        return Err(Failure::Config("--points must be at least 2".into()));
    }
    let mut table = CsvTable::new(&["beta", "density"])?;
    let span = args.hi - args.lo;
    let last = (args.points - 1) as f64;
    for i in 0..args.points {
        let b = args.lo + span * i as f64 / last;
        table.row([format_float(b), format_float(prior.prior.density_1d(b))])?;
    }
    let integral = if args.verify {
        Some(prior.prior.normalization_integral(VERIFY_TOL)?)
    } else {
        None
    };
    emit(args.out.as_deref(), &table.finish()?)?;
    let summary = DensitySummary {
        config: DensityConfig {
            command: "density",
            prior,
            lo: args.lo,
            hi: args.hi,
            points: args.points,
            verify: args.verify,
            out: args.out.clone(),
        },
        integral,
    };
    if args.out.is_some() {
        print!("{}", to_json(&summary)?);
    } else if let Some(v) = integral {
        // stdout carries the CSV
        writeln!(std::io::stderr(), "integral {v:.12}")?;
    }
    Ok(())
}

use nonlocal::experiments::{default_lambda, DesignRule, ExperimentConfig, SignalRule};
use nonlocal::{Family, ModelIndex, NonlocalPrior, PriorKind};
use serde::Serialize;

use crate::args::{DesignOpts, FamilyOpts, PriorOpts};
use crate::error::{Failure, Outcome};

fn config_err(msg: impl Into<String>) -> Failure {
    Failure::Config(msg.into())
}

fn positive(name: &str, v: f64) -> Outcome<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(config_err(format!("--{name} must be positive, got {v}")))
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct FamilyEcho {
    pub family: Family,
    pub sigma2: f64,
}

pub fn resolve_family(opts: &FamilyOpts) -> Outcome<FamilyEcho> {
    let family: Family = opts.family.into();
    let sigma2 = match (family, opts.sigma2) {
        (Family::Gaussian, Some(s)) => positive("sigma2", s)?,
        (Family::Gaussian, None) => 1.0,
        (f, Some(_)) => {
            return Err(config_err(format!("--sigma2 applies to the gaussian family only, not {}", f.name())))
        }
        (_, None) => 1.0,
    };
    Ok(FamilyEcho { family, sigma2 })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PriorEcho {
    #[serde(flatten)]
    pub prior: NonlocalPrior,
    /// Effect-size floor the scale was derived from, if any.
    pub delta: Option<f64>,
}

pub fn resolve_prior(opts: &PriorOpts) -> Outcome<PriorEcho> {
    let kind: PriorKind = opts.prior.into();
    let r = positive("r", opts.r)?;
    let scale = match kind {
        PriorKind::Pimom => {
            if opts.lambda.is_some() || opts.delta.is_some() {
                return Err(config_err("--lambda and --delta apply to spimom only; use --tau with pimom"));
            }
            if opts.paper_constant {
                return Err(config_err("--paper-constant applies to spimom only"));
            }
            positive("tau", opts.tau.unwrap_or(1.0))?
        }
        PriorKind::Spimom => {
            if opts.tau.is_some() {
                return Err(config_err("--tau applies to pimom only; use --lambda with spimom"));
            }
            match (opts.lambda, opts.delta) {
                (Some(_), Some(_)) => return Err(config_err("give either --lambda or --delta, not both")),
                (Some(l), None) => positive("lambda", l)?,
                (None, Some(d)) => default_lambda(positive("delta", d)?, r)?,
                (None, None) => 1.0,
            }
        }
    };
    let prior = NonlocalPrior::new(kind, r, scale)?.with_paper_constant(opts.paper_constant);
    Ok(PriorEcho {
        prior,
        delta: opts.delta,
    })
}

/// Parses a comma-separated list; an empty string is an empty list.
pub fn parse_list<T: std::str::FromStr>(flag: &str, s: &str) -> Outcome<Vec<T>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse()
                .map_err(|_| config_err(format!("--{flag}: {t:?} is not a valid entry")))
        })
        .collect()
}

pub fn parse_model(flag: &str, s: &str, p: usize) -> Outcome<ModelIndex> {
    let one_based: Vec<usize> = parse_list(flag, s)?;
    let m = ModelIndex::from_one_based(&one_based).map_err(|e| config_err(format!("--{flag}: {e}")))?;
    if m.min_columns() > p {
        return Err(config_err(format!("--{flag}: {m} refers past the {p} predictors")));
    }
    Ok(m)
}

/// Builds the experiment configuration for `simulate` and `study`.
pub fn experiment_config(
    design: &DesignOpts,
    family: FamilyEcho,
    n_grid: Vec<usize>,
) -> Outcome<ExperimentConfig> {
    if design.p == 0 {
        return Err(config_err("--p must be at least 1"));
    }
    let support = parse_model("support", &design.support, design.p)?;
    let signal = match (design.m, &design.beta) {
        (Some(_), Some(_)) => return Err(config_err("give either --beta or --m, not both")),
        (Some(m), None) => SignalRule::Decaying { c: design.c, m },
        (None, Some(b)) => SignalRule::Fixed {
            values: parse_list("beta", b)?,
        },
        (None, None) => SignalRule::Fixed {
            values: vec![1.0; support.len()],
        },
    };
    let design_rule = if design.rho == 0.0 {
        DesignRule::IidNormal
    } else {
        DesignRule::Equicorrelated { rho: design.rho }
    };
    let mut cfg = ExperimentConfig::gaussian(design.p, support.len(), n_grid);
    cfg.family = family.family;
    cfg.dispersion = family.sigma2;
    cfg.q = support.len().max(1).min(design.p);
    cfg.support = support;
    cfg.signal = signal;
    cfg.design = design_rule;
    Ok(cfg)
}

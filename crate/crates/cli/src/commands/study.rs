use std::path::PathBuf;

use nonlocal::experiments::{
    consistency_study, logm_ratio_study, mle_rate_study, mode_rate_study, scalar_mode_rate,
    ConsistencyRow, ConsistencyStudy, ExperimentConfig, LogRatioRow, LogRatioStudy, RateRow,
    RateTable, Trend,
};
use nonlocal::Execution;
use serde::Serialize;

use crate::args::{StudyArgs, StudyKind};
use crate::error::{Failure, Outcome};
use crate::output::{format_float, to_json, with_extension, write_atomic, CsvTable};
use crate::settings::{experiment_config, parse_list, resolve_family, resolve_prior};

const DEFAULT_GRID: [usize; 3] = [200, 800, 3200];
const SCALAR_GRID: [usize; 5] = [1_000, 10_000, 100_000, 1_000_000, 10_000_000];

#[derive(Debug, Serialize)]
struct StudyConfig {
    command: &'static str,
    study: &'static str,
    scalar: bool,
    out: Option<PathBuf>,
    threads: usize,
    experiment: ExperimentConfig,
}

#[derive(Debug, Serialize)]
struct RateSummary<'a> {
    label: &'a str,
    slope: Option<f64>,
    slope_se: Option<f64>,
    flag: &'a Option<String>,
    rows: &'a [RateRow],
}

impl<'a> From<&'a RateTable> for RateSummary<'a> {
    fn from(t: &'a RateTable) -> Self {
        RateSummary {
            label: &t.label,
            slope: t.slope,
            slope_se: t.slope_se,
            flag: &t.flag,
            rows: &t.rows,
        }
    }
}

#[derive(Debug, Serialize)]
#[serde(untagged)]
enum Results<'a> {
    Rates {
        tables: Vec<RateSummary<'a>>,
    },
    LogRatio {
        rows: &'a [LogRatioRow],
        max_identity_error: f64,
        skipped: usize,
    },
    Consistency {
        rows: &'a [ConsistencyRow],
        trends: &'a [Option<Trend>],
        flag: &'a Option<String>,
    },
}

#[derive(Debug, Serialize)]
struct StudySummary<'a> {
    config: StudyConfig,
    #[serde(flatten)]
    results: Results<'a>,
}

const HEADER: [&str; 8] = ["row_type", "label", "n", "replication", "model", "extra", "statistic", "value"];

struct Tidy(CsvTable);

impl Tidy {
    #[allow(clippy::too_many_arguments)]
    fn push(
        &mut self,
        row_type: &str,
        label: &str,
        n: usize,
        rep: Option<usize>,
        model: &str,
        extra: Option<usize>,
        statistic: &str,
        value: Option<f64>,
    ) -> Outcome<()> {
        let opt = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
        self.0.row([
            row_type.to_string(),
            label.to_string(),
            n.to_string(),
            opt(rep),
            model.to_string(),
            opt(extra),
            statistic.to_string(),
            value.map(format_float).unwrap_or_default(),
        ])
    }
}

fn rate_rows(t: &mut Tidy, table: &RateTable) -> Outcome<()> {
    for o in &table.observations {
        t.push("observation", &table.label, o.n, Some(o.replication), "", None, "distance", o.value)?;
    }
    for r in &table.rows {
        for (name, v) in [
            ("median", r.median),
            ("iqr", r.iqr),
            ("scaled_median", r.scaled_median),
            ("used", r.used as f64),
            ("excluded", r.excluded as f64),
        ] {
            t.push("summary", &table.label, r.n, None, "", None, name, Some(v))?;
        }
    }
    Ok(())
}

fn logm_rows(t: &mut Tidy, s: &LogRatioStudy) -> Outcome<()> {
    for r in &s.records {
        let model = r.model.to_string();
        for (name, v) in [
            ("total", r.total),
            ("likelihood_part", r.likelihood_part),
            ("kernel_part", r.kernel_part),
            ("polynomial_part", r.polynomial_part),
            ("logdet_part", r.logdet_part),
            ("constant_part", r.constant_part),
            ("reference_term", r.reference_term),
            ("identity_error", r.identity_error),
        ] {
            t.push("observation", &r.prior, r.n, Some(r.replication), &model, Some(r.extra), name, Some(v))?;
        }
    }
    for r in &s.rows {
        for (name, v) in [
            ("median_total", r.median_total),
            ("median_likelihood_part", r.median_likelihood_part),
            ("median_kernel_part", r.median_kernel_part),
            ("count", r.count as f64),
            ("all_negative", r.all_negative as u8 as f64),
        ] {
            t.push("summary", &r.prior, r.n, None, "", Some(r.extra), name, Some(v))?;
        }
    }
    Ok(())
}

fn consistency_rows(t: &mut Tidy, s: &ConsistencyStudy) -> Outcome<()> {
    for r in &s.records {
        let model = r.top.to_string();
        for (name, v) in [
            ("prob_truth", r.prob_truth),
            ("mass_nested", r.mass_a),
            ("mass_non_nested", r.mass_b),
            ("hit", r.hit as u8 as f64),
        ] {
            t.push("observation", &r.prior, r.n, Some(r.replication), &model, None, name, Some(v))?;
        }
    }
    for r in &s.rows {
        for (name, v) in [
            ("median_prob_truth", r.median_prob_truth),
            ("median_mass_nested", r.median_mass_a),
            ("median_mass_non_nested", r.median_mass_b),
            ("hit_rate", r.hit_rate),
            ("scale_pow_1_6", r.scale_pow),
            ("n_pow_2_9", r.n_pow),
        ] {
            t.push("summary", &r.prior, r.n, None, "", None, name, Some(v))?;
        }
    }
    Ok(())
}

pub fn run(args: &StudyArgs, threads: usize) -> Outcome<()> {
    if args.scalar && args.study != StudyKind::ModeRate {
        return Err(Failure::Config("--scalar applies to the mode-rate study only".into()));
    }
    let family = resolve_family(&args.family)?;
    let prior = resolve_prior(&args.prior)?;
    let n_grid = match &args.n_grid {
        Some(s) => parse_list("n-grid", s)?,
        None if args.scalar => SCALAR_GRID.to_vec(),
        None => DEFAULT_GRID.to_vec(),
    };
    let mut cfg = experiment_config(&args.design, family, n_grid)?;
    cfg.q = match args.q {
        Some(q) => q,
        None => (cfg.support.len() + 1).min(cfg.p),
    };
    cfg.replications = args.reps;
    cfg.seed = args.seed;
    cfg.priors = vec![prior.prior];
    cfg.epsilon = args.epsilon;
    cfg.nu = args.nu;
    cfg.supersets_per_size = args.supersets;
    cfg.search_budget = args.budget;
    cfg.validate()?;
    let exec = Execution::default();

    let mut tidy = Tidy(CsvTable::new(&HEADER)?);
    let rates: Vec<RateTable>;
    let logm: LogRatioStudy;
    let cons: ConsistencyStudy;
    let results = match args.study {
        StudyKind::MleRate | StudyKind::ModeRate => {
            rates = match (args.study, args.scalar) {
                (StudyKind::MleRate, _) => vec![mle_rate_study(&cfg, exec)?],
                (_, true) => vec![scalar_mode_rate(&prior.prior, &cfg.n_grid)?],
                _ => mode_rate_study(&cfg, exec)?,
            };
            for t in &rates {
                rate_rows(&mut tidy, t)?;
            }
            Results::Rates {
                tables: rates.iter().map(RateSummary::from).collect(),
            }
        }
        StudyKind::LogmRatio => {
            logm = logm_ratio_study(&cfg, exec)?;
            logm_rows(&mut tidy, &logm)?;
            Results::LogRatio {
                rows: &logm.rows,
                max_identity_error: logm.max_identity_error,
                skipped: logm.skipped,
            }
        }
        StudyKind::Consistency => {
            cons = consistency_study(&cfg, exec)?;
            consistency_rows(&mut tidy, &cons)?;
            Results::Consistency {
                rows: &cons.rows,
                trends: &cons.trends,
                flag: &cons.flag,
            }
        }
    };
    let summary = StudySummary {
        config: StudyConfig {
            command: "study",
            study: args.study.name(),
            scalar: args.scalar,
            out: args.out.clone(),
            threads,
            experiment: cfg,
        },
        results,
    };
    let json = to_json(&summary)?;
    if let Some(out) = &args.out {
        write_atomic(out, tidy.0.finish()?.as_bytes())?;
        write_atomic(&with_extension(out, ".json"), json.as_bytes())?;
    }
    print!("{json}");
    Ok(())
}

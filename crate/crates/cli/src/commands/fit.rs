use std::path::PathBuf;

use nonlocal::experiments::{hessian_diagnostics, HessianDiagnostics};
use nonlocal::glm::fit_mle;
use nonlocal::modelspace::{
    count_models, enumerate_models_capped, greedy_search, posterior_probs, score_models,
    ModelPosterior, SearchOptions,
};
use nonlocal::numerics::make_stream;
use nonlocal::posterior::fit_model;
use nonlocal::{Dataset, Execution, ModelIndex};
use serde::Serialize;

use crate::args::FitArgs;
use crate::error::{Failure, Outcome};
use crate::output::{emit, read_dataset, to_json};
use crate::settings::{parse_model, resolve_family, resolve_prior, FamilyEcho, PriorEcho};

#[derive(Debug, Serialize)]
struct FitConfig {
    command: &'static str,
    input: PathBuf,
    out: Option<PathBuf>,
    #[serde(flatten)]
    family: FamilyEcho,
    prior: PriorEcho,
    q: usize,
    search: bool,
    budget: usize,
    cap: u64,
    seed: u64,
    truth: Option<ModelIndex>,
    threads: usize,
}

#[derive(Debug, Serialize)]
struct ModelRow {
    indices: ModelIndex,
    columns: Vec<String>,
    log_marginal: f64,
    probability: f64,
}

#[derive(Debug, Serialize)]
struct TopModel {
    #[serde(flatten)]
    row: ModelRow,
    beta_mle: Vec<f64>,
    beta_mode: Vec<f64>,
    mode_converged: bool,
}

#[derive(Debug, Serialize)]
struct Diagnostics {
    method: &'static str,
    n: usize,
    p: usize,
    model_space_size: String,
    models_scored: usize,
    search_evaluations: Option<usize>,
    search_steps: Option<usize>,
    total_probability: f64,
    truth_probability: Option<f64>,
    mass_nested: Option<f64>,
    mass_non_nested: Option<f64>,
    /// Hessian constants of the top model over its MLE and posterior mode.
    top_model_hessian: Option<HessianDiagnostics>,
}

#[derive(Debug, Serialize)]
struct FitOutput {
    config: FitConfig,
    top: TopModel,
    diagnostics: Diagnostics,
    models: Vec<ModelRow>,
}

pub fn run(args: &FitArgs, threads: usize) -> Outcome<()> {
    let family = resolve_family(&args.family)?;
    let prior = resolve_prior(&args.prior)?;
    let parsed = read_dataset(&args.input)?;
    let p = parsed.predictors.len();
    let q = args.q.unwrap_or(p.min(5));
    if q > p {
        return Err(Failure::Config(format!("--q {q} exceeds the {p} predictors")));
    }
    let truth = args
        .truth
        .as_deref()
        .map(|t| parse_model("truth", t, p))
        .transpose()?;
    let data = Dataset::new(parsed.y, parsed.x, family.family, family.sigma2)?;
    let exec = Execution::default();
    let cap = args.cap as u128;
    let count = count_models(p, q, cap);

    let (method, post, evaluations, steps) = if count <= cap {
        let models = enumerate_models_capped(p, q, cap)?;
        let scores = score_models(&data, &prior.prior, &models, exec);
        let post = posterior_probs(models.into_iter().zip(scores).collect(), truth.as_ref())?;
        ("enumeration", post, None, None)
    } else if args.search {
        let res = greedy_search(
            &data,
            &prior.prior,
            q,
            SearchOptions::with_budget(args.budget),
            &make_stream(args.seed),
            truth.as_ref(),
            exec,
        )?;
        ("greedy", res.visited, Some(res.evaluations), Some(res.steps))
    } else {
        return Err(nonlocal::Error::TooManyModels { count, cap }.into());
    };

    let names = |m: &ModelIndex| m.indices().iter().map(|&j| parsed.predictors[j].clone()).collect();
    let row = |e: &nonlocal::modelspace::ModelEntry| ModelRow {
        indices: e.model.clone(),
        columns: names(&e.model),
        log_marginal: e.log_marginal,
        probability: e.probability,
    };
    let top_entry = post.top();
    let top_fit = top_details(&data, &prior, &top_entry.model)?;
    let diagnostics = Diagnostics {
        method,
        n: data.n(),
        p,
        model_space_size: if count > cap { format!(">{cap}") } else { count.to_string() },
        models_scored: post.entries.len(),
        search_evaluations: evaluations,
        search_steps: steps,
        total_probability: post.total_probability(),
        truth_probability: post.truth_probability,
        mass_nested: truth.as_ref().map(|_| post.mass_a),
        mass_non_nested: truth.as_ref().map(|_| post.mass_b),
        top_model_hessian: top_fit.3,
    };
    let out = FitOutput {
        top: TopModel {
            row: row(top_entry),
            beta_mle: top_fit.0,
            beta_mode: top_fit.1,
            mode_converged: top_fit.2,
        },
        models: post_rows(&post, row),
        diagnostics,
        config: FitConfig {
            command: "fit",
            input: args.input.clone(),
            out: args.out.clone(),
            family,
            prior,
            q,
            search: args.search,
            budget: args.budget,
            cap: args.cap,
            seed: args.seed,
            truth,
            threads,
        },
    };
    emit(args.out.as_deref(), &to_json(&out)?)
}

fn post_rows<F: Fn(&nonlocal::modelspace::ModelEntry) -> ModelRow>(post: &ModelPosterior, row: F) -> Vec<ModelRow> {
    post.entries.iter().map(row).collect()
}

type TopFit = (Vec<f64>, Vec<f64>, bool, Option<HessianDiagnostics>);

fn top_details(data: &Dataset, prior: &PriorEcho, model: &ModelIndex) -> Outcome<TopFit> {
    if model.is_empty() {
        return Ok((Vec::new(), Vec::new(), true, None));
    }
    let mle = fit_mle(data, model)?;
    let pm = fit_model(data, model, &prior.prior)?;
    let diag = hessian_diagnostics(data, model, &[mle.beta_hat.clone(), pm.beta_pm.clone()]).ok();
    Ok((
        mle.beta_hat.iter().copied().collect(),
        pm.beta_pm.iter().copied().collect(),
        pm.converged,
        diag,
    ))
}

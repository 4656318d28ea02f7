//! Seeded simulation studies for the large-sample behaviour of the MLE, the
//! posterior mode, log marginal ratios and model posterior probabilities.
//!
//! Replication `rep` at grid point `k` draws from
//! `make_stream(seed).derive(k).derive(rep)`, so every study is reproducible
//! from its configuration and independent of the execution strategy.

use nalgebra::{DMatrix, DVector};
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::glm::{fit_mle, Dataset, Family, Submodel};
use crate::modelspace::{
    count_models, enumerate_posterior, greedy_search, ModelIndex, SearchOptions,
    DEFAULT_MODEL_CAP,
};
use crate::numerics::{extremal_eigenvalues, make_stream, root_find, spectral_norm, RandomStream, SpdMatrix};
use crate::posterior::{find_posterior_mode, finish, PosteriorFit};
use crate::priors::{NonlocalPrior, PriorKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum SignalRule {
    /// One value per support column, in column order.
    Fixed { values: Vec<f64> },
    /// Every support coefficient equals `c · n^{-m}`.
    Decaying { c: f64, m: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum DesignRule {
    IidNormal,
    /// Every pair of columns has correlation `rho`.
    Equicorrelated { rho: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub family: Family,
    /// Gaussian noise variance; ignored otherwise.
    pub dispersion: f64,
    pub p: usize,
    pub q: usize,
    pub support: ModelIndex,
    pub signal: SignalRule,
    pub n_grid: Vec<usize>,
    pub replications: usize,
    pub seed: u64,
    pub priors: Vec<NonlocalPrior>,
    pub design: DesignRule,
    /// Knobs of the log-marginal-ratio reference term
    /// `(1+ε) log p^{ν + |J \ J₀|}`.
    pub epsilon: f64,
    pub nu: f64,
    /// Random supersets drawn per extra-size level in the ratio study.
    pub supersets_per_size: usize,
    /// Greedy-search budget used when the model space is above the
    /// enumeration cap.
    pub search_budget: usize,
}

impl ExperimentConfig {
    /// Gaussian, iid design, spiMOM `r = 1, λ = 1`, fixed unit signals on the
    /// first `support_size` columns.
    pub fn gaussian(p: usize, support_size: usize, n_grid: Vec<usize>) -> Self {
        ExperimentConfig {
            family: Family::Gaussian,
            dispersion: 1.0,
            p,
            q: support_size.max(1).min(p),
            support: ModelIndex::new((0..support_size).collect()).expect("distinct columns"),
            signal: SignalRule::Fixed {
                values: vec![1.0; support_size],
            },
            n_grid,
            replications: 20,
            seed: 1,
            priors: vec![NonlocalPrior::spimom(1.0, 1.0).expect("valid prior")],
            design: DesignRule::IidNormal,
            epsilon: 0.1,
            nu: 0.1,
            supersets_per_size: 5,
            search_budget: 200,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.p == 0 {
            return bad("p must be at least 1".into());
        }
        if self.support.len() > self.q || self.q > self.p {
            return bad(format!(
                "need |J0| <= q <= p, got |J0| = {}, q = {}, p = {}",
                self.support.len(),
                self.q,
                self.p
            ));
        }
        if self.support.min_columns() > self.p {
            return bad(format!("support {} exceeds p = {}", self.support, self.p));
        }
        if self.n_grid.is_empty() {
            return bad("n grid is empty".into());
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!("n grid must be strictly increasing: {:?}", self.n_grid));
        }
        if self.n_grid[0] < self.support.len() + 1 {
            return bad(format!(
                "smallest n must exceed |J0| = {}",
                self.support.len()
            ));
        }
        if self.replications == 0 {
            return bad("replications must be at least 1".into());
        }
        match &self.signal {
            SignalRule::Fixed { values } if values.len() != self.support.len() => {
                return bad(format!(
                    "{} signal values for a support of size {}",
                    values.len(),
                    self.support.len()
                ))
            }
            SignalRule::Decaying { m, .. } if !(0.0..1.0 / 3.0).contains(m) => {
                return bad(format!("decay exponent m must lie in [0, 1/3), got {m}"))
            }
            _ => {}
        }
        if let DesignRule::Equicorrelated { rho } = self.design {
            if !(0.0..1.0).contains(&rho) {
                return bad(format!("equicorrelation must lie in [0, 1), got {rho}"));
            }
        }
        if !(self.dispersion > 0.0) {
            return bad("dispersion must be positive".into());
        }
        Ok(())
    }

    /// Full-length `β₀` at sample size `n`.
    pub fn beta0(&self, n: usize) -> DVector<f64> {
        let mut b = DVector::zeros(self.p);
        for (k, &j) in self.support.indices().iter().enumerate() {
            b[j] = match &self.signal {
                SignalRule::Fixed { values } => values[k],
                SignalRule::Decaying { c, m } => c * (n as f64).powf(-m),
            };
        }
        b
    }

    fn job_stream(&self, grid_index: usize, rep: usize) -> RandomStream {
        make_stream(self.seed)
            .derive(grid_index as u64)
            .derive(rep as u64)
    }

    fn dispersion_for_family(&self) -> f64 {
        if self.family == Family::Gaussian {
            self.dispersion
        } else {
            1.0
        }
    }
}

/// Columns are centred and scaled to unit variance (divisor `n`), so each has
/// `xᵀx = n`.
pub fn simulate_dataset(
    cfg: &ExperimentConfig,
    n: usize,
    stream: &RandomStream,
) -> Result<(Dataset, DVector<f64>)> {
    cfg.validate()?;
    if n < cfg.support.len() + 1 {
        return Err(Error::InvalidInput(format!(
            "n = {n} must exceed |J0| = {}",
            cfg.support.len()
        )));
    }
    let p = cfg.p;
    let mut design_rng = stream.derive(0);
    let mut x = DMatrix::<f64>::zeros(n, p);
    for i in 0..n {
        let shared = match cfg.design {
            DesignRule::IidNormal => 0.0,
            DesignRule::Equicorrelated { rho } => rho.sqrt() * design_rng.standard_normal(),
        };
        let own = match cfg.design {
            DesignRule::IidNormal => 1.0,
            DesignRule::Equicorrelated { rho } => (1.0 - rho).sqrt(),
        };
        for j in 0..p {
            x[(i, j)] = shared + own * design_rng.standard_normal();
        }
    }
    for mut col in x.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
        let sd = (col.norm_squared() / n as f64).sqrt();
        if sd > 0.0 {
            col /= sd;
        }
    }
    let beta0 = cfg.beta0(n);
    let theta = &x * &beta0;
    let mut noise = stream.derive(1);
    let sigma = cfg.dispersion_for_family().sqrt();
    let y: Vec<f64> = match cfg.family {
        Family::Gaussian => theta
            .iter()
            .map(|&t| t + sigma * noise.standard_normal())
            .collect(),
        Family::Logistic => theta
            .iter()
            .map(|&t| {
                if noise.uniform() < Family::Logistic.mean(t) {
                    1.0
                } else {
                    0.0
                }
            })
            .collect(),
        Family::Poisson => theta
            .iter()
            .map(|&t| {
                let rate = t.exp();
                rand_distr::Poisson::new(rate)
                    .map(|dist| dist.sample(&mut noise))
                    .map_err(|e| Error::InvalidInput(format!("Poisson rate {rate}: {e}")))
            })
            .collect::<Result<_>>()?,
    };
    let data = Dataset::new(y, x, cfg.family, cfg.dispersion_for_family())?;
    Ok((data, beta0))
}

pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

/// Linear-interpolation quantile of the sorted values; NaN when empty.
pub fn quantile(values: &[f64], prob: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = prob * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

/// Least-squares slope of `log y` on `log x` and its standard error. Needs
/// at least three points with positive `y`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0 && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let k = pts.len();
    if k < 3 {
        return None;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k as f64;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k as f64;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let rss: f64 = pts
        .iter()
        .map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2))
        .sum();
    let se = (rss / (k - 2) as f64 / sxx).sqrt();
    Some((slope, se))
}

#[derive(Debug, Clone, Serialize)]
pub struct Observation {
    pub n: usize,
    pub replication: usize,
    /// `None` when the replication was excluded (non-converged fit).
    pub value: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RateRow {
    pub n: usize,
    pub median: f64,
    pub iqr: f64,
    /// `n^{1/3}` times the median.
    pub scaled_median: f64,
    pub used: usize,
    pub excluded: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RateTable {
    pub label: String,
    pub rows: Vec<RateRow>,
    pub slope: Option<f64>,
    pub slope_se: Option<f64>,
    /// Set when no slope could be fitted.
    pub flag: Option<String>,
    pub observations: Vec<Observation>,
}

impl RateTable {
    fn from_observations(label: String, grid: &[usize], observations: Vec<Observation>) -> Self {
        let rows: Vec<RateRow> = grid
            .iter()
            .map(|&n| {
                let vals: Vec<f64> = observations
                    .iter()
                    .filter(|o| o.n == n)
                    .filter_map(|o| o.value)
                    .collect();
                let excluded = observations
                    .iter()
                    .filter(|o| o.n == n && o.value.is_none())
                    .count();
                let med = median(&vals);
                RateRow {
                    n,
                    median: med,
                    iqr: quantile(&vals, 0.75) - quantile(&vals, 0.25),
                    scaled_median: (n as f64).cbrt() * med,
                    used: vals.len(),
                    excluded,
                }
            })
            .collect();
        let xs: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.median).collect();
        let fit = loglog_slope(&xs, &ys);
        let flag = fit.is_none().then(|| {
            format!(
                "slope needs at least 3 grid points with a positive median, have {}",
                rows.len()
            )
        });
        RateTable {
            label,
            rows,
            slope: fit.map(|f| f.0),
            slope_se: fit.map(|f| f.1),
            flag,
            observations,
        }
    }

    /// Whether `n^{1/3} · median` strictly decreases along the grid.
    pub fn scaled_strictly_decreasing(&self) -> bool {
        self.rows
            .windows(2)
            .all(|w| w[1].scaled_median < w[0].scaled_median)
    }
}

fn jobs(cfg: &ExperimentConfig) -> Vec<(usize, usize)> {
    (0..cfg.n_grid.len())
        .flat_map(|k| (0..cfg.replications).map(move |r| (k, r)))
        .collect()
}

/// `‖β̂_{J₀} − β₀‖₂` for the MLE of the true model, per replication.
pub fn mle_rate_study(cfg: &ExperimentConfig, exec: Execution) -> Result<RateTable> {
    cfg.validate()?;
    let results = exec.map(&jobs(cfg), |&(k, rep)| -> Result<Observation> {
        let n = cfg.n_grid[k];
        let (data, beta0) = simulate_dataset(cfg, n, &cfg.job_stream(k, rep))?;
        let fit = fit_mle(&data, &cfg.support)?;
        let value = fit.converged.then(|| {
            cfg.support
                .indices()
                .iter()
                .enumerate()
                .map(|(i, &j)| (fit.beta_hat[i] - beta0[j]).powi(2))
                .sum::<f64>()
                .sqrt()
        });
        Ok(Observation {
            n,
            replication: rep,
            value,
        })
    });
    let obs = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(RateTable::from_observations("mle".into(), &cfg.n_grid, obs))
}

/// First column outside the true support.
pub fn null_column(cfg: &ExperimentConfig) -> Result<usize> {
    (0..cfg.p)
        .find(|&c| !cfg.support.contains(c))
        .ok_or_else(|| Error::InvalidInput("no column outside the support".into()))
}

fn prior_label(prior: &NonlocalPrior) -> String {
    let scale = match prior.kind {
        PriorKind::Pimom => "tau",
        PriorKind::Spimom => "lambda",
    };
    format!("{}(r={},{}={})", prior.kind.name(), prior.r, scale, prior.scale)
}

/// `|β_pm,j − β̂_j|` on one null coordinate appended to `J₀`, one table per
/// prior in the configuration.
pub fn mode_rate_study(cfg: &ExperimentConfig, exec: Execution) -> Result<Vec<RateTable>> {
    cfg.validate()?;
    if cfg.priors.is_empty() {
        return Err(Error::InvalidInput("no prior to study".into()));
    }
    let null = null_column(cfg)?;
    let model = cfg.support.with(null);
    let pos = model
        .indices()
        .iter()
        .position(|&c| c == null)
        .expect("null column is in the model");
    let results = exec.map(&jobs(cfg), |&(k, rep)| -> Result<Vec<Observation>> {
        let n = cfg.n_grid[k];
        let (data, _) = simulate_dataset(cfg, n, &cfg.job_stream(k, rep))?;
        let mle = fit_mle(&data, &model)?;
        cfg.priors
            .iter()
            .map(|prior| {
                let value = if mle.converged {
                    let pm = find_posterior_mode(&data, &model, prior, &mle)?;
                    pm.converged
                        .then(|| (pm.beta_pm[pos] - mle.beta_hat[pos]).abs())
                } else {
                    None
                };
                Ok(Observation {
                    n,
                    replication: rep,
                    value,
                })
            })
            .collect()
    });
    let per_job = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(cfg
        .priors
        .iter()
        .enumerate()
        .map(|(i, prior)| {
            let obs = per_job.iter().map(|v| v[i].clone()).collect();
            RateTable::from_observations(prior_label(prior), &cfg.n_grid, obs)
        })
        .collect())
}

/// Positive root of the null-coordinate stationarity equation with unit
/// per-observation information and MLE at zero:
/// `nβ⁴ + (r+1)β² = 2τ` (piMOM) or `nβ³ + (r+1)β = 2√λ` (spiMOM).
pub fn scalar_null_mode(prior: &NonlocalPrior, n: f64) -> Result<f64> {
    let r1 = prior.r + 1.0;
    match prior.kind {
        PriorKind::Pimom => {
            let rhs = 2.0 * prior.scale;
            root_find(
                |b| n * b.powi(4) + r1 * b * b - rhs,
                0.0,
                1.0 + rhs,
                1e-12 * rhs.max(1.0),
            )
        }
        PriorKind::Spimom => {
            let rhs = 2.0 * prior.scale.sqrt();
            root_find(
                |b| n * b.powi(3) + r1 * b - rhs,
                0.0,
                1.0 + rhs,
                1e-12 * rhs.max(1.0),
            )
        }
    }
}

/// Rate table of [`scalar_null_mode`] over `n_grid`; no data involved.
pub fn scalar_mode_rate(prior: &NonlocalPrior, n_grid: &[usize]) -> Result<RateTable> {
    let obs = n_grid
        .iter()
        .map(|&n| {
            Ok(Observation {
                n,
                replication: 0,
                value: Some(scalar_null_mode(prior, n as f64)?),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RateTable::from_observations(
        format!("scalar {}", prior_label(prior)),
        n_grid,
        obs,
    ))
}

/// One superset comparison `log(M_J / M_{J₀})` broken into its additive
/// pieces.
#[derive(Debug, Clone, Serialize)]
pub struct LogRatioRecord {
    pub prior: String,
    pub n: usize,
    pub replication: usize,
    pub model: ModelIndex,
    pub extra: usize,
    pub total: f64,
    /// `ℓ(β_pm,J) − ℓ(β_pm,J₀)`.
    pub likelihood_part: f64,
    /// `−(Σ_J kernel − Σ_{J₀} kernel)` with the prior's exponential kernel.
    pub kernel_part: f64,
    /// Normalizing constants and `−(r+1) Σ log|β|` terms of the prior.
    pub polynomial_part: f64,
    /// `−½ (log det H*_J − log det H*_{J₀})`.
    pub logdet_part: f64,
    /// `(|J| − |J₀|)/2 · log 2π`.
    pub constant_part: f64,
    /// `(1+ε) log p^{ν + |J \ J₀|}`.
    pub reference_term: f64,
    /// `|total − Σ parts|`.
    pub identity_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LogRatioRow {
    pub prior: String,
    pub n: usize,
    pub extra: usize,
    pub count: usize,
    pub median_total: f64,
    pub median_likelihood_part: f64,
    pub median_kernel_part: f64,
    pub all_negative: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct LogRatioStudy {
    pub rows: Vec<LogRatioRow>,
    pub records: Vec<LogRatioRecord>,
    pub max_identity_error: f64,
    /// Replications skipped because a fit failed.
    pub skipped: usize,
}

fn fitted(data: &Dataset, model: &ModelIndex, prior: &NonlocalPrior) -> Result<PosteriorFit> {
    let mle = fit_mle(data, model)?;
    let mut pm = find_posterior_mode(data, model, prior, &mle)?;
    finish(&mut pm);
    Ok(pm)
}

fn prior_pieces(prior: &NonlocalPrior, beta: &DVector<f64>) -> (f64, f64) {
    let kernel: f64 = beta.iter().map(|&b| prior.kernel(b)).sum();
    let poly = beta.len() as f64 * prior.log_constant()
        - (prior.r + 1.0) * beta.iter().map(|b| b.abs().ln()).sum::<f64>();
    (kernel, poly)
}

/// Random distinct supersets of the support, `per_size` per extra size.
fn sample_supersets(cfg: &ExperimentConfig, stream: &RandomStream) -> Vec<ModelIndex> {
    let nulls: Vec<usize> = (0..cfg.p).filter(|&c| !cfg.support.contains(c)).collect();
    let mut out = Vec::new();
    for extra in 1..=(cfg.q - cfg.support.len()).min(nulls.len()) {
        let mut draw = stream.derive(extra as u64);
        let mut chosen: Vec<ModelIndex> = Vec::new();
        let mut attempts = 0;
        while chosen.len() < cfg.supersets_per_size && attempts < 50 * cfg.supersets_per_size {
            attempts += 1;
            let mut pool = nulls.clone();
            let mut m = cfg.support.clone();
            for _ in 0..extra {
                let i = draw.index(pool.len());
                m = m.with(pool.swap_remove(i));
            }
            if !chosen.contains(&m) {
                chosen.push(m);
            }
        }
        chosen.sort();
        out.extend(chosen);
    }
    out
}

/// Log marginal ratios of sampled strict supersets against the true model.
pub fn logm_ratio_study(cfg: &ExperimentConfig, exec: Execution) -> Result<LogRatioStudy> {
    cfg.validate()?;
    let results = exec.map(&jobs(cfg), |&(k, rep)| -> Result<Option<Vec<LogRatioRecord>>> {
        let n = cfg.n_grid[k];
        let stream = cfg.job_stream(k, rep);
        let (data, _) = simulate_dataset(cfg, n, &stream)?;
        let supersets = sample_supersets(cfg, &stream.derive(2));
        let mut records = Vec::new();
        for prior in &cfg.priors {
            let base = match fitted(&data, &cfg.support, prior) {
                Ok(f) if f.log_marginal.is_finite() => f,
                _ => return Ok(None),
            };
            let (k0_kernel, k0_poly) = prior_pieces(prior, &base.beta_pm);
            for m in &supersets {
                let fit = match fitted(&data, m, prior) {
                    Ok(f) if f.log_marginal.is_finite() => f,
                    _ => return Ok(None),
                };
                let (kernel, poly) = prior_pieces(prior, &fit.beta_pm);
                let extra = m.len() - cfg.support.len();
                let total = fit.log_marginal - base.log_marginal;
                let likelihood_part = fit.loglik - base.loglik;
                let kernel_part = -(kernel - k0_kernel);
                let polynomial_part = poly - k0_poly;
                let logdet_part = -0.5 * (fit.logdet.unwrap_or(f64::NAN) - base.logdet.unwrap_or(f64::NAN));
                let constant_part = 0.5 * extra as f64 * (2.0 * std::f64::consts::PI).ln();
                let sum = likelihood_part + kernel_part + polynomial_part + logdet_part + constant_part;
                records.push(LogRatioRecord {
                    prior: prior_label(prior),
                    n,
                    replication: rep,
                    model: m.clone(),
                    extra,
                    total,
                    likelihood_part,
                    kernel_part,
                    polynomial_part,
                    logdet_part,
                    constant_part,
                    reference_term: (1.0 + cfg.epsilon) * (cfg.nu + extra as f64) * (cfg.p as f64).ln(),
                    identity_error: (total - sum).abs(),
                });
            }
        }
        Ok(Some(records))
    });
    let mut records = Vec::new();
    let mut skipped = 0;
    for r in results {
        match r? {
            Some(v) => records.extend(v),
            None => skipped += 1,
        }
    }
    let mut rows = Vec::new();
    for prior in &cfg.priors {
        let label = prior_label(prior);
        for &n in &cfg.n_grid {
            for extra in 1..=(cfg.q - cfg.support.len()) {
                let sel: Vec<&LogRatioRecord> = records
                    .iter()
                    .filter(|r| r.prior == label && r.n == n && r.extra == extra)
                    .collect();
                if sel.is_empty() {
                    continue;
                }
                let col = |f: fn(&LogRatioRecord) -> f64| median(&sel.iter().map(|r| f(r)).collect::<Vec<_>>());
                rows.push(LogRatioRow {
                    prior: label.clone(),
                    n,
                    extra,
                    count: sel.len(),
                    median_total: col(|r| r.total),
                    median_likelihood_part: col(|r| r.likelihood_part),
                    median_kernel_part: col(|r| r.kernel_part),
                    all_negative: sel.iter().all(|r| r.total < 0.0),
                });
            }
        }
    }
    let max_identity_error = records
        .iter()
        .map(|r| r.identity_error)
        .fold(0.0, f64::max);
    Ok(LogRatioStudy {
        rows,
        records,
        max_identity_error,
        skipped,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConsistencyRecord {
    pub prior: String,
    pub n: usize,
    pub replication: usize,
    pub prob_truth: f64,
    pub mass_a: f64,
    pub mass_b: f64,
    pub top: ModelIndex,
    pub hit: bool,
    pub enumerated: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConsistencyRow {
    pub prior: String,
    pub n: usize,
    pub median_prob_truth: f64,
    pub median_mass_a: f64,
    pub median_mass_b: f64,
    pub hit_rate: f64,
    /// `λ^{1/6}` (or `τ^{1/6}`), reported next to `n^{2/9}`.
    pub scale_pow: f64,
    pub n_pow: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Trend {
    pub prob_nondecreasing: bool,
    pub mass_a_nonincreasing: bool,
    pub mass_b_nonincreasing: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConsistencyStudy {
    pub rows: Vec<ConsistencyRow>,
    pub records: Vec<ConsistencyRecord>,
    /// Per prior, in configuration order. `None` for a one-point grid.
    pub trends: Vec<Option<Trend>>,
    pub flag: Option<String>,
}

/// Posterior probability of the true model, the nested and non-nested
/// masses, and the top-model hit rate across the grid.
pub fn consistency_study(cfg: &ExperimentConfig, exec: Execution) -> Result<ConsistencyStudy> {
    cfg.validate()?;
    let enumerable = count_models(cfg.p, cfg.q, DEFAULT_MODEL_CAP) <= DEFAULT_MODEL_CAP;
    // Outer replications already saturate the pool.
    let inner = Execution::Sequential;
    let results = exec.map(&jobs(cfg), |&(k, rep)| -> Result<Vec<ConsistencyRecord>> {
        let n = cfg.n_grid[k];
        let stream = cfg.job_stream(k, rep);
        let (data, _) = simulate_dataset(cfg, n, &stream)?;
        cfg.priors
            .iter()
            .map(|prior| {
                let post = if enumerable {
                    enumerate_posterior(&data, prior, cfg.q, Some(&cfg.support), inner)?
                } else {
                    greedy_search(
                        &data,
                        prior,
                        cfg.q,
                        SearchOptions::with_budget(cfg.search_budget),
                        &stream.derive(3),
                        Some(&cfg.support),
                        inner,
                    )?
                    .visited
                };
                let top = post.top().model.clone();
                Ok(ConsistencyRecord {
                    prior: prior_label(prior),
                    n,
                    replication: rep,
                    prob_truth: post.truth_probability.unwrap_or(0.0),
                    mass_a: post.mass_a,
                    mass_b: post.mass_b,
                    hit: top == cfg.support,
                    top,
                    enumerated: enumerable,
                })
            })
            .collect()
    });
    let records: Vec<ConsistencyRecord> = results
        .into_iter()
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let mut rows = Vec::new();
    let mut trends = Vec::new();
    for prior in &cfg.priors {
        let label = prior_label(prior);
        let start = rows.len();
        for &n in &cfg.n_grid {
            let sel: Vec<&ConsistencyRecord> = records
                .iter()
                .filter(|r| r.prior == label && r.n == n)
                .collect();
            let col = |f: fn(&ConsistencyRecord) -> f64| median(&sel.iter().map(|r| f(r)).collect::<Vec<_>>());
            rows.push(ConsistencyRow {
                prior: label.clone(),
                n,
                median_prob_truth: col(|r| r.prob_truth),
                median_mass_a: col(|r| r.mass_a),
                median_mass_b: col(|r| r.mass_b),
                hit_rate: sel.iter().filter(|r| r.hit).count() as f64 / sel.len() as f64,
                scale_pow: prior.scale.powf(1.0 / 6.0),
                n_pow: (n as f64).powf(2.0 / 9.0),
            });
        }
        let mine = &rows[start..];
        trends.push((mine.len() >= 2).then(|| Trend {
            prob_nondecreasing: mine
                .windows(2)
                .all(|w| w[1].median_prob_truth >= w[0].median_prob_truth),
            mass_a_nonincreasing: mine.windows(2).all(|w| w[1].median_mass_a <= w[0].median_mass_a),
            mass_b_nonincreasing: mine.windows(2).all(|w| w[1].median_mass_b <= w[0].median_mass_b),
        }));
    }
    let flag = (cfg.n_grid.len() < 2).then(|| "no trend computable from a one-point n grid".to_string());
    Ok(ConsistencyStudy {
        rows,
        records,
        trends,
        flag,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct HessianDiagnostics {
    /// Smallest eigenvalue of `n⁻¹ H(β)` over the points.
    pub c_l: f64,
    /// Largest eigenvalue of `n⁻¹ H(β)` over the points.
    pub c_u: f64,
    /// Largest `‖H(β) − H(β')‖_S / (n ‖β − β'‖₂)` over point pairs.
    pub c_d: f64,
    /// `max_{i,j} |x_ij (y_i − b'(x_iᵀ β̂))|` at the MLE.
    pub c1_max: f64,
}

pub fn hessian_diagnostics(
    d: &Dataset,
    model: &ModelIndex,
    points: &[DVector<f64>],
) -> Result<HessianDiagnostics> {
    if points.is_empty() {
        return Err(Error::InvalidInput("no points for Hessian diagnostics".into()));
    }
    const TOL: f64 = 1e-8;
    let sub = Submodel::new(d, model)?;
    let n = d.n() as f64;
    let hs = points
        .iter()
        .map(|b| sub.neg_hessian(b).map(|h| h.into_inner()))
        .collect::<Result<Vec<_>>>()?;
    let mut c_l = f64::INFINITY;
    let mut c_u = f64::NEG_INFINITY;
    for h in &hs {
        let (lo, hi) = extremal_eigenvalues(&SpdMatrix::symmetrized(h / n), TOL);
        c_l = c_l.min(lo);
        c_u = c_u.max(hi);
    }
    let mut c_d: f64 = 0.0;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            let dist = (&points[i] - &points[j]).norm();
            if dist > 0.0 {
                c_d = c_d.max(spectral_norm(&(&hs[i] - &hs[j]), TOL) / (n * dist));
            }
        }
    }
    let mle = fit_mle(d, model)?;
    let c1_max = sub.max_score_contribution(&mle.beta_hat)?;
    Ok(HessianDiagnostics { c_l, c_u, c_d, c1_max })
}

/// spiMOM `λ` that puts 1% of the prior mass in `(−δ, δ)`.
///
/// The mass depends on `(δ, λ)` only through `δ/√λ`, so the unit-scale
/// threshold is found once by root finding on the quadrature CDF.
pub fn default_lambda(delta: f64, r: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::InvalidInput(format!("effect-size floor must be positive, got {delta}")));
    }
    let unit = NonlocalPrior::spimom(r, 1.0)?;
    let mass = |s: f64| unit.central_mass(s.exp(), 1e-13).unwrap_or(f64::NAN) - 0.01;
    let s = root_find(mass, -8.0, 8.0, 1e-12)?;
    Ok((delta / s.exp()).powi(2))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_noise_is_centred() {
        let mut cfg = ExperimentConfig::gaussian(1, 1, vec![10_000]);
        cfg.replications = 1;
        let (data, beta0) = simulate_dataset(&cfg, 10_000, &make_stream(8)).unwrap();
        let resid = data.y() - data.x() * &beta0;
        let mean = resid.mean();
        assert!(mean.abs() < 0.03, "{mean}");
        for col in data.x().column_iter() {
            assert!(col.mean().abs() < 1e-12);
            assert!((col.norm_squared() - 10_000.0).abs() < 1e-8);
        }
    }

    #[test]
    fn simulation_is_deterministic_and_supported() {
        let mut cfg = ExperimentConfig::gaussian(4, 2, vec![50]);
        cfg.family = Family::Logistic;
        let s = make_stream(99);
        let (a, _) = simulate_dataset(&cfg, 50, &s).unwrap();
        let (b, _) = simulate_dataset(&cfg, 50, &s).unwrap();
        assert_eq!(a.y(), b.y());
        assert_eq!(a.x(), b.x());
        assert!(a.y().iter().all(|&v| v == 0.0 || v == 1.0));
        cfg.family = Family::Poisson;
        cfg.signal = SignalRule::Fixed { values: vec![0.5, -0.3] };
        let (c, _) = simulate_dataset(&cfg, 50, &s).unwrap();
        assert!(c.y().iter().all(|&v| v >= 0.0 && v.fract() == 0.0));
    }

    #[test]
    fn equicorrelated_design() {
        let mut cfg = ExperimentConfig::gaussian(3, 1, vec![20_000]);
        cfg.design = DesignRule::Equicorrelated { rho: 0.5 };
        let (d, _) = simulate_dataset(&cfg, 20_000, &make_stream(2)).unwrap();
        let c = d.x().column(0).dot(&d.x().column(1)) / 20_000.0;
        assert!((c - 0.5).abs() < 0.03, "{c}");
    }

    #[test]
    fn config_validation() {
        let mut cfg = ExperimentConfig::gaussian(5, 2, vec![100, 50]);
        assert!(cfg.validate().is_err());
        cfg.n_grid = vec![100];
        assert!(cfg.validate().is_ok());
        cfg.signal = SignalRule::Decaying { c: 1.0, m: 0.4 };
        assert!(cfg.validate().is_err());
        cfg.signal = SignalRule::Decaying { c: 1.0, m: 0.2 };
        assert!(cfg.validate().is_ok());
        assert!((cfg.beta0(1000)[0] - 1000f64.powf(-0.2)).abs() < 1e-15);
        cfg.q = 1;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn quantiles_and_slopes() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.25), 2.0);
        let xs = [10.0, 100.0, 1000.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(-0.5)).collect();
        let (slope, se) = loglog_slope(&xs, &ys).unwrap();
        assert!((slope + 0.5).abs() < 1e-12 && se < 1e-10);
        assert!(loglog_slope(&xs[..2], &ys[..2]).is_none());
    }

    #[test]
    fn one_point_grid_is_flagged() {
        let mut cfg = ExperimentConfig::gaussian(4, 2, vec![200]);
        cfg.replications = 3;
        let t = mle_rate_study(&cfg, Execution::Sequential).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert!(t.slope.is_none() && t.flag.is_some());
    }

    #[test]
    fn scalar_null_mode_matches_closed_form() {
        let p = NonlocalPrior::pimom(1.0, 1.0).unwrap();
        let b = scalar_null_mode(&p, 1000.0).unwrap();
        assert!((b - ((-2.0 + 8004f64.sqrt()) / 2000.0).sqrt()).abs() < 1e-12);
        let s = NonlocalPrior::spimom(1.0, 1.0).unwrap();
        let b = scalar_null_mode(&s, 1000.0).unwrap();
        assert!((1000.0 * b.powi(3) + 2.0 * b - 2.0).abs() < 1e-11);
        // agrees with the prior's exact gradient: -nβ + d/dβ log π(β) = 0
        for prior in [p, s] {
            let b = scalar_null_mode(&prior, 5e4).unwrap();
            let g = -5e4 * b + prior.grad_1d(b);
            assert!(g.abs() < 1e-7 * 5e4 * b, "{g}");
        }
    }

    #[test]
    fn identity_ratio_for_truth() {
        let cfg = ExperimentConfig::gaussian(4, 2, vec![100]);
        let (data, _) = simulate_dataset(&cfg, 100, &make_stream(5)).unwrap();
        let a = fitted(&data, &cfg.support, &cfg.priors[0]).unwrap();
        let b = fitted(&data, &cfg.support, &cfg.priors[0]).unwrap();
        assert_eq!(a.log_marginal - b.log_marginal, 0.0);
    }

    #[test]
    fn supersets_are_distinct_and_nested() {
        let mut cfg = ExperimentConfig::gaussian(8, 2, vec![100]);
        cfg.q = 4;
        let sets = sample_supersets(&cfg, &make_stream(1));
        assert_eq!(sets.len(), 10);
        for (i, s) in sets.iter().enumerate() {
            assert!(s.is_strict_superset_of(&cfg.support));
            assert!(!sets[..i].contains(s));
        }
    }

    #[test]
    fn gaussian_diagnostics_are_constant() {
        let cfg = ExperimentConfig::gaussian(3, 2, vec![80]);
        let (d, _) = simulate_dataset(&cfg, 80, &make_stream(6)).unwrap();
        let m = ModelIndex::new(vec![0, 1]).unwrap();
        let pts = vec![
            DVector::from_vec(vec![0.2, -0.1]),
            DVector::from_vec(vec![1.0, 2.0]),
            DVector::from_vec(vec![-3.0, 0.5]),
        ];
        let diag = hessian_diagnostics(&d, &m, &pts).unwrap();
        let xj = d.x().select_columns(&[0, 1]);
        let g = xj.transpose() * &xj / 80.0;
        // closed-form eigenvalues of a symmetric 2x2
        let (a, b, c) = (g[(0, 0)], g[(0, 1)], g[(1, 1)]);
        let mid = 0.5 * (a + c);
        let rad = (0.25 * (a - c).powi(2) + b * b).sqrt();
        assert!((diag.c_l - (mid - rad)).abs() < 1e-6);
        assert!((diag.c_u - (mid + rad)).abs() < 1e-6);
        assert_eq!(diag.c_d, 0.0);
        assert!(diag.c1_max > 0.0);
    }

    #[test]
    fn identity_design_diagnostics() {
        let n = 4;
        let d = Dataset::new(vec![0.5, -0.2, 1.0, 0.0], DMatrix::identity(n, n), Family::Gaussian, 1.0).unwrap();
        let m = ModelIndex::new((0..n).collect()).unwrap();
        let diag = hessian_diagnostics(&d, &m, &[DVector::zeros(n)]).unwrap();
        assert!((diag.c_l - 0.25).abs() < 1e-9 && (diag.c_u - 0.25).abs() < 1e-9);
    }

    #[test]
    fn default_lambda_hits_one_percent() {
        for (delta, r) in [(0.2, 1.0), (0.5, 2.0)] {
            let lambda = default_lambda(delta, r).unwrap();
            let mass = NonlocalPrior::spimom(r, lambda).unwrap().central_mass(delta, 1e-13).unwrap();
            assert!((mass - 0.01).abs() < 1e-8, "{mass}");
        }
    }
}

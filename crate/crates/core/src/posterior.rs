//! Posterior mode and Laplace marginal likelihood for one submodel.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::glm::{fit_mle, Dataset, GlmFit, Submodel};
use crate::modelspace::ModelIndex;
use crate::numerics::{Cholesky, SpdMatrix, DEFAULT_PIVOT_TOL};
use crate::priors::LogPrior;

#[derive(Debug, Clone, Copy)]
pub struct ModeOptions {
    /// Converged once `‖∇ log posterior‖_∞ <= grad_tol * n`.
    pub grad_tol: f64,
    pub max_iter: usize,
    /// Lower bound on the nudge applied to zero MLE coordinates.
    pub min_nudge: f64,
}

impl Default for ModeOptions {
    fn default() -> Self {
        ModeOptions {
            grad_tol: 1e-8,
            max_iter: 200,
            min_nudge: 1e-4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PosteriorFit {
    pub model: ModelIndex,
    /// Posterior mode inside the (nudged) MLE orthant.
    pub beta_pm: DVector<f64>,
    /// `ℓ(β_pm) + log π(β_pm)`.
    pub log_post_unnorm: f64,
    pub loglik: f64,
    pub log_prior: f64,
    /// `H* = H(β_pm) - ∇² log π(β_pm)`.
    pub neg_hessian_logpost: SpdMatrix,
    /// Laplace log marginal likelihood; `-∞` when `H*` is not positive
    /// definite at the mode. NaN until [`laplace_log_marginal`] has run.
    pub log_marginal: f64,
    /// `log det H*`, when it exists.
    pub logdet: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
}

fn objective<P: LogPrior + ?Sized>(sub: &Submodel<'_>, prior: &P, beta: &DVector<f64>) -> Result<f64> {
    let lp = prior.log_density(beta);
    if lp == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(sub.log_likelihood(beta)? + lp)
}

fn neg_hessian_logpost<P: LogPrior + ?Sized>(
    sub: &Submodel<'_>,
    prior: &P,
    beta: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    let mut h = sub.neg_hessian(beta)?.into_inner();
    let d = prior.neg_hessian_diag(beta);
    for j in 0..beta.len() {
        h[(j, j)] += d[j];
    }
    Ok(h)
}

// Newton direction for the ascent; H* may be indefinite away from the mode,
// in which case a growing multiple of the identity is added.
fn ascent_direction(h: &DMatrix<f64>, g: &DVector<f64>) -> DVector<f64> {
    let k = h.nrows();
    let scale = (0..k).map(|i| h[(i, i)].abs()).fold(1e-12, f64::max);
    let mut shift = 0.0;
    for _ in 0..60 {
        let mut m = h.clone();
        for i in 0..k {
            m[(i, i)] += shift;
        }
        if let Ok(chol) = Cholesky::new(&SpdMatrix::symmetrized(m), DEFAULT_PIVOT_TOL) {
            return chol.solve(g);
        }
        shift = if shift == 0.0 { 1e-8 * scale } else { shift * 10.0 };
    }
    g / scale
}

/// Posterior mode of `ℓ(β) + log π(β)` for model `J`, started at the MLE.
///
/// Zero MLE coordinates are nudged to `+δ₀` with
/// `δ₀ = max((φ/n)^{1/(2+2ζ)}, 1e-4)`. When the prior has an origin barrier
/// any Newton step that would push a coordinate across zero is shortened so
/// that coordinate lands at half its current magnitude; step halving then
/// enforces ascent.
pub fn find_posterior_mode<P: LogPrior + ?Sized>(
    d: &Dataset,
    model: &ModelIndex,
    prior: &P,
    mle: &GlmFit,
) -> Result<PosteriorFit> {
    find_posterior_mode_with(d, model, prior, mle, ModeOptions::default())
}

pub fn find_posterior_mode_with<P: LogPrior + ?Sized>(
    d: &Dataset,
    model: &ModelIndex,
    prior: &P,
    mle: &GlmFit,
    opts: ModeOptions,
) -> Result<PosteriorFit> {
    if &mle.model != model {
        return Err(Error::InvalidInput(format!(
            "MLE was fitted for {} but the mode was requested for {model}",
            mle.model
        )));
    }
    let sub = Submodel::new(d, model)?;
    let k = sub.dim();
    let barrier = prior.origin_barrier();
    let nudge = prior.null_mode_scale(d.n()).max(opts.min_nudge);
    let mut beta = mle.beta_hat.map(|b| if barrier && b == 0.0 { nudge } else { b });
    let tol = opts.grad_tol * d.n() as f64;
    let mut f = objective(&sub, prior, &beta)?;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        let g = sub.score(&beta)? + prior.gradient(&beta);
        if g.amax() <= tol {
            converged = true;
            break;
        }
        let h = neg_hessian_logpost(&sub, prior, &beta)?;
        let dir = ascent_direction(&h, &g);
        iterations += 1;

        let mut t_max: f64 = 1.0;
        if barrier {
            for j in 0..k {
                let next = beta[j] + dir[j];
                if next == 0.0 || next.signum() != beta[j].signum() {
                    // stop at beta_j / 2
                    t_max = t_max.min(0.5 * beta[j].abs() / dir[j].abs());
                }
            }
        }
        let slack = 4.0 * f64::EPSILON * f.abs().max(1.0);
        let mut t = t_max;
        let mut accepted = false;
        for _ in 0..60 {
            let cand = &beta + &dir * t;
            let fc = objective(&sub, prior, &cand)?;
            if fc.is_finite() && fc >= f - slack {
                beta = cand;
                f = fc;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if !converged {
        let g = sub.score(&beta)? + prior.gradient(&beta);
        converged = g.amax() <= tol;
    }

    let loglik = sub.log_likelihood(&beta)?;
    let log_prior = prior.log_density(&beta);
    let h = SpdMatrix::symmetrized(neg_hessian_logpost(&sub, prior, &beta)?);
    Ok(PosteriorFit {
        model: model.clone(),
        beta_pm: beta,
        log_post_unnorm: loglik + log_prior,
        loglik,
        log_prior,
        neg_hessian_logpost: h,
        log_marginal: f64::NAN,
        logdet: None,
        converged,
        iterations,
    })
}

/// `(|J|/2) log 2π − ½ log det H* + ℓ(β_pm) + log π(β_pm)`.
///
/// Exact `ℓ` for the empty model. Fails with `NotPositiveDefinite` when
/// `H*` does not factor.
pub fn laplace_log_marginal(pm: &PosteriorFit) -> Result<f64> {
    laplace_parts(pm).map(|(lm, _)| lm)
}

fn laplace_parts(pm: &PosteriorFit) -> Result<(f64, f64)> {
    let k = pm.model.len();
    if k == 0 {
        return Ok((pm.loglik, 0.0));
    }
    let logdet = Cholesky::new(&pm.neg_hessian_logpost, DEFAULT_PIVOT_TOL)?.logdet();
    let lm = 0.5 * k as f64 * (2.0 * PI).ln() - 0.5 * logdet + pm.log_post_unnorm;
    Ok((lm, logdet))
}

/// MLE, posterior mode and Laplace marginal in one call. A saddle at the
/// mode yields `log_marginal = -∞` rather than an error.
pub fn fit_model<P: LogPrior + ?Sized>(
    d: &Dataset,
    model: &ModelIndex,
    prior: &P,
) -> Result<PosteriorFit> {
    let mle = fit_mle(d, model)?;
    let mut pm = find_posterior_mode(d, model, prior, &mle)?;
    finish(&mut pm);
    Ok(pm)
}

pub(crate) fn finish(pm: &mut PosteriorFit) {
    match laplace_parts(pm) {
        Ok((lm, logdet)) => {
            pm.log_marginal = lm;
            pm.logdet = Some(logdet);
        }
        Err(_) => {
            pm.log_marginal = f64::NEG_INFINITY;
            pm.logdet = None;
        }
    }
}

/// Laplace log marginal of model `J`, or `-∞` when the model cannot be
/// fitted (rank-deficient design, saddle at the mode, separation).
pub fn score_model<P: LogPrior + ?Sized>(d: &Dataset, model: &ModelIndex, prior: &P) -> f64 {
    match fit_mle(d, model) {
        Ok(mle) if !mle.separated => match find_posterior_mode(d, model, prior, &mle) {
            Ok(mut pm) => {
                finish(&mut pm);
                pm.log_marginal
            }
            Err(_) => f64::NEG_INFINITY,
        },
        _ => f64::NEG_INFINITY,
    }
}

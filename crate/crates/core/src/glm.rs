//! Canonical-link exponential-family likelihoods.
//!
//! Per observation the log density is `(y θ - b(θ)) / φ + log c(y)` with
//! `θ = x_Jᵀ β`, `φ` the known Gaussian variance (1 otherwise). All
//! normalizing constants are kept so log-likelihoods are comparable across
//! models.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::modelspace::ModelIndex;
use crate::numerics::{Cholesky, SpdMatrix, DEFAULT_PIVOT_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// Normal response with known variance.
    Gaussian,
    /// Bernoulli response with logit link.
    Logistic,
    /// Count response with log link.
    Poisson,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::Logistic => "logistic",
            Family::Poisson => "poisson",
        }
    }

    pub fn parse(s: &str) -> Option<Family> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Some(Family::Gaussian),
            "logistic" | "binomial" => Some(Family::Logistic),
            "poisson" => Some(Family::Poisson),
            _ => None,
        }
    }

    /// Cumulant function `b(θ)`.
    pub fn cumulant(self, theta: f64) -> f64 {
        match self {
            Family::Gaussian => 0.5 * theta * theta,
            Family::Logistic => softplus(theta),
            Family::Poisson => theta.exp(),
        }
    }

    /// Mean function `b'(θ)`.
    pub fn mean(self, theta: f64) -> f64 {
        match self {
            Family::Gaussian => theta,
            Family::Logistic => sigmoid(theta),
            Family::Poisson => theta.exp(),
        }
    }

    /// Variance function `b''(θ)`.
    pub fn variance(self, theta: f64) -> f64 {
        match self {
            Family::Gaussian => 1.0,
            Family::Logistic => {
                let p = sigmoid(theta);
                p * (1.0 - p)
            }
            Family::Poisson => theta.exp(),
        }
    }

    fn log_base_measure(self, y: f64, dispersion: f64) -> f64 {
        match self {
            Family::Gaussian => {
                -0.5 * y * y / dispersion - 0.5 * (2.0 * std::f64::consts::PI * dispersion).ln()
            }
            Family::Logistic => 0.0,
            Family::Poisson => -ln_gamma(y + 1.0),
        }
    }

    fn check_support(self, index: usize, y: f64) -> Result<()> {
        let ok = match self {
            Family::Gaussian => true,
            Family::Logistic => y == 0.0 || y == 1.0,
            Family::Poisson => y >= 0.0 && y.fract() == 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::FamilySupport {
                family: self.name(),
                index,
                value: y,
            })
        }
    }
}

fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone)]
struct Gram {
    xtx: DMatrix<f64>,
    xty: DVector<f64>,
    log_base: f64,
}

/// Response vector, design matrix and family. No intercept is implied; add a
/// constant column when one is wanted.
#[derive(Debug, Clone)]
pub struct Dataset {
    y: DVector<f64>,
    x: DMatrix<f64>,
    family: Family,
    dispersion: f64,
    log_base: f64,
    gram: OnceLock<Gram>,
}

impl Dataset {
    /// `x` is `n × p`; `dispersion` is the Gaussian variance and must be 1 for
    /// the other families.
    pub fn new(y: Vec<f64>, x: DMatrix<f64>, family: Family, dispersion: f64) -> Result<Self> {
        let n = y.len();
        if n == 0 || x.ncols() == 0 {
            return Err(Error::Dimension("dataset needs n >= 1 and p >= 1".into()));
        }
        if x.nrows() != n {
            return Err(Error::Dimension(format!(
                "design has {} rows but response has {n}",
                x.nrows()
            )));
        }
        if !(dispersion > 0.0 && dispersion.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "dispersion must be positive, got {dispersion}"
            )));
        }
        if family != Family::Gaussian && dispersion != 1.0 {
            return Err(Error::InvalidInput(format!(
                "dispersion is fixed at 1 for the {} family",
                family.name()
            )));
        }
        if let Some((i, v)) = y.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite response {v} at row {i}")));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite entry in design".into()));
        }
        for (i, &v) in y.iter().enumerate() {
            family.check_support(i, v)?;
        }
        let log_base = y.iter().map(|&v| family.log_base_measure(v, dispersion)).sum();
        Ok(Dataset {
            y: DVector::from_vec(y),
            x,
            family,
            dispersion,
            log_base,
            gram: OnceLock::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn dispersion(&self) -> f64 {
        self.dispersion
    }

    fn gram(&self) -> &Gram {
        self.gram.get_or_init(|| Gram {
            xtx: self.x.transpose() * &self.x,
            xty: self.x.transpose() * &self.y,
            log_base: self.log_base,
        })
    }
}

enum Kernel {
    // Gaussian log-likelihood only needs the sufficient statistics.
    Gaussian {
        xtx: DMatrix<f64>,
        xty: DVector<f64>,
    },
    General {
        xj: DMatrix<f64>,
    },
}

/// Likelihood of one submodel `J`, with `X_J` (or its Gram matrix) gathered
/// once for repeated evaluation.
pub struct Submodel<'a> {
    data: &'a Dataset,
    model: ModelIndex,
    kernel: Kernel,
}

impl<'a> Submodel<'a> {
    pub fn new(data: &'a Dataset, model: &ModelIndex) -> Result<Self> {
        if model.min_columns() > data.p() {
            return Err(Error::Dimension(format!(
                "model {model} references a column beyond p = {}",
                data.p()
            )));
        }
        let cols = model.indices();
        let kernel = match data.family {
            Family::Gaussian => {
                let g = data.gram();
                let k = cols.len();
                Kernel::Gaussian {
                    xtx: DMatrix::from_fn(k, k, |i, j| g.xtx[(cols[i], cols[j])]),
                    xty: DVector::from_fn(k, |i, _| g.xty[cols[i]]),
                }
            }
            _ => Kernel::General {
                xj: data.x.select_columns(cols),
            },
        };
        Ok(Submodel {
            data,
            model: model.clone(),
            kernel,
        })
    }

    pub fn dim(&self) -> usize {
        self.model.len()
    }

    pub fn model(&self) -> &ModelIndex {
        &self.model
    }

    pub fn data(&self) -> &Dataset {
        self.data
    }

    fn check(&self, beta: &DVector<f64>) -> Result<()> {
        if beta.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "beta has length {} but model {} has {} columns",
                beta.len(),
                self.model,
                self.dim()
            )));
        }
        Ok(())
    }

    fn eta(&self, xj: &DMatrix<f64>, beta: &DVector<f64>) -> DVector<f64> {
        if beta.is_empty() {
            DVector::zeros(self.data.n())
        } else {
            xj * beta
        }
    }

    pub fn log_likelihood(&self, beta: &DVector<f64>) -> Result<f64> {
        self.check(beta)?;
        let d = self.data;
        Ok(match &self.kernel {
            Kernel::Gaussian { xtx, xty } => {
                let quad = if beta.is_empty() {
                    0.0
                } else {
                    beta.dot(xty) - 0.5 * (beta.transpose() * xtx * beta)[(0, 0)]
                };
                quad / d.dispersion + d.gram().log_base
            }
            Kernel::General { xj } => {
                let eta = self.eta(xj, beta);
                let fam = d.family;
                eta.iter()
                    .zip(d.y.iter())
                    .map(|(&t, &y)| y * t - fam.cumulant(t))
                    .sum::<f64>()
                    + d.log_base
            }
        })
    }

    pub fn score(&self, beta: &DVector<f64>) -> Result<DVector<f64>> {
        self.check(beta)?;
        let d = self.data;
        Ok(match &self.kernel {
            Kernel::Gaussian { xtx, xty } => (xty - xtx * beta) / d.dispersion,
            Kernel::General { xj } => {
                let eta = self.eta(xj, beta);
                let resid = DVector::from_fn(d.n(), |i, _| d.y[i] - d.family.mean(eta[i]));
                xj.tr_mul(&resid)
            }
        })
    }

    /// `X_Jᵀ W X_J` with `W = diag(b''(θ)) / φ`.
    pub fn neg_hessian(&self, beta: &DVector<f64>) -> Result<SpdMatrix> {
        self.check(beta)?;
        let d = self.data;
        Ok(match &self.kernel {
            Kernel::Gaussian { xtx, .. } => SpdMatrix::symmetrized(xtx / d.dispersion),
            Kernel::General { xj } => {
                let eta = self.eta(xj, beta);
                let mut wx = xj.clone();
                for (i, mut row) in wx.row_iter_mut().enumerate() {
                    row *= d.family.variance(eta[i]);
                }
                SpdMatrix::symmetrized(xj.tr_mul(&wx))
            }
        })
    }

    /// `max_{i,j} |x_ij (y_i - b'(x_iᵀ β))|` over the model's columns.
    pub fn max_score_contribution(&self, beta: &DVector<f64>) -> Result<f64> {
        self.check(beta)?;
        let d = self.data;
        let xj = d.x.select_columns(self.model.indices());
        let eta = self.eta(&xj, beta);
        let mut worst = 0.0_f64;
        for i in 0..d.n() {
            let r = d.y[i] - d.family.mean(eta[i]);
            for j in 0..xj.ncols() {
                worst = worst.max((xj[(i, j)] * r).abs());
            }
        }
        Ok(worst)
    }
}

pub fn log_likelihood(d: &Dataset, model: &ModelIndex, beta: &DVector<f64>) -> Result<f64> {
    Submodel::new(d, model)?.log_likelihood(beta)
}

pub fn score(d: &Dataset, model: &ModelIndex, beta: &DVector<f64>) -> Result<DVector<f64>> {
    Submodel::new(d, model)?.score(beta)
}

pub fn neg_hessian(d: &Dataset, model: &ModelIndex, beta: &DVector<f64>) -> Result<SpdMatrix> {
    Submodel::new(d, model)?.neg_hessian(beta)
}

#[derive(Debug, Clone, Copy)]
pub struct MleOptions {
    /// Converged once `‖score‖_∞ <= score_tol * n`.
    pub score_tol: f64,
    pub max_iter: usize,
    /// Logistic fits whose `‖β‖_∞` exceeds this are flagged as separated.
    pub separation_cap: f64,
}

impl Default for MleOptions {
    fn default() -> Self {
        MleOptions {
            score_tol: 1e-8,
            max_iter: 100,
            separation_cap: 30.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GlmFit {
    pub model: ModelIndex,
    pub beta_hat: DVector<f64>,
    pub loglik: f64,
    pub converged: bool,
    /// The logistic MLE appears not to exist (quasi-complete separation).
    pub separated: bool,
    pub iterations: usize,
    pub neg_hessian: SpdMatrix,
}

pub fn fit_mle(d: &Dataset, model: &ModelIndex) -> Result<GlmFit> {
    fit_mle_with(d, model, MleOptions::default())
}

const STEP_TOL: f64 = 1e-6;

/// Damped Newton ascent from `β = 0`, halving the step until the
/// log-likelihood does not decrease. Converged once the score is within
/// tolerance and the Newton step is negligible.
pub fn fit_mle_with(d: &Dataset, model: &ModelIndex, opts: MleOptions) -> Result<GlmFit> {
    let sub = Submodel::new(d, model)?;
    let k = sub.dim();
    let tol = opts.score_tol * d.n() as f64;
    let mut beta = DVector::zeros(k);
    let mut ll = sub.log_likelihood(&beta)?;
    let mut converged = false;
    let mut separated = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        let g = sub.score(&beta)?;
        let h = sub.neg_hessian(&beta)?;
        let step = Cholesky::new(&h, DEFAULT_PIVOT_TOL)?.solve(&g);
        // A small score alone is not enough: under separation the score
        // vanishes while Newton keeps taking unit-sized steps.
        if g.amax() <= tol && step.amax() <= STEP_TOL * (1.0 + beta.amax()) {
            converged = true;
            break;
        }
        iterations += 1;
        let slack = 4.0 * f64::EPSILON * ll.abs().max(1.0);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand = &beta + &step * t;
            let lc = sub.log_likelihood(&cand)?;
            if lc.is_finite() && lc >= ll - slack {
                beta = cand;
                ll = lc;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
        if d.family == Family::Logistic && beta.amax() > opts.separation_cap {
            separated = true;
            break;
        }
    }
    let neg_hessian = sub.neg_hessian(&beta)?;
    Ok(GlmFit {
        model: model.clone(),
        beta_hat: beta,
        loglik: ll,
        converged,
        separated,
        iterations,
        neg_hessian,
    })
}

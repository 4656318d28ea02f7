//! Nonlocal coefficient priors.
//!
//! Both priors are products of independent per-coordinate densities that
//! vanish at zero:
//!
//! * piMOM: `τ^{r/2} / Γ(r/2) · |β|^{-(r+1)} · exp(-τ/β²)`
//! * spiMOM: `K · |β|^{-(r+1)} · exp(-2√λ/|β|)` with
//!   `K = λ^{(r+1)/2} √π / (Γ(r/2) Γ((r+1)/2) √λ)`, the exact result of
//!   mixing piMOM over `τ ~ InvGamma((r+1)/2, λ)`.
//!
//! The commonly quoted spiMOM constant carries an extra factor ½; it is
//! available via [`NonlocalPrior::with_paper_constant`] and yields a density
//! that integrates to ½.

use std::f64::consts::PI;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::numerics::{adaptive_quad_with, QuadOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorKind {
    Pimom,
    Spimom,
}

impl PriorKind {
    pub fn name(self) -> &'static str {
        match self {
            PriorKind::Pimom => "pimom",
            PriorKind::Spimom => "spimom",
        }
    }

    pub fn parse(s: &str) -> Option<PriorKind> {
        match s.to_ascii_lowercase().as_str() {
            "pimom" => Some(PriorKind::Pimom),
            "spimom" => Some(PriorKind::Spimom),
            _ => None,
        }
    }
}

/// Log prior interface used by the posterior-mode optimizer.
///
/// `gradient` and `neg_hessian_diag` are only called at points with every
/// coordinate nonzero when `origin_barrier` is true.
pub trait LogPrior: Sync {
    fn log_density(&self, beta: &DVector<f64>) -> f64;
    fn gradient(&self, beta: &DVector<f64>) -> DVector<f64>;
    /// Diagonal of `-∇² log π`; coordinates are independent.
    fn neg_hessian_diag(&self, beta: &DVector<f64>) -> DVector<f64>;
    /// Whether the density vanishes on every coordinate hyperplane.
    fn origin_barrier(&self) -> bool {
        true
    }
    /// Order of magnitude of the posterior mode of a null coordinate at
    /// sample size `n`.
    fn null_mode_scale(&self, n: usize) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonlocalPrior {
    pub kind: PriorKind,
    /// Shape `r > 0`.
    pub r: f64,
    /// `τ` for piMOM, `λ` for spiMOM.
    pub scale: f64,
    /// Use the halved spiMOM constant. Ignored for piMOM.
    #[serde(default)]
    pub paper_constant: bool,
}

impl NonlocalPrior {
    pub fn new(kind: PriorKind, r: f64, scale: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidInput(format!("prior shape r must be positive, got {r}")));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "prior scale must be positive, got {scale}"
            )));
        }
        Ok(NonlocalPrior {
            kind,
            r,
            scale,
            paper_constant: false,
        })
    }

    pub fn pimom(r: f64, tau: f64) -> Result<Self> {
        Self::new(PriorKind::Pimom, r, tau)
    }

    pub fn spimom(r: f64, lambda: f64) -> Result<Self> {
        Self::new(PriorKind::Spimom, r, lambda)
    }

    pub fn with_paper_constant(mut self, on: bool) -> Self {
        self.paper_constant = on;
        self
    }

    /// Kernel exponent: 1 for piMOM, ½ for spiMOM.
    pub fn zeta(&self) -> f64 {
        match self.kind {
            PriorKind::Pimom => 1.0,
            PriorKind::Spimom => 0.5,
        }
    }

    /// Log normalizing constant of one coordinate.
    pub fn log_constant(&self) -> f64 {
        let r = self.r;
        match self.kind {
            PriorKind::Pimom => 0.5 * r * self.scale.ln() - ln_gamma(0.5 * r),
            PriorKind::Spimom => {
                let exact = 0.5 * r * self.scale.ln() + 0.5 * PI.ln()
                    - ln_gamma(0.5 * r)
                    - ln_gamma(0.5 * (r + 1.0));
                if self.paper_constant {
                    exact - std::f64::consts::LN_2
                } else {
                    exact
                }
            }
        }
    }

    /// Exponential kernel term subtracted in the log density: `τ/β²` or
    /// `2√λ/|β|`.
    pub fn kernel(&self, b: f64) -> f64 {
        match self.kind {
            PriorKind::Pimom => self.scale / (b * b),
            PriorKind::Spimom => 2.0 * self.scale.sqrt() / b.abs(),
        }
    }

    /// One-coordinate log density; `-∞` at zero.
    pub fn log_density_1d(&self, b: f64) -> f64 {
        if b == 0.0 {
            return f64::NEG_INFINITY;
        }
        self.log_constant() - (self.r + 1.0) * b.abs().ln() - self.kernel(b)
    }

    pub fn density_1d(&self, b: f64) -> f64 {
        self.log_density_1d(b).exp()
    }

    pub fn grad_1d(&self, b: f64) -> f64 {
        let poly = -(self.r + 1.0) / b;
        match self.kind {
            PriorKind::Pimom => poly + 2.0 * self.scale / (b * b * b),
            PriorKind::Spimom => poly + 2.0 * self.scale.sqrt() * b.signum() / (b * b),
        }
    }

    /// `-d²/db² log π(b)`.
    pub fn neg_hess_1d(&self, b: f64) -> f64 {
        let b2 = b * b;
        let poly = (self.r + 1.0) / b2;
        let second = match self.kind {
            PriorKind::Pimom => poly - 6.0 * self.scale / (b2 * b2),
            PriorKind::Spimom => poly - 4.0 * self.scale.sqrt() / (b2 * b.abs()),
        };
        -second
    }

    /// Positive prior mode of one coordinate: `(2τ/(r+1))^{1/2}` or
    /// `2√λ/(r+1)`.
    pub fn mode_1d(&self) -> f64 {
        match self.kind {
            PriorKind::Pimom => (2.0 * self.scale / (self.r + 1.0)).sqrt(),
            PriorKind::Spimom => 2.0 * self.scale.sqrt() / (self.r + 1.0),
        }
    }

    /// `∫ π(b) db` over the real line by adaptive quadrature. 1 for the exact
    /// constants, ½ for spiMOM in paper-constant mode.
    pub fn normalization_integral(&self, tol: f64) -> Result<f64> {
        let opts = QuadOptions {
            tol: 0.5 * tol,
            ..QuadOptions::default()
        };
        let f = |b: f64| self.density_1d(b);
        let neg = adaptive_quad_with(f, f64::NEG_INFINITY, 0.0, opts)?;
        let pos = adaptive_quad_with(f, 0.0, f64::INFINITY, opts)?;
        Ok(neg + pos)
    }

    /// Prior mass of `(-delta, delta)`, using the exact (normalized) constant.
    pub fn central_mass(&self, delta: f64, tol: f64) -> Result<f64> {
        let exact = self.with_paper_constant(false);
        let half = adaptive_quad_with(
            |b| exact.density_1d(b),
            0.0,
            delta,
            QuadOptions {
                tol: 0.5 * tol,
                ..QuadOptions::default()
            },
        )?;
        Ok(2.0 * half)
    }

    fn expect(&self, kind: PriorKind) -> Result<()> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(Error::WrongPriorKind {
                expected: kind.name(),
                got: self.kind.name(),
            })
        }
    }
}

impl LogPrior for NonlocalPrior {
    fn log_density(&self, beta: &DVector<f64>) -> f64 {
        beta.iter().map(|&b| self.log_density_1d(b)).sum()
    }

    fn gradient(&self, beta: &DVector<f64>) -> DVector<f64> {
        beta.map(|b| self.grad_1d(b))
    }

    fn neg_hessian_diag(&self, beta: &DVector<f64>) -> DVector<f64> {
        beta.map(|b| self.neg_hess_1d(b))
    }

    fn null_mode_scale(&self, n: usize) -> f64 {
        (self.scale / n.max(1) as f64).powf(1.0 / (2.0 + 2.0 * self.zeta()))
    }
}

/// piMOM log density; `-∞` when any coordinate is zero.
pub fn log_pimom(beta: &DVector<f64>, prior: &NonlocalPrior) -> Result<f64> {
    prior.expect(PriorKind::Pimom)?;
    Ok(prior.log_density(beta))
}

/// spiMOM log density; `-∞` when any coordinate is zero.
pub fn log_spimom(beta: &DVector<f64>, prior: &NonlocalPrior) -> Result<f64> {
    prior.expect(PriorKind::Spimom)?;
    Ok(prior.log_density(beta))
}

fn check_nonzero(beta: &DVector<f64>) -> Result<()> {
    match beta.iter().position(|&b| b == 0.0) {
        Some(j) => Err(Error::AtOrigin(j)),
        None => Ok(()),
    }
}

pub fn log_prior_grad(beta: &DVector<f64>, prior: &NonlocalPrior) -> Result<DVector<f64>> {
    check_nonzero(beta)?;
    Ok(prior.gradient(beta))
}

/// Raw diagonal of the prior's negative Hessian. May be negative away from
/// the prior mode.
pub fn log_prior_neg_hessian(beta: &DVector<f64>, prior: &NonlocalPrior) -> Result<DVector<f64>> {
    check_nonzero(beta)?;
    Ok(prior.neg_hessian_diag(beta))
}

/// `∫_0^∞ piMOM(b | r, τ) · InvGamma(τ | (r+1)/2, λ) dτ` by adaptive
/// quadrature, to absolute accuracy `1e-10` relative to the integrand's peak.
pub fn spimom_mixture_quad(b: f64, r: f64, lambda: f64) -> Result<f64> {
    if b == 0.0 {
        return Err(Error::AtOrigin(0));
    }
    let shape = 0.5 * (r + 1.0);
    let log_ig_const = shape * lambda.ln() - ln_gamma(shape);
    let pimom_const = -ln_gamma(0.5 * r) - (r + 1.0) * b.abs().ln();
    let b2 = b * b;
    let log_integrand = |tau: f64| {
        if tau <= 0.0 || !tau.is_finite() {
            return f64::NEG_INFINITY;
        }
        let lt = tau.ln();
        let pimom = 0.5 * r * lt + pimom_const - tau / b2;
        let ig = log_ig_const - (shape + 1.0) * lt - lambda / tau;
        pimom + ig
    };
    // Scale by the integrand's maximum so the absolute tolerance is
    // meaningful whatever the magnitude of the result.
    let peak = log_peak(&log_integrand);
    let value = adaptive_quad_with(
        |t| (log_integrand(t) - peak).exp(),
        0.0,
        f64::INFINITY,
        QuadOptions {
            tol: 1e-10,
            max_intervals: 20_000,
        },
    )?;
    Ok(value * peak.exp())
}

// Maximum of a unimodal log integrand on (0, ∞) by a log-spaced scan followed
// by golden-section refinement.
fn log_peak<F: Fn(f64) -> f64>(f: &F) -> f64 {
    let mut best_s: f64 = -40.0;
    let mut best = f64::NEG_INFINITY;
    let mut s: f64 = -40.0;
    while s <= 40.0 {
        let v = f(s.exp());
        if v > best {
            best = v;
            best_s = s;
        }
        s += 0.25;
    }
    let (mut a, mut c) = (best_s - 0.25, best_s + 0.25);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        let x1 = c - g * (c - a);
        let x2 = a + g * (c - a);
        if f(x1.exp()) > f(x2.exp()) {
            c = x2;
        } else {
            a = x1;
        }
    }
    best.max(f((0.5 * (a + c)).exp()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(xs)
    }

    #[test]
    fn pimom_closed_form_values() {
        let p = NonlocalPrior::pimom(1.0, 1.0).unwrap();
        let one = log_pimom(&v(&[1.0]), &p).unwrap();
        assert_relative_eq!(one, (-1.0f64).exp().ln() - PI.sqrt().ln(), epsilon = 1e-14);
        assert_relative_eq!(one, -1.57236, epsilon = 1e-5);
        assert_relative_eq!(log_pimom(&v(&[1.0, 1.0]), &p).unwrap(), 2.0 * one, epsilon = 1e-14);
        assert_eq!(log_pimom(&v(&[0.0, 1.0]), &p).unwrap(), f64::NEG_INFINITY);
        assert!(log_spimom(&v(&[1.0]), &p).is_err());
    }

    #[test]
    fn spimom_closed_form_values() {
        let s = NonlocalPrior::spimom(1.0, 1.0).unwrap();
        assert_relative_eq!(log_spimom(&v(&[1.0]), &s).unwrap(), -2.0, epsilon = 1e-14);
        let paper = s.with_paper_constant(true);
        assert_relative_eq!(
            log_spimom(&v(&[1.0]), &paper).unwrap(),
            -2.0 - 2f64.ln(),
            epsilon = 1e-14
        );
        for b in [0.3, 1.7, 12.0] {
            assert_eq!(
                log_spimom(&v(&[-b]), &s).unwrap(),
                log_spimom(&v(&[b]), &s).unwrap()
            );
        }
    }

    #[test]
    fn mixture_quadrature_values() {
        assert_relative_eq!(spimom_mixture_quad(1.0, 1.0, 1.0).unwrap(), (-2.0f64).exp(), max_relative = 1e-9);
        assert_relative_eq!(
            spimom_mixture_quad(2.0, 1.0, 1.0).unwrap(),
            0.25 * (-1.0f64).exp(),
            max_relative = 1e-9
        );
        assert!(spimom_mixture_quad(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn mixture_quadrature_integrates_to_one() {
        let f = |b: f64| spimom_mixture_quad(b, 1.0, 1.0).unwrap_or(0.0);
        let opts = QuadOptions { tol: 1e-8, max_intervals: 4000 };
        let total = adaptive_quad_with(f, f64::NEG_INFINITY, 0.0, opts).unwrap()
            + adaptive_quad_with(f, 0.0, f64::INFINITY, opts).unwrap();
        assert!((total - 1.0).abs() < 1e-6, "{total}");
    }

    #[test]
    fn stationary_points_at_prior_modes() {
        let p = NonlocalPrior::pimom(1.0, 1.0).unwrap();
        assert_eq!(log_prior_grad(&v(&[1.0]), &p).unwrap()[0], 0.0);
        let s = NonlocalPrior::spimom(1.0, 1.0).unwrap();
        assert_eq!(log_prior_grad(&v(&[1.0]), &s).unwrap()[0], 0.0);
        assert_eq!(p.mode_1d(), 1.0);
        assert_eq!(s.mode_1d(), 1.0);
        assert!(matches!(log_prior_grad(&v(&[1.0, 0.0]), &s), Err(Error::AtOrigin(1))));
    }

    #[test]
    fn neg_hessian_entries() {
        let p = NonlocalPrior::pimom(1.0, 1.0).unwrap();
        let s = NonlocalPrior::spimom(1.0, 1.0).unwrap();
        assert_eq!(log_prior_neg_hessian(&v(&[1.0]), &p).unwrap()[0], 4.0);
        assert_eq!(log_prior_neg_hessian(&v(&[1.0]), &s).unwrap()[0], 2.0);
        for b in [0.2, 0.9, 3.0] {
            assert_eq!(p.neg_hess_1d(b), p.neg_hess_1d(-b));
            assert_eq!(s.neg_hess_1d(b), s.neg_hess_1d(-b));
        }
        // finite differences of the gradient
        for prior in [p, s] {
            for b in [-2.3f64, -0.4, 0.35, 1.1, 4.0] {
                let h = 1e-5 * b.abs();
                let fd = -(prior.grad_1d(b + h) - prior.grad_1d(b - h)) / (2.0 * h);
                assert_relative_eq!(prior.neg_hess_1d(b), fd, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn normalization_for_both_constants() {
        for r in [1.0, 2.0, 3.0] {
            for phi in [0.1, 1.0, 10.0] {
                let p = NonlocalPrior::pimom(r, phi).unwrap();
                let z = p.normalization_integral(1e-10).unwrap();
                assert!((z - 1.0).abs() < 1e-6, "pimom r={r} tau={phi}: {z}");
            }
        }
        let half = NonlocalPrior::spimom(2.0, 0.1)
            .unwrap()
            .with_paper_constant(true)
            .normalization_integral(1e-10)
            .unwrap();
        assert!((half - 0.5).abs() < 1e-6);
    }

    #[test]
    fn polynomial_tail_order() {
        for r in [1.0, 2.0] {
            for lambda in [0.5, 2.0, 10.0] {
                let s = NonlocalPrior::spimom(r, lambda).unwrap();
                let b: f64 = 1e3;
                let scaled = s.density_1d(b) * b.powf(r + 1.0);
                let k = s.log_constant().exp();
                assert!((scaled / k - 1.0).abs() < 0.01);
            }
        }
    }

    #[test]
    fn invalid_hyperparameters() {
        assert!(NonlocalPrior::pimom(0.0, 1.0).is_err());
        assert!(NonlocalPrior::spimom(1.0, -1.0).is_err());
        assert!(NonlocalPrior::spimom(1.0, f64::NAN).is_err());
    }
}

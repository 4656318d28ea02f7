//! Adaptive Gauss-Kronrod (7/15) quadrature.
//!
//! Infinite endpoints are mapped onto a finite range with `x = a + u/(1-u)`
//! (or its mirror), which never evaluates the integrand at the mapped
//! endpoints. A doubly infinite range is split at zero.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

pub const DEFAULT_QUAD_TOL: f64 = 1e-8;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
// Gauss weights for the nodes XGK[1], XGK[3], XGK[5] and the centre.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    /// Absolute error target.
    pub tol: f64,
    /// Maximum number of subintervals before giving up.
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            tol: DEFAULT_QUAD_TOL,
            max_intervals: 4000,
        }
    }
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for (i, (&x, &w)) in XGK[..7].iter().zip(WGK[..7].iter()).enumerate() {
        let dx = half * x;
        let pair = f(centre - dx) + f(centre + dx);
        k += w * pair;
        if i % 2 == 1 {
            g += WG[i / 2] * pair;
        }
    }
    Panel {
        a,
        b,
        value: k * half,
        error: ((k - g) * half).abs(),
    }
}

fn integrate_finite<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, opts: QuadOptions) -> Result<f64> {
    let mut heap = BinaryHeap::new();
    let first = kronrod(f, lo, hi);
    let mut total = first.value;
    let mut err = first.error;
    heap.push(first);
    while err > opts.tol {
        if !total.is_finite() || !err.is_finite() {
            return Err(Error::InvalidInput(
                "integrand produced a non-finite value".into(),
            ));
        }
        if heap.len() >= opts.max_intervals {
            return Err(Error::NoConvergence {
                error: err,
                intervals: heap.len(),
            });
        }
        let worst = heap.pop().expect("heap is never empty here");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Panel cannot be split further in floating point.
            return Err(Error::NoConvergence {
                error: err,
                intervals: heap.len() + 1,
            });
        }
        let left = kronrod(f, worst.a, mid);
        let right = kronrod(f, mid, worst.b);
        total += left.value + right.value - worst.value;
        err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        // Re-sum occasionally so the running totals do not drift.
        if heap.len() % 64 == 0 {
            total = heap.iter().map(|p| p.value).sum();
            err = heap.iter().map(|p| p.error).sum();
        }
    }
    Ok(heap.iter().map(|p| p.value).sum())
}

/// `∫_lo^hi f(x) dx` to absolute tolerance `tol`; either bound may be infinite.
pub fn adaptive_quad<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    adaptive_quad_with(
        f,
        lo,
        hi,
        QuadOptions {
            tol,
            ..QuadOptions::default()
        },
    )
}

pub fn adaptive_quad_with<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    opts: QuadOptions,
) -> Result<f64> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidInput(format!(
            "quadrature tolerance must be positive, got {}",
            opts.tol
        )));
    }
    if lo.is_nan() || hi.is_nan() {
        return Err(Error::InvalidInput("NaN integration bound".into()));
    }
    if lo == hi {
        return Ok(0.0);
    }
    if lo > hi {
        return integrate_range(&f, hi, lo, opts).map(|v| -v);
    }
    integrate_range(&f, lo, hi, opts)
}

fn integrate_range<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, opts: QuadOptions) -> Result<f64> {
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => integrate_finite(f, lo, hi, opts),
        (true, false) => upper_tail(f, lo, opts),
        (false, true) => lower_tail(f, hi, opts),
        (false, false) => {
            let half = QuadOptions {
                tol: 0.5 * opts.tol,
                ..opts
            };
            Ok(lower_tail(f, 0.0, half)? + upper_tail(f, 0.0, half)?)
        }
    }
}

fn upper_tail<F: Fn(f64) -> f64>(f: &F, lo: f64, opts: QuadOptions) -> Result<f64> {
    let g = |u: f64| {
        let v = 1.0 - u;
        f(lo + u / v) / (v * v)
    };
    integrate_finite(&g, 0.0, 1.0, opts)
}

fn lower_tail<F: Fn(f64) -> f64>(f: &F, hi: f64, opts: QuadOptions) -> Result<f64> {
    let g = |u: f64| {
        let v = 1.0 - u;
        f(hi - u / v) / (v * v)
    };
    integrate_finite(&g, 0.0, 1.0, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn linear_on_unit_interval() {
        let v = adaptive_quad(|x| x, 0.0, 1.0, 1e-12).unwrap();
        assert!((v - 0.5).abs() < 1e-14);
    }

    #[test]
    fn cubic_is_exact_per_panel() {
        let v = adaptive_quad(|x| 4.0 * x * x * x - 3.0 * x * x + x - 7.0, -2.0, 3.0, 1e-12).unwrap();
        // antiderivative x^4 - x^3 + x^2/2 - 7x
        let p = |x: f64| x.powi(4) - x.powi(3) + 0.5 * x * x - 7.0 * x;
        assert!((v - (p(3.0) - p(-2.0))).abs() < 1e-10);
    }

    #[test]
    fn normal_density_over_real_line() {
        let v = adaptive_quad(
            |x| (-0.5 * x * x).exp() / (2.0 * PI).sqrt(),
            f64::NEG_INFINITY,
            f64::INFINITY,
            1e-10,
        )
        .unwrap();
        assert!((v - 1.0).abs() < 1e-8);
    }

    fn bessel_integrand(t: f64) -> f64 {
        if t <= 0.0 {
            0.0
        } else {
            t.powf(-1.5) * (-t - 1.0 / t).exp()
        }
    }

    #[test]
    fn bessel_type_identity_with_midpoint_cross_check() {
        let v = adaptive_quad(bessel_integrand, 0.0, f64::INFINITY, 1e-10).unwrap();
        let exact = PI.sqrt() * (-2.0f64).exp();
        assert!((v - exact).abs() < 1e-9, "{v} vs {exact}");
        // brute-force midpoint rule on [0, 60]; the tail beyond is below e^-60
        let h = 1e-4;
        let brute: f64 = (0..600_000).map(|i| bessel_integrand((i as f64 + 0.5) * h) * h).sum();
        assert!((brute - 0.239_878).abs() < 1e-5, "{brute}");
        assert!((v - brute).abs() < 1e-6);
    }

    #[test]
    fn reversed_bounds_flip_sign() {
        let v = adaptive_quad(|x| x * x, 1.0, 0.0, 1e-12).unwrap();
        assert!((v + 1.0 / 3.0).abs() < 1e-13);
    }

    #[test]
    fn exhausted_budget_reports_no_convergence() {
        let opts = QuadOptions {
            tol: 1e-14,
            max_intervals: 4,
        };
        let r = adaptive_quad_with(|x: f64| (1.0 / x).sin(), 1e-6, 1.0, opts);
        assert!(matches!(r, Err(Error::NoConvergence { .. })));
    }
}

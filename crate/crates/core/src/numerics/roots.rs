use crate::error::{Error, Result};

pub const DEFAULT_ROOT_TOL: f64 = 1e-10;

/// Bracketed root of `f` on `[lo, hi]`.
///
/// Each iteration tries a secant step through the bracket endpoints and falls
/// back to bisection when the secant point leaves the inner part of the
/// bracket or the bracket fails to halve. Stops once `|f(x)| <= tol` or the
/// bracket collapses to adjacent floats.
pub fn root_find<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut fa = f(a);
    let mut fb = f(b);
    if fa.abs() <= tol {
        return Ok(a);
    }
    if fb.abs() <= tol {
        return Ok(b);
    }
    if !(fa * fb < 0.0) {
        return Err(Error::NoBracket { f_lo: fa, f_hi: fb });
    }
    let mut last_width = b - a;
    for _ in 0..500 {
        let width = b - a;
        let secant = b - fb * (b - a) / (fb - fa);
        let margin = 0.01 * width;
        let x = if secant.is_finite()
            && secant > a + margin
            && secant < b - margin
            && width < 0.75 * last_width.max(width)
        {
            secant
        } else {
            0.5 * (a + b)
        };
        last_width = width;
        let fx = f(x);
        if fx.abs() <= tol || x <= a || x >= b {
            return Ok(x);
        }
        if (fx < 0.0) == (fa < 0.0) {
            a = x;
            fa = fx;
        } else {
            b = x;
            fb = fx;
        }
    }
    Ok(if fa.abs() < fb.abs() { a } else { b })
}

//! Scalar root finding and maximization.

use crate::error::{Error, Result};

const GOLDEN: f64 = 0.618_033_988_749_894_8;

/// Safeguarded Newton iteration on a bracketed root.
///
/// `f` returns `(value, derivative)`. `f(lo)` and `f(hi)` must differ in sign.
/// A Newton step that leaves the bracket, or does not at least halve the
/// residual trend, is replaced by bisection, so convergence is guaranteed
/// for continuous `f`.
pub fn newton_bisect<F>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    x0: f64,
    xtol: f64,
    max_iter: usize,
) -> Result<f64>
where
    F: FnMut(f64) -> (f64, f64),
{
    let (flo, _) = f(lo);
    if flo == 0.0 {
        return Ok(lo);
    }
    let (fhi, _) = f(hi);
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.is_nan() || fhi.is_nan() || (flo > 0.0) == (fhi > 0.0) {
        return Err(Error::NoConvergence {
            what: "newton_bisect: bracket",
            lo,
            hi,
            residual: if flo.abs() < fhi.abs() { flo } else { fhi },
        });
    }
    if flo > 0.0 {
        core::mem::swap(&mut lo, &mut hi);
    }
    newton_oriented(f, lo, hi, x0, xtol, max_iter)
}

/// [`newton_bisect`] for callers that already know `f(neg) < 0 < f(pos)`;
/// skips the two bracket evaluations.
pub fn newton_oriented<F>(mut f: F, neg: f64, pos: f64, x0: f64, xtol: f64, max_iter: usize) -> Result<f64>
where
    F: FnMut(f64) -> (f64, f64),
{
    let (mut lo, mut hi) = (neg, pos);
    let mut x = if x0.is_finite() && x0 >= lo.min(hi) && x0 <= lo.max(hi) {
        x0
    } else {
        0.5 * (lo + hi)
    };
    let mut dx_old = (hi - lo).abs();
    let mut dx = dx_old;
    let (mut fx, mut dfx) = f(x);

    for _ in 0..max_iter {
        if fx == 0.0 {
            return Ok(x);
        }
        if fx.is_nan() {
            break;
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton_ok = dfx.is_finite()
            && dfx != 0.0
            && ((x - hi) * dfx - fx) * ((x - lo) * dfx - fx) <= 0.0
            && (2.0 * fx).abs() <= (dx_old * dfx).abs();
        dx_old = dx;
        if newton_ok {
            dx = fx / dfx;
            x -= dx;
        } else {
            dx = 0.5 * (hi - lo);
            x = lo + dx;
        }
        if dx.abs() <= xtol * (1.0 + x.abs()) {
            return Ok(x);
        }
        let (nf, nd) = f(x);
        fx = nf;
        dfx = nd;
    }
    Err(Error::NoConvergence {
        what: "newton_bisect",
        lo: lo.min(hi),
        hi: lo.max(hi),
        residual: fx,
    })
}

/// Plain bisection; `f(lo)` and `f(hi)` must differ in sign.
pub fn bisect<F>(mut f: F, mut lo: f64, mut hi: f64, xtol: f64, max_iter: usize) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.is_nan() || fhi.is_nan() || (flo > 0.0) == (fhi > 0.0) {
        return Err(Error::NoConvergence {
            what: "bisect: bracket",
            lo,
            hi,
            residual: if flo.abs() < fhi.abs() { flo } else { fhi },
        });
    }
    let lo_neg = flo < 0.0;
    let mut fm = flo;
    for _ in 0..max_iter {
        let mid = 0.5 * (lo + hi);
        if (hi - lo).abs() <= xtol {
            return Ok(mid);
        }
        fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fm < 0.0) == lo_neg {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::NoConvergence {
        what: "bisect",
        lo,
        hi,
        residual: fm,
    })
}

/// Golden-section search for the maximum of a unimodal `f` on `[lo, hi]`.
/// Returns `(x, f(x))`.
pub fn golden_max<F>(mut f: F, mut lo: f64, mut hi: f64, xtol: f64) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let mut x1 = hi - GOLDEN * (hi - lo);
    let mut x2 = lo + GOLDEN * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > xtol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + GOLDEN * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - GOLDEN * (hi - lo);
            f1 = f(x1);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

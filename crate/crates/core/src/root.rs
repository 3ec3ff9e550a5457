//! Bracketing root finders for monotone scalar functions.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub x: f64,
    pub fx: f64,
    /// Final bracket; always contains `x`.
    pub bracket: (f64, f64),
    pub iterations: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stop {
    /// Stop once |f(x)| falls below this.
    pub f_tol: f64,
    /// Stop once the bracket is narrower than `x_tol * max(1, |x|)`.
    pub x_tol: f64,
    pub max_iter: u32,
}

impl Default for Stop {
    fn default() -> Self {
        Stop {
            f_tol: 1e-12,
            x_tol: 1e-12,
            max_iter: 200,
        }
    }
}

/// A sign-changing bracket `[lo, hi]` with `f(lo) <= 0 <= f(hi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
    pub f_lo: f64,
    pub f_hi: f64,
    pub expansions: u32,
}

/// Grows `[lo, hi]` geometrically until an increasing `f` changes sign on it.
///
/// The upper end moves up while `f(hi) < 0`; the lower end moves down while
/// `f(lo) > 0`. Each move doubles the step.
pub fn expand_increasing<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, max_expansions: u32) -> Result<Bracket> {
    debug_assert!(lo < hi);
    let (mut lo, mut hi) = (lo, hi);
    let mut f_lo = f(lo);
    let mut f_hi = f(hi);
    let mut step = hi - lo;
    let mut expansions = 0;
    while f_hi < 0.0 {
        if expansions == max_expansions || f_hi.is_nan() {
            return Err(Error::BracketExpansion {
                attempts: expansions,
                lo,
                hi,
            });
        }
        lo = hi;
        f_lo = f_hi;
        hi += step;
        step *= 2.0;
        f_hi = f(hi);
        expansions += 1;
    }
    while f_lo > 0.0 {
        if expansions == max_expansions || f_lo.is_nan() {
            return Err(Error::BracketExpansion {
                attempts: expansions,
                lo,
                hi,
            });
        }
        hi = lo;
        f_hi = f_lo;
        lo -= step;
        step *= 2.0;
        f_lo = f(lo);
        expansions += 1;
    }
    Ok(Bracket {
        lo,
        hi,
        f_lo,
        f_hi,
        expansions,
    })
}

/// Brent's method (inverse quadratic interpolation guarded by bisection).
pub fn brent<F: FnMut(f64) -> f64>(mut f: F, bracket: Bracket, stop: Stop) -> Result<Root> {
    let (mut a, mut b) = (bracket.lo, bracket.hi);
    let (mut fa, mut fb) = (bracket.f_lo, bracket.f_hi);
    if fa == 0.0 {
        return Ok(Root {
            x: a,
            fx: fa,
            bracket: (a, a),
            iterations: 0,
        });
    }
    if fb == 0.0 {
        return Ok(Root {
            x: b,
            fx: fb,
            bracket: (b, b),
            iterations: 0,
        });
    }
    if fa.signum() == fb.signum() {
        return Err(Error::BracketExpansion {
            attempts: 0,
            lo: a,
            hi: b,
        });
    }
    // b is the best estimate, c the previous point on the other side.
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for iteration in 1..=stop.max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * stop.x_tol * b.abs().max(1.0);
        let m = 0.5 * (c - b);
        if fb.abs() <= stop.f_tol || m.abs() <= tol {
            let (lo, hi) = if b < c { (b, c) } else { (c, b) };
            return Ok(Root {
                x: b,
                fx: fb,
                bracket: (lo, hi),
                iterations: iteration,
            });
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
    }
    Err(Error::NoConvergence {
        iterations: stop.max_iter,
    })
}

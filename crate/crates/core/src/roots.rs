//! Bracketed scalar root finding (bisection/secant/inverse-quadratic hybrid).

use crate::error::{Error, Result};

pub const DEFAULT_REL_TOL: f64 = 1e-12;

/// Brent's method on a sign-changing bracket `[lo, hi]`.
pub fn brent<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, rel_tol: f64) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if !(fa.is_finite() && fb.is_finite()) || fa.signum() == fb.signum() {
        return Err(Error::NoRoot { lo, hi });
    }
    let (mut c, mut fc) = (b, fb);
    let (mut d, mut e) = (b - a, b - a);
    for _ in 0..300 {
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
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * rel_tol * b.abs().max(f64::MIN_POSITIVE);
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
        if !fb.is_finite() {
            return Err(Error::NonConvergence(format!("non-finite function value at {b}")));
        }
    }
    Err(Error::NonConvergence("brent iteration limit".into()))
}

/// Grows `[lo, hi]` geometrically inside `(floor, ∞)` until `f` changes sign.
pub fn bracket_positive<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    floor: f64,
) -> Result<(f64, f64)> {
    let (mut lo, mut hi) = (lo.max(floor), hi);
    let (mut flo, mut fhi) = (f(lo), f(hi));
    for _ in 0..200 {
        if flo.signum() != fhi.signum() || flo == 0.0 || fhi == 0.0 {
            return Ok((lo, hi));
        }
        if flo.abs() < fhi.abs() {
            let next = floor + (lo - floor) * 0.5;
            if next <= floor || (lo - floor) < 1e-300 {
                break;
            }
            hi = lo;
            fhi = flo;
            lo = next;
            flo = f(lo);
        } else {
            lo = hi;
            flo = fhi;
            hi = floor + (hi - floor) * 2.0;
            fhi = f(hi);
        }
    }
    Err(Error::NoRoot { lo, hi })
}

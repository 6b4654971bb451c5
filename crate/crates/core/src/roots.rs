//! Safeguarded bracketing root finder.
//!
//! Brent's method: inverse quadratic interpolation and secant steps, falling
//! back to bisection whenever the interpolated point leaves the bracket or
//! the bracket fails to shrink fast enough.

use crate::error::{Error, Result};

pub const DEFAULT_MAX_ITER: usize = 200;

/// Finds a root of `f` in `[lo, hi]`, where `f(lo)` and `f(hi)` differ in sign.
///
/// Converges when the bracket half-width drops below `xtol + 4 eps |x|` or an
/// exact zero is hit.
pub fn brent<F>(mut f: F, lo: f64, hi: f64, xtol: f64, max_iter: usize) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if !fa.is_finite() || !fb.is_finite() || fa.signum() == fb.signum() {
        return Err(Error::RootNotConverged {
            iterations: 0,
            lo,
            hi,
            f_lo: fa,
            f_hi: fb,
        });
    }

    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;

    for _ in 0..max_iter {
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

        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }

        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                // secant
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                // inverse quadratic
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
        if !fb.is_finite() {
            return Err(Error::Numeric(format!(
                "root finder produced non-finite f({b}) inside bracket [{lo}, {hi}]"
            )));
        }
    }

    Err(Error::RootNotConverged {
        iterations: max_iter,
        lo: b.min(c),
        hi: b.max(c),
        f_lo: fb,
        f_hi: fc,
    })
}

/// Expands `hi` geometrically until `f(hi) > 0`, starting from `start > 0`.
pub(crate) fn expand_upward<F>(mut f: F, start: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let mut hi = start.max(1e-8);
    for _ in 0..2100 {
        if f(hi) > 0.0 {
            return Ok(hi);
        }
        hi *= 2.0;
        if !hi.is_finite() {
            break;
        }
    }
    Err(Error::Numeric(format!(
        "could not bracket a root from above (last trial {hi})"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_sqrt_two() {
        let r = brent(|x| x * x - 2.0, 0.0, 2.0, 1e-15, DEFAULT_MAX_ITER).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn endpoint_root_is_returned() {
        assert_eq!(brent(|x| x, 0.0, 1.0, 1e-12, 10).unwrap(), 0.0);
    }

    #[test]
    fn same_sign_bracket_is_rejected() {
        let err = brent(|x| x * x + 1.0, -1.0, 1.0, 1e-12, 10).unwrap_err();
        assert!(matches!(err, Error::RootNotConverged { iterations: 0, .. }));
    }

    #[test]
    fn iteration_cap_reports_bracket() {
        let err = brent(|x| x.powi(3) - 0.3, 0.0, 1.0, 0.0, 2).unwrap_err();
        match err {
            Error::RootNotConverged { lo, hi, .. } => assert!(lo <= hi),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn steep_function() {
        let r = brent(|x| (50.0 * (x - 0.3)).tanh(), -5.0, 7.0, 1e-14, DEFAULT_MAX_ITER).unwrap();
        assert!((r - 0.3).abs() < 1e-13);
    }
}

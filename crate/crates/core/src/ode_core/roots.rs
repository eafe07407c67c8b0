//! Scalar root bracketing.

use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum BisectError {
    #[error("predicate has the same value ({value}) at both ends of [{a}, {b}]")]
    InvalidBracket { a: f64, b: f64, value: bool },
}

#[derive(Error, Debug, Clone, PartialEq)]
pub enum RootError {
    #[error("f({a}) = {fa} and f({b}) = {fb} do not bracket a root")]
    InvalidBracket { a: f64, b: f64, fa: f64, fb: f64 },
    #[error("function value not finite at {at}")]
    NonFinite { at: f64 },
}

/// Locates the switch point of a boolean predicate on `[a, b]` to within `tol`.
pub fn bisect<P>(mut predicate: P, bracket: (f64, f64), tol: f64) -> Result<f64, BisectError>
where
    P: FnMut(f64) -> bool,
{
    let (mut a, mut b) = bracket;
    let pa = predicate(a);
    let pb = predicate(b);
    if pa == pb {
        return Err(BisectError::InvalidBracket { a, b, value: pa });
    }
    while (b - a).abs() > tol {
        let m = 0.5 * (a + b);
        if m == a || m == b {
            break;
        }
        if predicate(m) == pa {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Brent's method on a sign-changing bracket.
pub fn find_root<F>(mut f: F, bracket: (f64, f64), xtol: f64) -> Result<f64, RootError>
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = bracket;
    let mut fa = f(a);
    let mut fb = f(b);
    if !fa.is_finite() {
        return Err(RootError::NonFinite { at: a });
    }
    if !fb.is_finite() {
        return Err(RootError::NonFinite { at: b });
    }
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(RootError::InvalidBracket { a, b, fa, fb });
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
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
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
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
            if 2.0 * p < (3.0 * xm * q - (tol1 * q).abs()).min((e * q).abs()) {
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
            return Err(RootError::NonFinite { at: b });
        }
    }
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn bisect_finds_pi() {
        let x = bisect(|x| x > PI, (3.0, 4.0), 1e-9).unwrap();
        assert!((x - PI).abs() < 1e-9);
    }

    #[test]
    fn bisect_rejects_invalid_bracket() {
        assert!(matches!(bisect(|x| x > 10.0, (3.0, 4.0), 1e-9), Err(BisectError::InvalidBracket { .. })));
    }

    #[test]
    fn brent_cubic() {
        let x = find_root(|x| x * x * x - 2.0 * x - 5.0, (2.0, 3.0), 1e-15).unwrap();
        assert!((x - 2.094_551_481_542_326_5).abs() < 1e-14);
    }

    #[test]
    fn brent_rejects_same_sign() {
        assert!(find_root(|x| x * x + 1.0, (-1.0, 1.0), 1e-12).is_err());
    }
}

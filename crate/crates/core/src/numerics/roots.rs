use crate::error::{Error, Result};

/// A closed interval `[lo, hi]` expected to contain a sign change.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
}

impl Bracket {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
            return Err(Error::domain(format!("invalid bracket [{lo}, {hi}]")));
        }
        Ok(Bracket { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RootOptions {
    /// Stop once the bracket is narrower than this (plus a few ulps of the iterate).
    pub x_tol: f64,
    /// Stop once `|f(x)|` is at most this. Zero disables the test.
    pub f_tol: f64,
    pub max_iter: usize,
}

impl Default for RootOptions {
    fn default() -> Self {
        RootOptions {
            x_tol: super::ROOT_TOL,
            f_tol: 0.0,
            max_iter: 300,
        }
    }
}

/// Find a zero of `f` inside `bracket`, stopping when `|f(x)| <= tol` or the
/// bracket has shrunk below `tol`.
pub fn find_root<F: FnMut(f64) -> f64>(f: F, bracket: Bracket, tol: f64) -> Result<f64> {
    find_root_with(
        f,
        bracket,
        RootOptions {
            x_tol: tol,
            f_tol: tol,
            ..RootOptions::default()
        },
    )
}

/// Brent's method: inverse quadratic / secant steps, falling back to bisection
/// whenever the interpolated step leaves the bracket or converges too slowly.
/// The returned point always lies inside the initial bracket.
pub fn find_root_with<F: FnMut(f64) -> f64>(
    mut f: F,
    bracket: Bracket,
    opts: RootOptions,
) -> Result<f64> {
    let (mut a, mut b) = (bracket.lo, bracket.hi);
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.is_nan() || fb.is_nan() || fa.signum() == fb.signum() {
        return Err(Error::NotBracketed {
            lo: bracket.lo,
            hi: bracket.hi,
            f_lo: fa,
            f_hi: fb,
        });
    }

    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..opts.max_iter {
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
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * opts.x_tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 || fb.abs() <= opts.f_tol {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
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
        if fb.is_nan() {
            return Err(Error::NoConvergence {
                method: "brent",
                best: a,
                error: f64::NAN,
            });
        }
    }
    Err(Error::NoConvergence {
        method: "brent",
        best: b,
        error: (c - b).abs(),
    })
}

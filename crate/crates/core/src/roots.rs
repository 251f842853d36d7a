//! Scalar root finding: Brent's method plus bracket helpers.

use crate::error::{Error, Result};

/// Stopping control for bracketed root finding.
#[derive(Debug, Clone, Copy)]
pub struct RootTol {
    pub abs_x: f64,
    pub rel_x: f64,
    pub max_iter: usize,
}

impl Default for RootTol {
    fn default() -> Self {
        RootTol { abs_x: 1e-14, rel_x: 1e-12, max_iter: 200 }
    }
}

impl RootTol {
    pub fn rel(rel_x: f64) -> Self {
        RootTol { rel_x, ..Default::default() }
    }
}

/// Brent's method on [a, b]; f(a) and f(b) must have opposite signs
/// (or one of them be zero).
pub fn brent<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: RootTol) -> Result<f64> {
    let (mut a, mut b) = (a, b);
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Numerics(format!(
            "brent: no sign change on [{a:.6e}, {b:.6e}] (f = {fa:.3e}, {fb:.3e})"
        )));
    }

    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;

    for _ in 0..tol.max_iter {
        if fb.abs() > fc.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * (tol.abs_x + tol.rel_x * b.abs());
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            // inverse quadratic / secant step
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
        if (fb > 0.0) == (fc > 0.0) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
    }
    Err(Error::Numerics("brent: max iterations exceeded".into()))
}

/// Shrink `lo` geometrically towards 0 until pred(lo) holds; returns the final lo.
pub fn shrink_until<F: FnMut(f64) -> bool>(mut lo: f64, mut pred: F, max_steps: usize) -> Result<f64> {
    for _ in 0..max_steps {
        if pred(lo) {
            return Ok(lo);
        }
        lo *= 0.5;
    }
    Err(Error::Numerics("bracket shrink failed".into()))
}

/// Grow `hi` geometrically until pred(hi) holds; returns the final hi.
pub fn grow_until<F: FnMut(f64) -> bool>(mut hi: f64, mut pred: F, max_steps: usize) -> Result<f64> {
    for _ in 0..max_steps {
        if pred(hi) {
            return Ok(hi);
        }
        hi *= 2.0;
    }
    Err(Error::Numerics("bracket growth failed".into()))
}

/// Guarded Newton iteration with a maintained bracket [lo, hi]; falls back to
/// bisection whenever the Newton step leaves the bracket or stalls.
/// `fdf` returns (f(x), f'(x)).
pub fn newton_bracketed<F: FnMut(f64) -> (f64, f64)>(
    mut fdf: F,
    mut lo: f64,
    mut hi: f64,
    x0: f64,
    tol: RootTol,
) -> Result<f64> {
    let mut x = x0.clamp(lo.min(hi), lo.max(hi));
    if lo > hi {
        std::mem::swap(&mut lo, &mut hi);
    }
    for _ in 0..tol.max_iter {
        let (fx, dfx) = fdf(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = if dfx != 0.0 { x - fx / dfx } else { f64::NAN };
        let next = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let step = (next - x).abs();
        x = next;
        if step <= tol.abs_x + tol.rel_x * x.abs() || (hi - lo) <= tol.abs_x + tol.rel_x * x.abs() {
            return Ok(x);
        }
    }
    Err(Error::Numerics("newton_bracketed: max iterations exceeded".into()))
}

/// Brent's minimization (golden section with parabolic interpolation) on
/// [a, b]. Returns the abscissa of the minimum.
pub fn minimize<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, rel_tol: f64, max_iter: usize) -> f64 {
    const GOLD: f64 = 0.381_966_011_250_105_1;
    let (mut a, mut b) = (a.min(b), a.max(b));
    let mut x = a + GOLD * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = f(x);
    let (mut fw, mut fv) = (fx, fx);
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;
    for _ in 0..max_iter {
        let xm = 0.5 * (a + b);
        let tol1 = rel_tol * x.abs() + 1e-15;
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (b - a) {
            return x;
        }
        let mut use_golden = true;
        if e.abs() > tol1 {
            // parabolic fit through (v, w, x)
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let e_old = e;
            e = d;
            if p.abs() < (0.5 * q * e_old).abs() && p > q * (a - x) && p < q * (b - x) {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = tol1.copysign(xm - x);
                }
                use_golden = false;
            }
        }
        if use_golden {
            e = if x >= xm { a - x } else { b - x };
            d = GOLD * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = f(u);
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            (v, fv) = (w, fw);
            (w, fw) = (x, fx);
            (x, fx) = (u, fu);
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                (v, fv) = (w, fw);
                (w, fw) = (u, fu);
            } else if fu <= fv || v == x || v == w {
                (v, fv) = (u, fu);
            }
        }
    }
    x
}

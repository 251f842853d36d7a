//! The time map T_lambda and its derived quantities.
//!
//! T_lambda(alpha) is half the nodal-interval width of the solution arch of
//! amplitude alpha for -u'' = g_lambda(u). In scaled form
//!
//!   T_lambda(alpha) = int_0^1 ( p q alpha^{2-q} / D(s) )^{1/2} ds,
//!   D(s) = 2 p lambda (1 - s^q) + 2 q alpha^{p-q} (1 - s^p).
//!
//! The integrand has a (1-s)^{-1/2} endpoint singularity removed by s = 1 - t^2,
//! and for lambda < 0 with alpha near c_lambda an s^{-q/2} singularity at 0
//! removed by s = tau^{2/(2-q)}. Both substituted integrands are evaluated in
//! cancellation-free form.

use crate::error::{Error, Result};
use crate::params::{c_lambda, Exponents};
use crate::quad::{integrate, one_minus_pow, one_minus_pow_ratio};
use crate::roots::{brent, grow_until, shrink_until, RootTol};

/// Floor for quadrature absolute tolerances.
const QUAD_ABS_FLOOR: f64 = 1e-14;
/// Relative quadrature target; one order tighter than the root-finding targets.
const QUAD_REL: f64 = 5e-12;
/// Hard ceiling from the contract: absolute error of T at most 1e-10.
const QUAD_ABS_CAP: f64 = 1e-10;

/// A validated evaluation point of the time map.
#[derive(Debug, Clone, Copy)]
pub struct TimeMapQuery {
    pub exps: Exponents,
    pub lambda: f64,
    pub alpha: f64,
}

impl TimeMapQuery {
    pub fn new(exps: Exponents, lambda: f64, alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidParam(format!("amplitude must be positive, got {alpha}")));
        }
        if !lambda.is_finite() {
            return Err(Error::InvalidParam("lambda must be finite".into()));
        }
        if lambda < 0.0 {
            let c = c_lambda(exps, lambda)?;
            if alpha < c * (1.0 - 1e-12) {
                return Err(Error::Domain(format!(
                    "time map undefined: alpha = {alpha} below c_lambda = {c} for lambda = {lambda}"
                )));
            }
        }
        Ok(TimeMapQuery { exps, lambda, alpha })
    }
}

/// Which monotone branch of the (unimodal) time map an inverse query refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchSide {
    Lower,
    Upper,
}

/// Location and value of the maximum of T_lambda for lambda > 0.
#[derive(Debug, Clone, Copy)]
pub struct TimeMapProfile {
    pub lambda: f64,
    pub alpha_star: f64,
    pub t_star: f64,
}

struct Kernel {
    /// p q alpha^{2-q}
    a: f64,
    /// 2 p lambda (coefficient of the q-term), signed
    cq: f64,
    /// 2 q alpha^{p-q}
    cp: f64,
    /// D(0) = cq + cp, clamped to >= 0 (zero exactly at alpha = c_lambda)
    d0: f64,
    p: f64,
    q: f64,
    neg: bool,
}

impl Kernel {
    fn new(exps: Exponents, lambda: f64, alpha: f64) -> Self {
        let (p, q) = (exps.p(), exps.q());
        let cq = 2.0 * p * lambda;
        let cp = 2.0 * q * alpha.powf(p - q);
        // T_lambda(alpha) has an (alpha - c_lambda)^{(2-q)/(2q)} cusp at the
        // dead-core amplitude, so a 1-ulp error in alpha moves T by ~1e-3.
        // Amplitudes within 1e-12 relative of c_lambda are therefore snapped
        // onto the dead-core endpoint, where the substituted integrand is
        // exact and smooth.
        let mut d0 = cq + cp;
        if lambda < 0.0 && d0 < 1e-12 * cp {
            d0 = 0.0;
        }
        Kernel { a: p * q * alpha.powf(2.0 - q), cq, cp, d0, p, q, neg: lambda < 0.0 }
    }

    /// D(s) for s in [0, 1/2], cancellation-free.
    #[inline]
    fn d_left(&self, s: f64) -> f64 {
        if self.neg {
            // D0 + 2p|lambda| s^q - 2q alpha^{p-q} s^p; the two power terms keep
            // a bounded ratio on [0, 1/2] because alpha^{p-q} >= (p/q)|lambda|.
            self.d0 - self.cq * s.powf(self.q) - self.cp * s.powf(self.p)
        } else {
            self.cq * one_minus_pow(s, self.q) + self.cp * one_minus_pow(s, self.p)
        }
    }

    /// E(u) = D(1-u)/u for u in [0, 1/2]; strictly positive up to u = 0.
    #[inline]
    fn e_right(&self, u: f64) -> f64 {
        self.cq * one_minus_pow_ratio(u, self.q) + self.cp * one_minus_pow_ratio(u, self.p)
    }
}

fn scaled_tol(rough: f64) -> f64 {
    (QUAD_REL * rough.abs()).clamp(QUAD_ABS_FLOOR, QUAD_ABS_CAP)
}

/// int_{x0}^{x1} sqrt(A / D(s)) ds over a subinterval of [0, 1/2].
fn left_part(k: &Kernel, exps: Exponents, x0: f64, x1: f64) -> Result<f64> {
    if x1 <= x0 {
        return Ok(0.0);
    }
    let q = exps.q();
    if k.neg {
        // s = tau^m with m = 2/(2-q) stretches the s^{-q/2} behaviour at 0.
        let m = 2.0 / (2.0 - q);
        let t0 = x0.powf(1.0 / m);
        let t1 = x1.powf(1.0 / m);
        let f = |tau: f64| {
            let s = tau.powf(m);
            m * tau.powf(m - 1.0) * (k.a / k.d_left(s)).sqrt()
        };
        let rough = integrate(f, t0, t1, 1e-6)?;
        integrate(f, t0, t1, scaled_tol(rough))
    } else {
        let f = |s: f64| (k.a / k.d_left(s)).sqrt();
        let rough = integrate(f, x0, x1, 1e-6)?;
        integrate(f, x0, x1, scaled_tol(rough))
    }
}

/// int over s in [1-u1, 1-u0] of sqrt(A/D(s)) ds via s = 1 - t^2, t = sqrt(u).
fn right_part(k: &Kernel, u0: f64, u1: f64) -> Result<f64> {
    if u1 <= u0 {
        return Ok(0.0);
    }
    let f = |t: f64| 2.0 * (k.a / k.e_right(t * t)).sqrt();
    let (t0, t1) = (u0.sqrt(), u1.sqrt());
    let rough = integrate(f, t0, t1, 1e-6)?;
    integrate(f, t0, t1, scaled_tol(rough))
}

/// T_lambda(alpha) for a validated query.
pub fn time_map(query: &TimeMapQuery) -> Result<f64> {
    let k = Kernel::new(query.exps, query.lambda, query.alpha);
    let left = left_part(&k, query.exps, 0.0, 0.5)?;
    let right = right_part(&k, 0.0, 0.5)?;
    Ok(left + right)
}

/// Convenience wrapper validating the query first.
pub fn time_map_at(exps: Exponents, lambda: f64, alpha: f64) -> Result<f64> {
    time_map(&TimeMapQuery::new(exps, lambda, alpha)?)
}

/// Partial time map phi_{alpha,lambda}(z) = int_0^z (2(G(alpha)-G(s)))^{-1/2} ds
/// for 0 <= z <= alpha, in the same desingularized form as `time_map`.
pub fn partial_time_map(query: &TimeMapQuery, z: f64) -> Result<f64> {
    let alpha = query.alpha;
    if !(0.0..=alpha * (1.0 + 1e-12)).contains(&z) {
        return Err(Error::Domain(format!("z = {z} outside [0, alpha = {alpha}]")));
    }
    let x = (z / alpha).min(1.0);
    let k = Kernel::new(query.exps, query.lambda, alpha);
    if x <= 0.5 {
        left_part(&k, query.exps, 0.0, x)
    } else {
        let left = left_part(&k, query.exps, 0.0, 0.5)?;
        let right = right_part(&k, 1.0 - x, 0.5)?;
        Ok(left + right)
    }
}

/// The squared slope from the first integral: u'^2 = 2(G_lambda(alpha) - G_lambda(z))
/// evaluated in the cancellation-free kernel form
/// 2(G(alpha) - G(alpha sigma)) = alpha^q D(sigma) / (pq).
pub fn first_integral_sq(exps: Exponents, lambda: f64, alpha: f64, z: f64) -> f64 {
    let (p, q) = (exps.p(), exps.q());
    let k = Kernel::new(exps, lambda, alpha);
    let sigma = (z.abs() / alpha).clamp(0.0, 1.0);
    let d = if sigma <= 0.5 {
        k.d_left(sigma)
    } else {
        let u = 1.0 - sigma;
        u * k.e_right(u)
    };
    alpha.powf(q) * d / (p * q)
}

/// T'_lambda(alpha) by singular quadrature; only defined here for lambda > 0.
pub fn time_map_derivative(query: &TimeMapQuery) -> Result<f64> {
    if query.lambda <= 0.0 {
        return Err(Error::Domain(
            "time map derivative exposed for lambda > 0 only; inversion for lambda <= 0 uses monotone bracketing".into(),
        ));
    }
    let (p, q) = (query.exps.p(), query.exps.q());
    let (lambda, alpha) = (query.lambda, query.alpha);
    let k = Kernel::new(query.exps, lambda, alpha);
    let nq = lambda * p * (2.0 - q);
    let np = q * (p - 2.0) * alpha.powf(p - q);

    // left: N(s)/D(s)^{3/2} on [0, 1/2]
    let fl = |s: f64| {
        let n = nq * one_minus_pow(s, q) - np * one_minus_pow(s, p);
        n / k.d_left(s).powf(1.5)
    };
    let rough_l = integrate(fl, 0.0, 0.5, 1e-6)?;
    let left = integrate(fl, 0.0, 0.5, scaled_tol(rough_l))?;

    // right: s = 1 - t^2 gives 2 Ntilde(t^2) / E(t^2)^{3/2}
    let fr = |t: f64| {
        let u = t * t;
        let n = nq * one_minus_pow_ratio(u, q) - np * one_minus_pow_ratio(u, p);
        2.0 * n / k.e_right(u).powf(1.5)
    };
    let hf = 0.5_f64.sqrt();
    let rough_r = integrate(fr, 0.0, hf, 1e-6)?;
    let right = integrate(fr, 0.0, hf, scaled_tol(rough_r))?;

    Ok((p * q).sqrt() * alpha.powf(-q / 2.0) * (left + right))
}

/// Bracket for alpha_lambda from the sign analysis of T'_lambda:
/// q(p-2) alpha^{p-q} <= lambda p(2-q) <= (p-2) alpha^{p-q} p / ... rearranged.
pub fn alpha_star_bracket(exps: Exponents, lambda: f64) -> (f64, f64) {
    let (p, q) = (exps.p(), exps.q());
    let lo = (lambda * (2.0 - q) / (p - 2.0)).powf(1.0 / (p - q));
    let hi = (lambda * p * (2.0 - q) / (q * (p - 2.0))).powf(1.0 / (p - q));
    (lo, hi)
}

/// Locate the maximizer alpha_lambda of T_lambda for lambda > 0.
pub fn alpha_star(exps: Exponents, lambda: f64) -> Result<TimeMapProfile> {
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("alpha_star requires lambda > 0, got {lambda}")));
    }
    let (b_lo, b_hi) = alpha_star_bracket(exps, lambda);
    let mut lo = b_lo * (1.0 - 1e-3);
    let mut hi = b_hi * (1.0 + 1e-3);
    let dt = |a: f64| time_map_derivative(&TimeMapQuery::new(exps, lambda, a).unwrap()).unwrap();
    for _ in 0..60 {
        if dt(lo) > 0.0 {
            break;
        }
        lo *= 0.5;
    }
    for _ in 0..60 {
        if dt(hi) < 0.0 {
            break;
        }
        hi *= 2.0;
    }
    let a_star = brent(dt, lo, hi, RootTol { abs_x: 0.0, rel_x: 1e-11, max_iter: 200 })?;
    let t_star = time_map_at(exps, lambda, a_star)?;
    Ok(TimeMapProfile { lambda, alpha_star: a_star, t_star })
}

/// Closed form of T_lambda(c_lambda) for lambda < 0 (the dead-core half width).
pub fn t_at_c_lambda(exps: Exponents, lambda: f64) -> Result<f64> {
    if !(lambda < 0.0) {
        return Err(Error::Domain("t_at_c_lambda requires lambda < 0".into()));
    }
    let (p, q) = (exps.p(), exps.q());
    let i = nodal_moment(exps)?;
    Ok((q / 2.0 * (p / q).powf((2.0 - q) / (p - q))).sqrt()
        * i
        * lambda.abs().powf(-(p - 2.0) / (2.0 * (p - q))))
}

/// int_0^1 (t^q - t^p)^{-1/2} dt, the moment entering lambda_{j*} and T_lambda(c_lambda).
/// Singularities t^{-q/2} at 0 and (1-t)^{-1/2} at 1 are removed by substitution.
pub fn nodal_moment(exps: Exponents) -> Result<f64> {
    let (p, q) = (exps.p(), exps.q());
    let m = 2.0 / (2.0 - q);
    // left [0, 1/2]: t = tau^m collapses to m (1 - tau^{m(p-q)})^{-1/2}
    let fl = |tau: f64| m / (1.0 - tau.powf(m * (p - q))).sqrt();
    let left = integrate(fl, 0.0, 0.5_f64.powf(1.0 / m), 1e-12)?;
    // right [1/2, 1]: t = 1 - u^2
    let fr = |u: f64| {
        let uu = u * u;
        2.0 / ((1.0 - uu).powf(q) * one_minus_pow_ratio(uu, p - q)).sqrt()
    };
    let right = integrate(fr, 0.0, 0.5_f64.sqrt(), 1e-12)?;
    Ok(left + right)
}

/// int_0^1 (1 - s^x)^{-1/2} ds (the constants m_p, m_q of the two-sided bound).
pub fn singular_moment(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::InvalidParam("singular_moment requires x > 0".into()));
    }
    let fl = |s: f64| 1.0 / one_minus_pow(s, x).sqrt();
    let left = integrate(fl, 0.0, 0.5, 1e-12)?;
    let fr = |t: f64| 2.0 / one_minus_pow_ratio(t * t, x).sqrt();
    let right = integrate(fr, 0.0, 0.5_f64.sqrt(), 1e-12)?;
    Ok(left + right)
}

/// The dead-core threshold lambda_{j*} < 0.
pub fn lambda_j_star(exps: Exponents, j: usize) -> Result<f64> {
    let (p, q) = (exps.p(), exps.q());
    let i = nodal_moment(exps)?;
    let base = (2.0 * q).sqrt() * (p / q).powf((2.0 - q) / (2.0 * (p - q))) * i;
    let expo = 2.0 * (p - q) / (p - 2.0);
    Ok(-(base.powf(expo)) * ((j + 1) as f64).powf(expo))
}

/// Dead-core arch length l(lambda) for lambda < 0, computed by both routes:
/// quadrature of 2 T_lambda(c_lambda) and the closed form
/// (1/(j+1)) (|lambda_{j*}|/|lambda|)^{(p-2)/(2(p-q))}. Returns the closed form
/// after asserting agreement.
pub fn dead_core_length(exps: Exponents, lambda: f64, j: usize) -> Result<f64> {
    if !(lambda < 0.0) {
        return Err(Error::Domain(format!("dead_core_length requires lambda < 0, got {lambda}")));
    }
    let (p, q) = (exps.p(), exps.q());
    let closed = (1.0 / (j + 1) as f64)
        * (lambda_j_star(exps, j)?.abs() / lambda.abs()).powf((p - 2.0) / (2.0 * (p - q)));
    let c = c_lambda(exps, lambda)?;
    let by_quad = 2.0 * time_map_at(exps, lambda, c)?;
    if (closed - by_quad).abs() > 1e-9 * closed.max(1.0) {
        return Err(Error::Numerics(format!(
            "dead-core length routes disagree: closed {closed:.15e} vs quadrature {by_quad:.15e}"
        )));
    }
    Ok(closed)
}

/// Constants entering the alpha_lambda and T_lambda(alpha_lambda) two-sided bounds.
///
/// The amplitude pair is explicit from the critical-point sign analysis; the
/// lower time-map constant is explicit in the proof and the upper one follows
/// by the symmetric computation with m_q in place of m_p. The combined pair
/// (min, max) serves both families of inequalities at once.
#[derive(Debug, Clone, Copy)]
pub struct BracketConstants {
    pub m_p: f64,
    pub m_q: f64,
    pub c_amp: f64,
    pub c_amp_upper: f64,
    pub c_tstar: f64,
    pub c_tstar_upper: f64,
    pub c3: f64,
    pub c3_upper: f64,
}

pub fn bracket_constants(exps: Exponents) -> Result<BracketConstants> {
    let (p, q) = (exps.p(), exps.q());
    let m_p = singular_moment(p)?;
    let m_q = singular_moment(q)?;
    let c_amp = ((2.0 - q) / (p - 2.0)).powf(1.0 / (p - q));
    let c_amp_upper = (p * (2.0 - q) / (q * (p - 2.0))).powf(1.0 / (p - q));
    let shape = (q * (p - 2.0) / (2.0 * (p - q))).sqrt()
        * (p * (2.0 - q) / (q * (p - 2.0))).powf((2.0 - q) / (2.0 * (p - q)));
    let c_tstar = shape * m_p;
    let c_tstar_upper = shape * m_q;
    Ok(BracketConstants {
        m_p,
        m_q,
        c_amp,
        c_amp_upper,
        c_tstar,
        c_tstar_upper,
        c3: c_amp.min(c_tstar),
        c3_upper: c_amp_upper.max(c_tstar_upper),
    })
}

/// The fold value Lambda_j: the unique lambda > 0 with T_lambda(alpha_lambda) = 1/(2j+2).
pub fn cap_lambda_j(exps: Exponents, j: usize) -> Result<f64> {
    let (p, q) = (exps.p(), exps.q());
    let bc = bracket_constants(exps)?;
    let target = 1.0 / (2.0 * (j + 1) as f64);
    let expo = 2.0 * (p - q) / (p - 2.0);
    let mut lo = ((2.0 * (j + 1) as f64) * bc.c3).powf(expo) * 0.9;
    let mut hi = ((2.0 * (j + 1) as f64) * bc.c3_upper).powf(expo) * 1.1;
    let f = |la: f64| alpha_star(exps, la).unwrap().t_star - target;
    lo = shrink_until(lo, |x| f(x) > 0.0, 60)?;
    hi = grow_until(hi, |x| f(x) < 0.0, 60)?;
    brent(f, lo, hi, RootTol { abs_x: 0.0, rel_x: 1e-11, max_iter: 200 })
}

/// Solve T_lambda(alpha) = target on the requested monotone branch.
pub fn invert_time_map(
    exps: Exponents,
    lambda: f64,
    target: f64,
    side: BranchSide,
) -> Result<f64> {
    if !(target.is_finite() && target > 0.0) {
        return Err(Error::InvalidParam(format!("target must be positive, got {target}")));
    }
    let tol = RootTol { abs_x: 0.0, rel_x: 1e-11, max_iter: 200 };
    if lambda > 0.0 {
        let profile = alpha_star(exps, lambda)?;
        if target > profile.t_star * (1.0 + 1e-12) {
            return Err(Error::NoSolution(format!(
                "target {target} exceeds sup T_lambda = {:.15e} at lambda = {lambda}",
                profile.t_star
            )));
        }
        if (target - profile.t_star).abs() <= 1e-12 * profile.t_star.max(1.0) {
            return Ok(profile.alpha_star);
        }
        let t_of = |a: f64| time_map_at(exps, lambda, a).unwrap();
        match side {
            BranchSide::Lower => {
                let lo = shrink_until(profile.alpha_star * 0.5, |a| t_of(a) < target, 600)?;
                brent(|a| t_of(a) - target, lo, profile.alpha_star, tol)
            }
            BranchSide::Upper => {
                let hi = grow_until(profile.alpha_star * 2.0, |a| t_of(a) < target, 600)?;
                brent(|a| t_of(a) - target, profile.alpha_star, hi, tol)
            }
        }
    } else {
        if side == BranchSide::Lower {
            return Err(Error::BranchUnavailable(
                "only the upper (decreasing) branch exists for lambda <= 0".into(),
            ));
        }
        let t_of = |a: f64| time_map_at(exps, lambda, a).unwrap();
        let lo = if lambda < 0.0 {
            let c = c_lambda(exps, lambda)?;
            let t_c = t_at_c_lambda(exps, lambda)?;
            if target > t_c * (1.0 + 1e-12) {
                return Err(Error::NoSolution(format!(
                    "target {target} exceeds T_lambda(c_lambda) = {t_c:.15e} at lambda = {lambda}"
                )));
            }
            if (target - t_c).abs() <= 1e-12 * t_c.max(1.0) {
                return Ok(c);
            }
            c
        } else {
            // lambda = 0: T_0 decreases from +infinity.
            shrink_until(1.0, |a| t_of(a) > target, 600)?
        };
        let hi = grow_until(lo.max(1e-8) * 2.0, |a| t_of(a) < target, 600)?;
        brent(|a| t_of(a) - target, lo.max(f64::MIN_POSITIVE), hi, tol)
    }
}

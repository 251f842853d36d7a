//! Problem parameters and nonlinearities.
//!
//! The model right hand side is g_lambda(z) = lambda |z|^{q-2} z + |z|^{p-2} z
//! with exponents 1 < q < 2 < p, its primitive G_lambda, and the associated
//! energy. General nonlinearities h_lambda(r, z, xi) enter through
//! [`NonlinearitySpec`] together with their pinching constants.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quad;
use crate::trace::Trace;

/// Validated exponent pair with 1 < q < 2 < p < infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exponents {
    p: f64,
    q: f64,
}

impl Exponents {
    pub fn new(p: f64, q: f64) -> Result<Self> {
        if !(p.is_finite() && q.is_finite() && 1.0 < q && q < 2.0 && 2.0 < p) {
            return Err(Error::InvalidParam(format!(
                "exponents must satisfy 1 < q < 2 < p, got p = {p}, q = {q}"
            )));
        }
        Ok(Exponents { p, q })
    }

    #[inline]
    pub fn p(&self) -> f64 {
        self.p
    }

    #[inline]
    pub fn q(&self) -> f64 {
        self.q
    }
}

/// sign(z) |z|^{x-1}, with the value 0 at z = 0 (valid for x > 1).
#[inline]
fn odd_pow(z: f64, x: f64) -> f64 {
    if z == 0.0 {
        // |0|^{x-2} * 0 would be 0 * inf for x < 2; the limit is 0 since x > 1.
        0.0
    } else {
        z.signum() * z.abs().powf(x - 1.0)
    }
}

/// g_lambda(z) = lambda |z|^{q-2} z + |z|^{p-2} z. Odd in z; not Lipschitz at z = 0.
#[inline]
pub fn g_eval(exps: Exponents, lambda: f64, z: f64) -> f64 {
    debug_assert!(lambda.is_finite() && z.is_finite(), "non-finite input to g_eval");
    lambda * odd_pow(z, exps.q) + odd_pow(z, exps.p)
}

/// G_lambda(z) = (lambda/q) |z|^q + (1/p) |z|^p, the primitive of g_lambda. Even in z.
#[inline]
pub fn big_g_eval(exps: Exponents, lambda: f64, z: f64) -> f64 {
    debug_assert!(lambda.is_finite() && z.is_finite(), "non-finite input to big_g_eval");
    let az = z.abs();
    if az == 0.0 {
        return 0.0;
    }
    lambda / exps.q * az.powf(exps.q) + az.powf(exps.p) / exps.p
}

/// d/dz g_lambda(z) for z != 0.
#[inline]
pub fn g_prime(exps: Exponents, lambda: f64, z: f64) -> f64 {
    let az = z.abs();
    lambda * (exps.q - 1.0) * az.powf(exps.q - 2.0) + (exps.p - 1.0) * az.powf(exps.p - 2.0)
}

/// The unique positive root (p |lambda| / q)^{1/(p-q)} of G_lambda for lambda <= 0;
/// zero when lambda = 0.
pub fn c_lambda(exps: Exponents, lambda: f64) -> Result<f64> {
    if !(lambda <= 0.0) {
        return Err(Error::Domain(format!("c_lambda requires lambda <= 0, got {lambda}")));
    }
    Ok((exps.p * lambda.abs() / exps.q).powf(1.0 / (exps.p - exps.q)))
}

pub type HFn = Arc<dyn Fn(f64, f64, f64, f64) -> f64 + Send + Sync>;
pub type KBoundFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Pinching constants of assumptions (B2)/(B3) plus the (B1) constant K(lambda, s).
#[derive(Clone)]
pub struct PinchingBounds {
    pub m_small: f64,
    pub m_big: f64,
    pub k_bound: Option<KBoundFn>,
}

impl PinchingBounds {
    pub fn new(m_small: f64, m_big: f64, k_bound: Option<KBoundFn>) -> Result<Self> {
        if !(m_small.is_finite() && m_big.is_finite() && 0.0 < m_small && m_small <= m_big) {
            return Err(Error::InvalidParam(format!(
                "pinching bounds must satisfy 0 < m <= M, got m = {m_small}, M = {m_big}"
            )));
        }
        Ok(PinchingBounds { m_small, m_big, k_bound })
    }

    pub fn unit() -> Self {
        PinchingBounds { m_small: 1.0, m_big: 1.0, k_bound: Some(Arc::new(|_, _| 1.0)) }
    }
}

impl std::fmt::Debug for PinchingBounds {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PinchingBounds")
            .field("m_small", &self.m_small)
            .field("m_big", &self.m_big)
            .field("k_bound", &self.k_bound.as_ref().map(|_| "<fn>"))
            .finish()
    }
}

#[derive(Clone)]
enum Variant {
    Model,
    General {
        h: HFn,
        dr_h: Option<HFn>,
        dxi_h: Option<HFn>,
        bounds: PinchingBounds,
    },
}

/// A right hand side h_lambda(r, z, xi) for -v'' = h_lambda(r, v, |v'|) on (0, 1).
///
/// The `Model` variant is the autonomous g_lambda with m = M = 1; the `General`
/// variant wraps a user callable with its pinching constants.
#[derive(Clone)]
pub struct NonlinearitySpec {
    exps: Exponents,
    variant: Variant,
    variational: bool,
}

impl std::fmt::Debug for NonlinearitySpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match self.variant {
            Variant::Model => "Model",
            Variant::General { .. } => "General",
        };
        f.debug_struct("NonlinearitySpec")
            .field("kind", &kind)
            .field("p", &self.exps.p())
            .field("q", &self.exps.q())
            .field("variational", &self.variational)
            .finish()
    }
}

impl NonlinearitySpec {
    pub fn model(exps: Exponents) -> Self {
        NonlinearitySpec { exps, variant: Variant::Model, variational: true }
    }

    pub fn general(
        exps: Exponents,
        h: HFn,
        bounds: PinchingBounds,
        dr_h: Option<HFn>,
        dxi_h: Option<HFn>,
        variational: bool,
    ) -> Result<Self> {
        if variational {
            // Spot check xi-independence on a few sample points.
            for &(lambda, r, z) in &[(0.0, 0.3, 0.7), (1.0, 0.0, -1.2), (-2.0, 1.0, 2.5)] {
                let h0 = h(lambda, r, z, 0.0);
                let h1 = h(lambda, r, z, 1.5);
                if (h0 - h1).abs() > 1e-12 * (1.0 + h0.abs()) {
                    return Err(Error::InvalidParam(
                        "variational flag set but h depends on xi".into(),
                    ));
                }
            }
        }
        Ok(NonlinearitySpec { exps, variant: Variant::General { h, dr_h, dxi_h, bounds }, variational })
    }

    #[inline]
    pub fn exponents(&self) -> Exponents {
        self.exps
    }

    pub fn is_model(&self) -> bool {
        matches!(self.variant, Variant::Model)
    }

    pub fn is_variational(&self) -> bool {
        self.variational
    }

    pub fn bounds(&self) -> PinchingBounds {
        match &self.variant {
            Variant::Model => PinchingBounds::unit(),
            Variant::General { bounds, .. } => bounds.clone(),
        }
    }

    pub fn dr_h(&self) -> Option<&HFn> {
        match &self.variant {
            Variant::Model => None,
            Variant::General { dr_h, .. } => dr_h.as_ref(),
        }
    }

    pub fn dxi_h(&self) -> Option<&HFn> {
        match &self.variant {
            Variant::Model => None,
            Variant::General { dxi_h, .. } => dxi_h.as_ref(),
        }
    }

    /// Evaluate h_lambda(r, z, xi).
    #[inline]
    pub fn h(&self, lambda: f64, r: f64, z: f64, xi: f64) -> f64 {
        match &self.variant {
            Variant::Model => g_eval(self.exps, lambda, z),
            Variant::General { h, .. } => h(lambda, r, z, xi),
        }
    }

    /// H_lambda(r, z) = int_0^z h_lambda(r, s) ds; closed form G_lambda for the
    /// model variant, adaptive quadrature (abs tol 1e-10) otherwise.
    pub fn energy_density(&self, lambda: f64, r: f64, z: f64) -> Result<f64> {
        if !self.variational {
            return Err(Error::Domain("energy undefined for xi-dependent h".into()));
        }
        match &self.variant {
            Variant::Model => Ok(big_g_eval(self.exps, lambda, z)),
            Variant::General { h, .. } => {
                if z == 0.0 {
                    return Ok(0.0);
                }
                quad::integrate(|s| h(lambda, r, s, 0.0), 0.0, z, 1e-10)
            }
        }
    }
}

/// Spot check of the pinching inequalities on a sampled box (global
/// verification of a user-supplied h is out of reach; this catches sign and
/// scaling mistakes). For lambda >= 0 checks
/// m (lambda |z|^q + |z|^p) <= z h <= M (lambda |z|^q + |z|^p); for
/// lambda < 0 the
/// M lambda |z|^q + m |z|^p <= z h <= m lambda |z|^q + M |z|^p variant.
pub fn spot_check_pinching(
    spec: &NonlinearitySpec,
    lambdas: &[f64],
    z_max: f64,
    samples: usize,
) -> Result<()> {
    let exps = spec.exponents();
    let b = spec.bounds();
    let (m, bm) = (b.m_small, b.m_big);
    let tol = 1e-10;
    for &la in lambdas {
        for i in 0..samples {
            let z = z_max * (2.0 * (i as f64 + 0.5) / samples as f64 - 1.0);
            if z == 0.0 {
                continue;
            }
            for &r in &[0.0, 0.25, 0.5, 0.75, 1.0] {
                for &xi in &[0.0, 0.5, 2.0] {
                    let zh = z * spec.h(la, r, z, xi);
                    let (zq, zp) = (z.abs().powf(exps.q()), z.abs().powf(exps.p()));
                    let (lo, hi) = if la >= 0.0 {
                        (m * (la * zq + zp), bm * (la * zq + zp))
                    } else {
                        (bm * la * zq + m * zp, m * la * zq + bm * zp)
                    };
                    let band = tol * (1.0 + lo.abs().max(hi.abs()));
                    if zh < lo - band || zh > hi + band {
                        return Err(Error::InvalidParam(format!(
                            "pinching violated at lambda = {la}, r = {r}, z = {z}, xi = {xi}: \
                             z h = {zh} outside [{lo}, {hi}]"
                        )));
                    }
                }
            }
        }
    }
    Ok(())
}

/// J_lambda(v) = (1/2) int v'^2 - int H_lambda(r, v), by composite quadrature
/// over the sampled trace.
pub fn energy(spec: &NonlinearitySpec, lambda: f64, trace: &Trace) -> Result<f64> {
    if !spec.is_variational() {
        return Err(Error::Domain("energy undefined for xi-dependent h".into()));
    }
    let kinetic = 0.5 * trace.integrate(|_, _, du| du * du);
    // Model variant: closed-form density keeps this cheap; general variant
    // quadratures per sample, so failures propagate.
    let mut err: Option<Error> = None;
    let potential = trace.integrate(|x, u, _| match spec.energy_density(lambda, x, u) {
        Ok(v) => v,
        Err(e) => {
            err.get_or_insert(e);
            f64::NAN
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    Ok(kinetic - potential)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn exps() -> Exponents {
        Exponents::new(4.0, 1.5).unwrap()
    }

    #[test]
    fn exponent_validation() {
        assert!(Exponents::new(4.0, 1.5).is_ok());
        assert!(Exponents::new(2.0, 1.5).is_err());
        assert!(Exponents::new(4.0, 2.0).is_err());
        assert!(Exponents::new(4.0, 1.0).is_err());
        assert!(Exponents::new(f64::INFINITY, 1.5).is_err());
    }

    #[test]
    fn g_model_values() {
        // pure power term: lambda = 0, z = 2, p = 4 -> 2^3
        assert!((g_eval(exps(), 0.0, 2.0) - 8.0).abs() < 1e-15);
        // lambda = 1, z = 1 -> 1 + 1
        assert!((g_eval(exps(), 1.0, 1.0) - 2.0).abs() < 1e-15);
        // root at z = 1 when lambda = -1
        assert!(g_eval(exps(), -1.0, 1.0).abs() < 1e-15);
        // z = 0 allowed
        assert_eq!(g_eval(exps(), 3.0, 0.0), 0.0);
    }

    #[test]
    fn big_g_values() {
        assert!((big_g_eval(exps(), 0.0, 1.0) - 0.25).abs() < 1e-15);
        assert_eq!(big_g_eval(exps(), -5.0, 0.0), 0.0);
        // G_lambda(c_lambda) = 0
        let c = c_lambda(exps(), -1.0).unwrap();
        assert!((c - 1.4804286899486134).abs() < 1e-12);
        assert!(big_g_eval(exps(), -1.0, c).abs() < 1e-14);
    }

    #[test]
    fn c_lambda_values() {
        assert_eq!(c_lambda(exps(), 0.0).unwrap(), 0.0);
        // p|lambda|/q = 1 at lambda = -q/p
        assert!((c_lambda(exps(), -1.5 / 4.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(c_lambda(exps(), 0.1).is_err());
    }

    #[test]
    fn big_g_sign_split_for_negative_lambda() {
        let c = c_lambda(exps(), -2.0).unwrap();
        for i in 1..20 {
            let z = c * i as f64 / 20.0;
            assert!(big_g_eval(exps(), -2.0, z) < 0.0, "G should be negative on (0, c)");
        }
        for i in 1..20 {
            let z = c * (1.0 + i as f64);
            assert!(big_g_eval(exps(), -2.0, z) > 0.0, "G should be positive on (c, inf)");
        }
    }

    #[test]
    fn general_variant_checks_xi_independence() {
        let h: HFn = Arc::new(|la, _r, z, xi| la * z.abs().sqrt() * z.signum() + z.powi(3) + xi);
        let res = NonlinearitySpec::general(
            exps(),
            h,
            PinchingBounds::unit(),
            None,
            None,
            true,
        );
        assert!(res.is_err());
    }

    #[test]
    fn model_wrapped_as_general_matches_pinching_equality() {
        let e = exps();
        let h: HFn = Arc::new(move |la, _r, z, _xi| g_eval(e, la, z));
        let spec =
            NonlinearitySpec::general(e, h, PinchingBounds::unit(), None, None, true).unwrap();
        for &la in &[0.0, 0.5, 2.0] {
            for i in 1..12 {
                let z = -3.0 + 0.5 * i as f64;
                if z == 0.0 {
                    continue;
                }
                let lhs = z * spec.h(la, 0.3, z, 0.0);
                let rhs = la * z.abs().powf(e.q()) + z.abs().powf(e.p());
                assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
            }
        }
    }

    #[test]
    fn pinching_spot_check_accepts_model_and_flags_violations() {
        let spec = NonlinearitySpec::model(exps());
        assert!(spot_check_pinching(&spec, &[0.0, 1.0, -2.0], 3.0, 25).is_ok());
        // a wrongly-scaled h fails the sampled box
        let e = exps();
        let h: HFn = Arc::new(move |la, _r, z, _xi| 3.0 * g_eval(e, la, z));
        let bad =
            NonlinearitySpec::general(e, h, PinchingBounds::unit(), None, None, true).unwrap();
        assert!(spot_check_pinching(&bad, &[1.0], 2.0, 10).is_err());
    }

    #[test]
    fn energy_density_requires_variational() {
        let e = exps();
        let h: HFn = Arc::new(move |la, _r, z, xi| g_eval(e, la, z) + 0.1 * xi);
        let spec = NonlinearitySpec::general(e, h, PinchingBounds::unit(), None, None, false)
            .unwrap();
        let err = spec.energy_density(1.0, 0.5, 1.0).unwrap_err();
        assert!(err.to_string().contains("energy undefined"));
    }

    #[test]
    fn energy_of_zero_function_is_zero() {
        let spec = NonlinearitySpec::model(exps());
        let n = 1025;
        let x: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let tr = Trace::new(x, vec![0.0; n], vec![0.0; n]);
        assert_eq!(energy(&spec, 1.0, &tr).unwrap(), 0.0);
    }

    #[test]
    fn general_energy_density_matches_model_closed_form() {
        let e = exps();
        let h: HFn = Arc::new(move |la, _r, z, _xi| g_eval(e, la, z));
        let spec =
            NonlinearitySpec::general(e, h, PinchingBounds::unit(), None, None, true).unwrap();
        for &(la, z) in &[(1.0, 0.8), (-1.0, 1.3), (0.0, 2.0)] {
            let hq = spec.energy_density(la, 0.1, z).unwrap();
            let gq = big_g_eval(e, la, z);
            assert!((hq - gq).abs() < 1e-9, "H = {hq}, G = {gq}");
        }
    }

    proptest! {
        #[test]
        fn g_is_odd_and_big_g_even(la in -5.0_f64..5.0, z in -10.0_f64..10.0) {
            let e = exps();
            prop_assert!((g_eval(e, la, z) + g_eval(e, la, -z)).abs() <= 1e-12 * g_eval(e, la, z).abs().max(1.0));
            prop_assert!((big_g_eval(e, la, z) - big_g_eval(e, la, -z)).abs() == 0.0);
        }

        #[test]
        fn big_g_derivative_is_g(la in -3.0_f64..3.0, z in 0.05_f64..5.0) {
            let e = exps();
            let eps = 1e-6 * z.max(1.0);
            let fd = (big_g_eval(e, la, z + eps) - big_g_eval(e, la, z - eps)) / (2.0 * eps);
            let g = g_eval(e, la, z);
            prop_assert!((fd - g).abs() <= 1e-6 * g.abs().max(1.0), "fd = {}, g = {}", fd, g);
        }
    }
}

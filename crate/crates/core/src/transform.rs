//! The radial coordinate transform between the annulus problem
//! -Delta u = f_lambda(|x|, u, |grad u|) and the interval problem
//! -v'' = h_lambda(r, v, |v'|) on (0, 1).
//!
//! The diffeomorphism phi: [0,1] -> [rho1, rho2] absorbs the radial Laplacian
//! drift term; a radial profile w solves the annulus ODE exactly when
//! v = w o phi solves the interval problem with
//! h_lambda(r, z, xi) = phi'(r)^2 f_lambda(phi(r), z, xi / phi'(r)).

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::params::{NonlinearitySpec, PinchingBounds};
use crate::quad::qk15;
use crate::roots::{brent, RootTol};
use crate::solutions::PiecewiseSolution;
use crate::trace::Trace;

/// Annulus rho1 < |x| < rho2 in R^N. N = 1 is admitted (phi affine), so the
/// plain interval problem is a special case of the same pipeline.
#[derive(Debug, Clone, Copy)]
pub struct AnnulusGeometry {
    pub dim_n: u32,
    pub rho1: f64,
    pub rho2: f64,
}

impl AnnulusGeometry {
    pub fn new(dim_n: u32, rho1: f64, rho2: f64) -> Result<Self> {
        if dim_n < 1 {
            return Err(Error::InvalidParam("space dimension must be >= 1".into()));
        }
        if !(rho1.is_finite() && rho2.is_finite() && 0.0 < rho1 && rho1 < rho2) {
            return Err(Error::InvalidParam(format!(
                "radii must satisfy 0 < rho1 < rho2, got ({rho1}, {rho2})"
            )));
        }
        Ok(AnnulusGeometry { dim_n, rho1, rho2 })
    }
}

/// phi(r): log-linear branch for N = 2, power branch otherwise.
pub fn phi(geom: &AnnulusGeometry, r: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::Domain(format!("phi requires r in [0, 1], got {r}")));
    }
    let (r1, r2) = (geom.rho1, geom.rho2);
    Ok(if geom.dim_n == 2 {
        r1.powf(1.0 - r) * r2.powf(r)
    } else {
        let e = 2.0 - geom.dim_n as f64;
        (r1.powf(e) + r * (r2.powf(e) - r1.powf(e))).powf(1.0 / e)
    })
}

/// Closed-form inverse of phi (logarithm / power; no root-finding needed).
pub fn phi_inv(geom: &AnnulusGeometry, s: f64) -> Result<f64> {
    let (r1, r2) = (geom.rho1, geom.rho2);
    if !(r1 - 1e-12..=r2 + 1e-12).contains(&s) {
        return Err(Error::Domain(format!("phi_inv requires s in [{r1}, {r2}], got {s}")));
    }
    let s = s.clamp(r1, r2);
    Ok(if geom.dim_n == 2 {
        (s / r1).ln() / (r2 / r1).ln()
    } else {
        let e = 2.0 - geom.dim_n as f64;
        (s.powf(e) - r1.powf(e)) / (r2.powf(e) - r1.powf(e))
    })
}

/// phi'(r), per the two closed forms.
pub fn phi_prime(geom: &AnnulusGeometry, r: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::Domain(format!("phi_prime requires r in [0, 1], got {r}")));
    }
    let (r1, r2) = (geom.rho1, geom.rho2);
    Ok(if geom.dim_n == 2 {
        r1.powf(1.0 - r) * r2.powf(r) * (r2 / r1).ln()
    } else {
        let n = geom.dim_n as f64;
        let e = 2.0 - n;
        (r1.powf(e) - r2.powf(e)) / (n - 2.0)
            * (r1.powf(e) + r * (r2.powf(e) - r1.powf(e))).powf((n - 1.0) / e)
    })
}

/// phi''(r) = phi'(r)^2 (N - 1) / phi(r).
pub fn phi_second(geom: &AnnulusGeometry, r: f64) -> Result<f64> {
    let p = phi(geom, r)?;
    let dp = phi_prime(geom, r)?;
    Ok(dp * dp * (geom.dim_n as f64 - 1.0) / p)
}

/// Bounds on phi' and the effective pinching constants m = m1 m2^2, M = M1 M2^2.
#[derive(Debug, Clone, Copy)]
pub struct TransformConstants {
    pub m2: f64,
    pub big_m2: f64,
    pub m_eff: f64,
    pub big_m_eff: f64,
}

pub fn transform_constants(geom: &AnnulusGeometry, m1: f64, big_m1: f64) -> Result<TransformConstants> {
    if !(m1 > 0.0 && big_m1 >= m1) {
        return Err(Error::InvalidParam("need 0 < m1 <= M1".into()));
    }
    let (r1, r2) = (geom.rho1, geom.rho2);
    let (m2, big_m2) = if geom.dim_n == 2 {
        (r1 * (r2 / r1).ln(), r2 * (r2 / r1).ln())
    } else {
        let n = geom.dim_n as f64;
        (
            r1 / (n - 2.0) * (1.0 - (r1 / r2).powf(n - 2.0)),
            r2 / (n - 2.0) * ((r2 / r1).powf(n - 2.0) - 1.0),
        )
    };
    Ok(TransformConstants { m2, big_m2, m_eff: m1 * m2 * m2, big_m_eff: big_m1 * big_m2 * big_m2 })
}

/// sup |phi''| evaluated on a grid (no closed form is available for N != 2).
pub fn phi_second_sup(geom: &AnnulusGeometry) -> f64 {
    let n = 10_001;
    let mut worst = 0.0_f64;
    for i in 0..n {
        let r = i as f64 / (n - 1) as f64;
        if let Ok(v) = phi_second(geom, r) {
            worst = worst.max(v.abs());
        }
    }
    worst
}

/// Transform an annulus nonlinearity f (with pinching constants m1, M1) into
/// the interval nonlinearity h_lambda(r, z, xi) = phi'^2 f(phi(r), z, xi/phi').
///
/// The pinching bounds become (m1 m2^2, M1 M2^2); the (B1) constant follows
/// the chain K(la, s) = 2 m2^{-1} |phi''| + (s m2^{-2} |phi''| + m2^{-1} + M2) K1(la, s/m2).
/// Derivative callables are produced when the source provides them (the model
/// variant has d_r f = d_xi f = 0); otherwise downstream checks that need them
/// are skipped.
pub fn transform_nonlinearity(
    geom: &AnnulusGeometry,
    f_spec: &NonlinearitySpec,
) -> Result<NonlinearitySpec> {
    let g = *geom;
    let src = f_spec.clone();
    let bounds_src = f_spec.bounds();
    let tc = transform_constants(geom, bounds_src.m_small, bounds_src.m_big)?;
    let dd2_sup = phi_second_sup(geom);

    let h: crate::params::HFn = {
        let src = src.clone();
        Arc::new(move |la, r, z, xi| {
            let dp = phi_prime(&g, r.clamp(0.0, 1.0)).unwrap();
            let s = phi(&g, r.clamp(0.0, 1.0)).unwrap();
            dp * dp * src.h(la, s, z, xi / dp)
        })
    };

    let k_bound = bounds_src.k_bound.clone().map(|k1| {
        let m2 = tc.m2;
        let big_m2 = tc.big_m2;
        let kb: crate::params::KBoundFn = Arc::new(move |la, s| {
            2.0 / m2 * dd2_sup + (s / (m2 * m2) * dd2_sup + 1.0 / m2 + big_m2) * k1(la, s / m2)
        });
        kb
    });
    let bounds = PinchingBounds::new(tc.m_eff, tc.big_m_eff, k_bound)?;

    // chain-rule derivatives: d_r h = 2 phi' phi'' f + phi'^3 d_r f - xi phi'' d_xi f,
    // d_xi h = phi' d_xi f. The model f is autonomous, so only the first term survives.
    let model_src = f_spec.is_model();
    let (dr_f, dxi_f) = (f_spec.dr_h().cloned(), f_spec.dxi_h().cloned());
    let dr_h: Option<crate::params::HFn> = if model_src || (dr_f.is_some() && dxi_f.is_some()) {
        let src = src.clone();
        Some(Arc::new(move |la, r, z, xi| {
            let r = r.clamp(0.0, 1.0);
            let dp = phi_prime(&g, r).unwrap();
            let ddp = phi_second(&g, r).unwrap();
            let s = phi(&g, r).unwrap();
            let mut out = 2.0 * dp * ddp * src.h(la, s, z, xi / dp);
            if let (Some(drf), Some(dxif)) = (&dr_f, &dxi_f) {
                out += dp * dp * dp * drf(la, s, z, xi / dp) - xi * ddp * dxif(la, s, z, xi / dp);
            }
            out
        }))
    } else {
        None
    };
    let dxi_src = f_spec.dxi_h().cloned();
    let dxi_h: Option<crate::params::HFn> = if model_src {
        Some(Arc::new(|_, _, _, _| 0.0))
    } else {
        dxi_src.map(|dxif| {
            let src_arc: crate::params::HFn = dxif;
            let f: crate::params::HFn = Arc::new(move |la, r, z, xi| {
                let dp = phi_prime(&g, r.clamp(0.0, 1.0)).unwrap();
                let s = phi(&g, r.clamp(0.0, 1.0)).unwrap();
                dp * src_arc(la, s, z, xi / dp)
            });
            f
        })
    };

    NonlinearitySpec::general(
        f_spec.exponents(),
        h,
        bounds,
        dr_h,
        dxi_h,
        f_spec.is_variational(),
    )
}

/// The radial profile w on [rho1, rho2] pulled back from an interval solution,
/// plus the transported sample pairs (phi(r_i), v_i), which carry the sup norm
/// over bitwise.
#[derive(Debug, Clone)]
pub struct RadialProfile {
    pub trace: Trace,
    pub transported: Vec<(f64, f64)>,
}

impl RadialProfile {
    pub fn sup_norm(&self) -> f64 {
        self.transported.iter().fold(0.0, |m, &(_, v)| m.max(v.abs()))
    }

    /// Interior sign changes of w on the radial grid.
    pub fn sign_changes(&self) -> usize {
        let sup = self.trace.sup_norm();
        let thr = 1e-9 * sup;
        let mut count = 0;
        let mut last: i8 = 0;
        for &w in &self.trace.u {
            let s = if w > thr {
                1
            } else if w < -thr {
                -1
            } else {
                0
            };
            if s != 0 {
                if last != 0 && s != last {
                    count += 1;
                }
                last = s;
            }
        }
        count
    }
}

/// w(s) = v(phi^{-1}(s)) with w'(s) = v'(r) / phi'(r), sampled on a uniform
/// radial grid, with (v, v') supplied by an evaluator.
///
/// The radial grid does not align with the interval grid, and the flux
/// residual divides slope differences by the cell width, so the evaluator
/// should be exact (dense integrator output or arch profiles) rather than
/// grid interpolation whenever the residual matters.
pub fn pullback_profile<F: FnMut(f64) -> (f64, f64)>(
    geom: &AnnulusGeometry,
    mut eval_v: F,
    v_trace: &Trace,
    radial_points: usize,
) -> Result<RadialProfile> {
    let n = radial_points.max(65);
    let (r1, r2) = (geom.rho1, geom.rho2);
    let mut s = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    let mut dw = Vec::with_capacity(n);
    for i in 0..n {
        let sk = r1 + (r2 - r1) * i as f64 / (n - 1) as f64;
        let r = phi_inv(geom, sk)?;
        let (u, du) = eval_v(r);
        let dp = phi_prime(geom, r)?;
        s.push(sk);
        w.push(u);
        dw.push(du / dp);
    }
    // boundary zeros are exact
    w[0] = 0.0;
    w[n - 1] = 0.0;
    let transported = v_trace
        .x
        .iter()
        .zip(&v_trace.u)
        .map(|(&r, &u)| (phi(geom, r).unwrap(), u))
        .collect();
    Ok(RadialProfile { trace: Trace::new(s, w, dw), transported })
}

/// Pullback through the sampled trace of a solution (cubic Hermite between
/// grid points).
pub fn pullback_solution(
    geom: &AnnulusGeometry,
    v: &PiecewiseSolution,
    radial_points: usize,
) -> Result<RadialProfile> {
    pullback_profile(geom, |r| v.grid.eval(r), &v.grid, radial_points)
}

/// Max over radial cells of the integrated-form residual of
/// -(s^{N-1} w')' = s^{N-1} f_lambda(s, w, |w'|), normalized per unit cell and
/// by the flux weight, so the number reports in w'' units.
pub fn radial_residual(
    geom: &AnnulusGeometry,
    f_spec: &NonlinearitySpec,
    lambda: f64,
    radial: &Trace,
) -> f64 {
    let nm1 = geom.dim_n as f64 - 1.0;
    let mut worst = 0.0_f64;
    for i in 0..radial.len() - 1 {
        let (sl, sr) = (radial.x[i], radial.x[i + 1]);
        let h = sr - sl;
        let (wl, wr) = (radial.u[i], radial.u[i + 1]);
        let crossing = if wl == 0.0 && wr == 0.0 {
            None
        } else if wl == 0.0 || wl.abs() <= 1e-3 * (wr - wl).abs() {
            Some(sl)
        } else if wr == 0.0 || wr.abs() <= 1e-3 * (wr - wl).abs() {
            Some(sr)
        } else if wl.signum() != wr.signum() {
            brent(
                |s| radial.eval(s).0,
                sl,
                sr,
                RootTol { abs_x: 1e-15, rel_x: 1e-14, max_iter: 100 },
            )
            .ok()
        } else {
            None
        };
        let mut f = |s: f64| {
            let (u, du) = radial.eval(s);
            s.powf(nm1) * f_spec.h(lambda, s, u, du.abs())
        };
        let cell = match crossing {
            Some(s0) => {
                let mut total = 0.0;
                if s0 > sl {
                    total += qk15(&mut |y: f64| 2.0 * y * f(s0 - y * y), 0.0, (s0 - sl).sqrt()).0;
                }
                if sr > s0 {
                    total += qk15(&mut |y: f64| 2.0 * y * f(s0 + y * y), 0.0, (sr - s0).sqrt()).0;
                }
                total
            }
            None => qk15(&mut f, sl, sr).0,
        };
        let flux_l = sl.powf(nm1) * radial.du[i];
        let flux_r = sr.powf(nm1) * radial.du[i + 1];
        let smid = 0.5 * (sl + sr);
        let r = (flux_r - flux_l + cell) / (h * smid.powf(nm1));
        worst = worst.max(r.abs());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Exponents;
    use crate::solutions::{build_nodal, DEFAULT_GRID_POINTS};
    use crate::timemap::BranchSide;

    fn exps() -> Exponents {
        Exponents::new(4.0, 1.5).unwrap()
    }

    #[test]
    fn phi_endpoints_and_midpoint() {
        let g2 = AnnulusGeometry::new(2, 1.0, std::f64::consts::E).unwrap();
        assert!((phi(&g2, 0.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((phi(&g2, 1.0).unwrap() - std::f64::consts::E).abs() < 1e-15);
        assert!((phi(&g2, 0.5).unwrap() - 0.5_f64.exp()).abs() < 1e-14);
        let g3 = AnnulusGeometry::new(3, 1.0, 2.0).unwrap();
        assert!((phi(&g3, 0.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((phi(&g3, 1.0).unwrap() - 2.0).abs() < 1e-15);
        assert!(phi(&g3, -0.1).is_err());
        assert!(phi(&g3, 1.1).is_err());
    }

    #[test]
    fn transform_constants_closed_forms() {
        let g2 = AnnulusGeometry::new(2, 1.0, std::f64::consts::E).unwrap();
        let tc = transform_constants(&g2, 1.0, 1.0).unwrap();
        assert!((tc.m2 - 1.0).abs() < 1e-15);
        assert!((tc.big_m2 - std::f64::consts::E).abs() < 1e-14);
        assert!((tc.m_eff - 1.0).abs() < 1e-14);
        assert!((tc.big_m_eff - std::f64::consts::E.powi(2)).abs() < 1e-13);
        let g3 = AnnulusGeometry::new(3, 1.0, 2.0).unwrap();
        let tc = transform_constants(&g3, 1.0, 1.0).unwrap();
        assert!((tc.m2 - 0.5).abs() < 1e-15);
        assert!((tc.big_m2 - 2.0).abs() < 1e-15);
    }

    #[test]
    fn phi_prime_bounds_and_ode_identity() {
        for geom in [
            AnnulusGeometry::new(1, 0.7, 2.3).unwrap(),
            AnnulusGeometry::new(2, 1.0, std::f64::consts::E).unwrap(),
            AnnulusGeometry::new(3, 1.0, 2.0).unwrap(),
            AnnulusGeometry::new(5, 0.5, 1.5).unwrap(),
        ] {
            let tc = transform_constants(&geom, 1.0, 1.0).unwrap();
            let n = 10_000;
            let mut prev = phi(&geom, 0.0).unwrap();
            for i in 0..=n {
                let r = i as f64 / n as f64;
                let val = phi(&geom, r).unwrap();
                if i > 0 {
                    assert!(val > prev, "phi not strictly increasing at r = {r}");
                }
                prev = val;
                let dp = phi_prime(&geom, r).unwrap();
                assert!(
                    dp >= tc.m2 * (1.0 - 1e-12) && dp <= tc.big_m2 * (1.0 + 1e-12),
                    "phi' = {dp} outside [{}, {}] at r = {r} (N = {})",
                    tc.m2,
                    tc.big_m2,
                    geom.dim_n
                );
                // phi'' = phi'^2 (N-1)/phi against a central difference
                if i > 0 && i < n {
                    let e = 1e-6;
                    let fd = (phi_prime(&geom, r + e).unwrap() - phi_prime(&geom, r - e).unwrap())
                        / (2.0 * e);
                    let dd = phi_second(&geom, r).unwrap();
                    assert!(
                        (fd - dd).abs() <= 1e-6 * dd.abs().max(1.0),
                        "phi'' identity fails at r = {r}: {fd} vs {dd}"
                    );
                }
            }
        }
    }

    #[test]
    fn phi_round_trip() {
        for geom in [
            AnnulusGeometry::new(2, 1.0, 2.0).unwrap(),
            AnnulusGeometry::new(3, 1.0, 2.0).unwrap(),
        ] {
            for i in 0..=100 {
                let r = i as f64 / 100.0;
                let back = phi_inv(&geom, phi(&geom, r).unwrap()).unwrap();
                assert!((back - r).abs() <= 1e-12, "round trip off at r = {r}");
            }
        }
    }

    #[test]
    fn transformed_model_nonlinearity() {
        let geom = AnnulusGeometry::new(2, 1.0, std::f64::consts::E).unwrap();
        let f = NonlinearitySpec::model(exps());
        let h = transform_nonlinearity(&geom, &f).unwrap();
        // phi'(0) = rho1 ln(rho2/rho1) = 1, so h(0, z=1) = g_0(1) = 1
        assert!((h.h(0.0, 0.0, 1.0, 0.0) - 1.0).abs() < 1e-14);
        assert!(h.is_variational());
        // pinching chain on a sample grid for lambda >= 0
        let b = h.bounds();
        for &la in &[0.0, 0.5, 2.0] {
            for i in 1..=10 {
                let z = -2.0 + 0.4 * i as f64;
                if z == 0.0 {
                    continue;
                }
                for &r in &[0.0, 0.3, 0.8, 1.0] {
                    let lhs = z * h.h(la, r, z, 0.7);
                    let pin = la * z.abs().powf(1.5) + z.abs().powf(4.0);
                    assert!(lhs >= b.m_small * pin * (1.0 - 1e-12));
                    assert!(lhs <= b.m_big * pin * (1.0 + 1e-12));
                }
            }
        }
        // K(la, s) is positive and finite
        let k = b.k_bound.expect("transformed model spec must carry a K bound");
        assert!(k(1.0, 2.0) > 0.0 && k(1.0, 2.0).is_finite());
    }

    #[test]
    fn pullback_zero_and_norm_identity() {
        let geom = AnnulusGeometry::new(3, 1.0, 2.0).unwrap();
        let n = 257;
        let xs: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let zero = PiecewiseSolution {
            segments: vec![],
            grid: Trace::new(xs, vec![0.0; n], vec![0.0; n]),
            lambda: 0.0,
            node_count: 0,
            sign_pattern: vec![],
        };
        let prof = pullback_solution(&geom, &zero, 129).unwrap();
        assert!(prof.trace.u.iter().all(|&w| w == 0.0));

        // transported samples preserve the sup norm bitwise
        let sol = build_nodal(exps(), 1.0, 1, BranchSide::Upper, 1, DEFAULT_GRID_POINTS).unwrap();
        let prof = pullback_solution(&geom, &sol, 2049).unwrap();
        let sup_v = sol.grid.sup_norm();
        assert_eq!(prof.sup_norm(), sup_v);
        // interior sign changes preserved
        assert_eq!(prof.sign_changes(), 1);
    }

    #[test]
    fn pullback_residual_of_interval_solution_in_dimension_one() {
        // N = 1 with [rho1, rho2] = [1, 2]: phi is affine and the pulled-back
        // profile solves -w'' = f(w) with f = g rescaled by the affine map;
        // using the interval solution of the transformed h verifies the full
        // round trip including the residual surface.
        let geom = AnnulusGeometry::new(1, 1.0, 2.0).unwrap();
        let f = NonlinearitySpec::model(exps());
        let h = transform_nonlinearity(&geom, &f).unwrap();
        // solve -v'' = h(r, v) by shooting, then pull back through the dense
        // trajectory for exact slopes on the radial grid
        let cfg = crate::shooting::SearchCfg::default();
        let sols = crate::shooting::find_j_nodal(&h, 0.0, 0, 1, &cfg).unwrap();
        assert!(!sols.is_empty());
        let shot = crate::shooting::shoot(
            &h,
            0.0,
            sols[0].grid.du[0],
            1.0,
            usize::MAX,
            &cfg.shoot,
        )
        .unwrap();
        let prof = pullback_profile(
            &geom,
            |r| {
                let y = shot.dense.eval(r);
                (y[0], y[1])
            },
            &sols[0].grid,
            2049,
        )
        .unwrap();
        let res = radial_residual(&geom, &f, 0.0, &prof.trace);
        assert!(res <= 1e-5, "radial residual {res:.3e}");
    }
}

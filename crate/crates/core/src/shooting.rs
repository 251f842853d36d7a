//! Shooting solver for -v'' = h_lambda(r, v, |v'|), v(0) = v(1) = 0.
//!
//! A trajectory is integrated from (0, slope0) with zero crossings located by
//! dense-output root finding; integration restarts on each crossing so every
//! step sees a smooth right hand side (the q-term is only Hoelder at v = 0).
//! j-nodal solutions are found by scanning the initial slope and solving
//! "position of the (j+1)-th crossing = 1" on each bracket.

use crate::error::{Error, Result};
use crate::ode::{DenseSolution, Dopri5, OdeCfg, State};
use crate::params::{big_g_eval, c_lambda, Exponents, NonlinearitySpec};
use crate::roots::{brent, RootTol};
use crate::solutions::{flux_residual, ArchSegment, PiecewiseSolution, Segment};
use crate::timemap::lambda_j_star;
use crate::trace::Trace;

/// Numerical controls for a single shot.
#[derive(Debug, Clone, Copy)]
pub struct ShootCfg {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Escape ceiling on |v| and |v'|.
    pub ceiling: f64,
    pub max_steps: usize,
}

impl Default for ShootCfg {
    fn default() -> Self {
        ShootCfg { abs_tol: 1e-11, rel_tol: 1e-10, ceiling: 1e8, max_steps: 2_000_000 }
    }
}

impl ShootCfg {
    fn ode(&self) -> OdeCfg {
        OdeCfg {
            abs_tol: self.abs_tol,
            rel_tol: self.rel_tol,
            h_max: 0.05,
            max_steps: self.max_steps,
            ceiling: self.ceiling,
        }
    }
}

/// Outcome of integrating one initial slope.
#[derive(Debug, Clone)]
pub struct ShootResult {
    pub slope0: f64,
    /// v at the stopping position (r = stop_r unless stopped on a crossing count).
    pub terminal_value: f64,
    /// Zero-crossing positions in increasing order (r = 0 excluded).
    pub crossings: Vec<f64>,
    pub dense: DenseSolution,
}

impl ShootResult {
    /// Sample (v, v') on a uniform grid over [0, x_end].
    pub fn sample(&self, x_end: f64, points: usize) -> Trace {
        let n = points.max(65);
        let xs: Vec<f64> = (0..n).map(|i| x_end * i as f64 / (n - 1) as f64).collect();
        let mut us = Vec::with_capacity(n);
        let mut dus = Vec::with_capacity(n);
        for &x in &xs {
            let y = self.dense.eval(x);
            us.push(y[0]);
            dus.push(y[1]);
        }
        // the boundary values are exact by construction
        us[0] = 0.0;
        Trace::new(xs, us, dus)
    }
}

/// Integrate from v(0) = 0, v'(0) = slope0 until r = stop_r or until
/// `max_crossings` zero crossings have been located, whichever comes first.
pub fn shoot(
    spec: &NonlinearitySpec,
    lambda: f64,
    slope0: f64,
    stop_r: f64,
    max_crossings: usize,
    cfg: &ShootCfg,
) -> Result<ShootResult> {
    if slope0 == 0.0 {
        return Err(Error::InvalidParam(
            "slope0 must be nonzero: zero slope at a boundary zero forces the trivial solution"
                .into(),
        ));
    }
    let f = |r: f64, y: &State| -> State { [y[1], -spec.h(lambda, r, y[0], y[1].abs())] };
    let mut solver = Dopri5::new(&f, 0.0, [0.0, slope0], cfg.ode());
    let mut dense = DenseSolution::default();
    let mut crossings = Vec::new();

    while solver.t < stop_r && crossings.len() < max_crossings {
        let before = solver.y[0];
        // The q-term is only Hoelder at v = 0, and a step that strides across
        // the crossing carries an O(h^{q+1}) local error invisible to the
        // embedded estimate. Approach an imminent crossing geometrically so
        // the kink always sits inside a ~1e-7 step.
        let mut limit = stop_r;
        if before != 0.0 && solver.y[1] != 0.0 && before.signum() != solver.y[1].signum() {
            let d = -before / solver.y[1];
            if d < 0.05 {
                limit = limit.min(solver.t + (1.05 * d).max(1e-7));
            }
        }
        let step = solver.step(limit)?;
        let after = solver.y[0];
        if !after.is_finite() || after.abs() > cfg.ceiling || solver.y[1].abs() > cfg.ceiling {
            return Err(Error::Escaped { r_escape: solver.t });
        }
        // look for a crossing inside the step (midpoint guards against a
        // double crossing within a single step)
        let mid = step.eval(step.t0 + 0.5 * step.h)[0];
        let sign_change = (before > 0.0 && after < 0.0)
            || (before < 0.0 && after > 0.0)
            || (before.signum() == after.signum() && mid.signum() != before.signum() && before != 0.0);
        if before != 0.0 && sign_change {
            let target = if mid.signum() != before.signum() {
                step.t0 + 0.5 * step.h
            } else {
                step.t1()
            };
            let r_cross = brent(
                |r| step.eval(r)[0],
                step.t0,
                target,
                RootTol { abs_x: 1e-14, rel_x: 1e-14, max_iter: 200 },
            )?;
            let w_cross = step.eval(r_cross)[1];
            // truncate the dense record at the crossing and restart exactly on it
            dense.steps.push(step.truncated(r_cross));
            crossings.push(r_cross);
            solver.restart(r_cross, [0.0, w_cross]);
            continue;
        }
        dense.steps.push(step);
    }
    Ok(ShootResult { slope0, terminal_value: solver.y[0], crossings, dense })
}

/// Slope-scan controls for the j-nodal search.
#[derive(Debug, Clone, Copy)]
pub struct SearchCfg {
    pub min_magnitude: f64,
    pub max_magnitude: f64,
    pub scan_points: usize,
    /// Cap on how far past r = 1 a trajectory is followed while counting crossings.
    pub r_cap: f64,
    pub shoot: ShootCfg,
}

impl Default for SearchCfg {
    fn default() -> Self {
        SearchCfg {
            min_magnitude: 1e-6,
            max_magnitude: 1e6,
            scan_points: 400,
            r_cap: 4.0,
            shoot: ShootCfg::default(),
        }
    }
}

/// Position of the (j+1)-th zero crossing, or infinity when the trajectory has
/// fewer crossings before `r_cap`.
fn crossing_position(
    spec: &NonlinearitySpec,
    lambda: f64,
    slope0: f64,
    j: usize,
    cfg: &SearchCfg,
) -> f64 {
    match shoot(spec, lambda, slope0, cfg.r_cap, j + 1, &cfg.shoot) {
        Ok(res) if res.crossings.len() == j + 1 => res.crossings[j],
        _ => f64::INFINITY,
    }
}

/// All j-nodal solutions with the given leading sign found by the slope scan.
/// Returns an empty list when no bracket is found.
pub fn find_j_nodal(
    spec: &NonlinearitySpec,
    lambda: f64,
    j: usize,
    leading_sign: i8,
    cfg: &SearchCfg,
) -> Result<Vec<PiecewiseSolution>> {
    if leading_sign != 1 && leading_sign != -1 {
        return Err(Error::InvalidParam("leading_sign must be +1 or -1".into()));
    }
    if spec.is_model() {
        let la_star = lambda_j_star(spec.exponents(), j)?;
        if lambda < la_star {
            return Err(Error::Domain(format!(
                "lambda = {lambda} < lambda_{{{j}*}} = {la_star}: the initial value problem loses \
                 uniqueness at dead cores; construct them analytically instead"
            )));
        }
    }
    let mut roots: Vec<f64> = Vec::new();
    let ratio = cfg.max_magnitude / cfg.min_magnitude;
    let mags: Vec<f64> = (0..cfg.scan_points)
        .map(|i| cfg.min_magnitude * ratio.powf(i as f64 / (cfg.scan_points - 1) as f64))
        .collect();
    let gvals: Vec<f64> = mags
        .iter()
        .map(|&m| crossing_position(spec, lambda, leading_sign as f64 * m, j, cfg) - 1.0)
        .collect();
    for i in 0..mags.len() - 1 {
        let (g0, g1) = (gvals[i], gvals[i + 1]);
        if !(g0.is_finite() && g1.is_finite()) || g0.signum() == g1.signum() || g0 == 0.0 {
            continue;
        }
        let s = brent(
            |m| crossing_position(spec, lambda, leading_sign as f64 * m, j, cfg) - 1.0,
            mags[i],
            mags[i + 1],
            RootTol { abs_x: 0.0, rel_x: 1e-13, max_iter: 200 },
        )?;
        roots.push(leading_sign as f64 * s);
    }

    let mut found: Vec<PiecewiseSolution> = Vec::new();
    for slope0 in roots {
        let sol = solution_from_slope(spec, lambda, slope0, j, &cfg.shoot)?;
        let duplicate = found.iter().any(|other| {
            let mut d = 0.0_f64;
            for k in 0..sol.grid.len() {
                d = d.max((sol.grid.u[k] - other.grid.u[k]).abs());
            }
            d < 1e-6 * (1.0 + sol.sup_norm())
        });
        if !duplicate {
            found.push(sol);
        }
    }
    found.sort_by(|a, b| {
        a.grid.du[0].partial_cmp(&b.grid.du[0]).unwrap()
    });
    Ok(found)
}

/// All j-nodal solutions over both leading signs (four below the fold for the
/// model problem: +-lower and +-upper), ordered by initial slope.
pub fn find_all_j_nodal(
    spec: &NonlinearitySpec,
    lambda: f64,
    j: usize,
    cfg: &SearchCfg,
) -> Result<Vec<PiecewiseSolution>> {
    let mut out = find_j_nodal(spec, lambda, j, -1, cfg)?;
    out.extend(find_j_nodal(spec, lambda, j, 1, cfg)?);
    out.sort_by(|a, b| a.grid.du[0].partial_cmp(&b.grid.du[0]).unwrap());
    Ok(out)
}

/// Shoot with a solved slope and package the trajectory on [0, 1] as a
/// piecewise solution (arch intervals from the located crossings).
pub fn solution_from_slope(
    spec: &NonlinearitySpec,
    lambda: f64,
    slope0: f64,
    j: usize,
    cfg: &ShootCfg,
) -> Result<PiecewiseSolution> {
    let res = shoot(spec, lambda, slope0, 1.0, usize::MAX, cfg)?;
    // crossings within 1e-4 of a boundary are that boundary's zero (arch
    // widths are O(1/(j+1)), far above this scale; matching solves the
    // terminal crossing onto r = 1 to integrator-noise accuracy)
    let interior: Vec<f64> =
        res.crossings.iter().cloned().filter(|&r| r > 1e-4 && r < 1.0 - 1e-4).collect();
    if interior.len() != j {
        return Err(Error::Numerics(format!(
            "expected {j} interior crossings, trajectory has {}",
            interior.len()
        )));
    }
    let trace = res.sample(1.0, crate::solutions::DEFAULT_GRID_POINTS);
    let mut boundaries = vec![0.0];
    boundaries.extend(interior.iter().cloned());
    boundaries.push(1.0);
    let mut segments = Vec::with_capacity(j + 1);
    let mut pattern = Vec::with_capacity(j + 1);
    let exps = spec.exponents();
    for k in 0..=j {
        let (a, b) = (boundaries[k], boundaries[k + 1]);
        // slope at the left boundary determines the arch sign
        let w_left = res.dense.eval(a)[1];
        let sign = if k == 0 {
            if slope0 > 0.0 {
                1
            } else {
                -1
            }
        } else if w_left > 0.0 {
            1
        } else {
            -1
        };
        let amplitude = if spec.is_model() {
            // energy at the node gives the amplitude through G_lambda(alpha) = w^2/2
            amplitude_from_node_slope(exps, lambda, w_left.abs())?
        } else {
            arch_max_from_dense(&res.dense, a, b)
        };
        pattern.push(sign);
        segments.push(Segment::Arch(ArchSegment { interval: (a, b), amplitude, sign, lambda }));
    }
    Ok(PiecewiseSolution { segments, grid: trace, lambda, node_count: j, sign_pattern: pattern })
}

/// Invert G_lambda(alpha) = E for the arch amplitude (E = w^2/2 at a node).
pub fn amplitude_from_node_slope(exps: Exponents, lambda: f64, w: f64) -> Result<f64> {
    let energy = 0.5 * w * w;
    if energy <= 0.0 {
        return Err(Error::InvalidParam("node slope must be nonzero".into()));
    }
    let lo = if lambda < 0.0 { c_lambda(exps, lambda)? } else { 0.0 };
    let mut hi = (lo.max(1.0)) * 2.0;
    for _ in 0..200 {
        if big_g_eval(exps, lambda, hi) >= energy {
            break;
        }
        hi *= 2.0;
    }
    brent(
        |a| big_g_eval(exps, lambda, a) - energy,
        lo,
        hi,
        RootTol { abs_x: 0.0, rel_x: 1e-13, max_iter: 200 },
    )
}

fn arch_max_from_dense(dense: &DenseSolution, a: f64, b: f64) -> f64 {
    let n = 512;
    let mut best = 0.0_f64;
    let mut x_best = a;
    for i in 0..=n {
        let x = a + (b - a) * i as f64 / n as f64;
        let v = dense.eval(x)[0].abs();
        if v > best {
            best = v;
            x_best = x;
        }
    }
    // parabolic refinement around the discrete max
    let h = (b - a) / n as f64;
    let (um, u0, up) = (
        dense.eval((x_best - h).max(a))[0].abs(),
        best,
        dense.eval((x_best + h).min(b))[0].abs(),
    );
    let denom = um - 2.0 * u0 + up;
    if denom < 0.0 {
        u0 - (up - um) * (up - um) / (8.0 * denom)
    } else {
        u0
    }
}

/// Sup norm of the Green's-function residual
/// S_lambda(v) = v - int_0^1 G(., s) h_lambda(s, v(s), |v'(s)|) ds
/// over the trace grid, with G(x,s) = x(1-s) for x <= s and s(1-x) for s <= x.
pub fn residual_operator(spec: &NonlinearitySpec, lambda: f64, trace: &Trace) -> f64 {
    let n = trace.len();
    let rhs = |x: f64| {
        let (u, du) = trace.eval(x);
        spec.h(lambda, x, u, du.abs())
    };
    // prefix[k] = int_0^{x_k} s w(s) ds, suffix[k] = int_{x_k}^1 (1-s) w(s) ds
    let mut prefix = vec![0.0_f64; n];
    let mut suffix = vec![0.0_f64; n];
    for i in 0..n - 1 {
        let (a, b) = (trace.x[i], trace.x[i + 1]);
        let du_cell = (trace.u[i + 1] - trace.u[i]).abs();
        let crossing = if trace.u[i] == 0.0 && trace.u[i + 1] == 0.0 {
            None
        } else if trace.u[i].abs() <= 1e-3 * du_cell {
            Some(a)
        } else if trace.u[i + 1].abs() <= 1e-3 * du_cell {
            Some(b)
        } else if trace.u[i].signum() != trace.u[i + 1].signum() {
            brent(
                |x| trace.eval(x).0,
                a,
                b,
                RootTol { abs_x: 1e-15, rel_x: 1e-14, max_iter: 100 },
            )
            .ok()
        } else {
            None
        };
        fn cell<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, crossing: Option<f64>) -> f64 {
            match crossing {
                Some(x0) => {
                    let mut total = 0.0;
                    if x0 > a {
                        total += crate::quad::qk15(
                            &mut |y: f64| 2.0 * y * f(x0 - y * y),
                            0.0,
                            (x0 - a).sqrt(),
                        )
                        .0;
                    }
                    if b > x0 {
                        total += crate::quad::qk15(
                            &mut |y: f64| 2.0 * y * f(x0 + y * y),
                            0.0,
                            (b - x0).sqrt(),
                        )
                        .0;
                    }
                    total
                }
                None => crate::quad::qk15(&mut f, a, b).0,
            }
        }
        prefix[i + 1] = prefix[i] + cell(|s| s * rhs(s), a, b, crossing);
        suffix[i] = cell(|s| (1.0 - s) * rhs(s), a, b, crossing);
    }
    for i in (0..n - 1).rev() {
        suffix[i] += suffix[i + 1];
    }
    let mut worst = 0.0_f64;
    for k in 0..n {
        let x = trace.x[k];
        let integral = (1.0 - x) * prefix[k] + x * suffix[k];
        worst = worst.max((trace.u[k] - integral).abs());
    }
    worst
}

/// Flux residual of a trace against the general right hand side h_lambda.
pub fn general_flux_residual(spec: &NonlinearitySpec, lambda: f64, trace: &Trace) -> f64 {
    flux_residual(trace, |x, u, du| spec.h(lambda, x, u, du.abs()))
}

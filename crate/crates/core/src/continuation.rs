//! Pseudo-arclength continuation of the solution continua in (lambda, slope0).
//!
//! Shooting turns the boundary value problem into the scalar matching equation
//! F(lambda, slope0) = r_{j+1}(lambda, slope0) - 1 = 0 (position of the
//! (j+1)-th zero crossing), a smooth two-parameter map whose solution curve is
//! the continuum D_j^+-. Predictor-corrector steps follow it through the fold
//! at Lambda_j; for the model nonlinearity the trace stops just above the
//! dead-core threshold lambda_{j*}, where the branch fans out into the
//! non-isolated dead-core family.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::{energy, NonlinearitySpec};
use crate::shooting::{find_j_nodal, shoot, solution_from_slope, SearchCfg, ShootCfg};
use crate::timemap::lambda_j_star;

/// One accepted continuation point. The (lambda, slope0) pair is the solution
/// handle: the profile is reproducible by a single shot.
#[derive(Debug, Clone, Serialize)]
pub struct BranchPoint {
    pub lambda: f64,
    pub slope0: f64,
    pub sup_norm: f64,
    pub c1_norm: f64,
    pub node_count: usize,
    pub energy: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TerminationReason {
    ReachedLambdaMin,
    DeadCoreThreshold,
    StepFailure,
    /// The branch arm ran into the bifurcation point (0, 0): the lower-arm
    /// norms fell below the configured floor.
    ReachedTrivialSolution,
}

/// An ordered continuation record of one continuum, from the trivial end
/// (lower arm, norms -> 0) through the fold down to the negative-lambda end.
#[derive(Debug, Clone, Serialize)]
pub struct Branch {
    pub points: Vec<BranchPoint>,
    pub j: usize,
    pub sign: i8,
    pub turning_point_lambda: Option<f64>,
    /// Index into `points` closest to the fold.
    pub fold_index: Option<usize>,
    pub terminated_reason: TerminationReason,
}

#[derive(Debug, Clone, Copy)]
pub struct StepCfg {
    pub h0: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub max_corrector_iters: usize,
    /// Consecutive easy accepts before the step doubles.
    pub easy_streak: usize,
    /// Lower-arm stop: sup norm below this means the trivial solution is reached.
    pub min_sup_norm: f64,
    pub max_steps_per_arm: usize,
    pub shoot: ShootCfg,
    /// Cap on how far past r = 1 crossings are counted.
    pub r_cap: f64,
}

impl Default for StepCfg {
    fn default() -> Self {
        StepCfg {
            h0: 0.02,
            h_min: 1e-6,
            h_max: 0.1,
            max_corrector_iters: 8,
            easy_streak: 3,
            min_sup_norm: 1e-3,
            max_steps_per_arm: 20_000,
            shoot: ShootCfg::default(),
            r_cap: 4.0,
        }
    }
}

struct Matching<'a> {
    spec: &'a NonlinearitySpec,
    j: usize,
    cfg: StepCfg,
}

impl<'a> Matching<'a> {
    /// F(lambda, slope0) = position of the (j+1)-th crossing minus 1.
    fn f(&self, lambda: f64, slope0: f64) -> f64 {
        match shoot(self.spec, lambda, slope0, self.cfg.r_cap, self.j + 1, &self.cfg.shoot) {
            Ok(res) if res.crossings.len() == self.j + 1 => res.crossings[self.j] - 1.0,
            _ => f64::INFINITY,
        }
    }

    /// Scaled Jacobian row [F_lambda * s_la, F_s0 * s_s0] by central differences.
    fn jacobian(&self, lambda: f64, slope0: f64) -> Option<[f64; 2]> {
        let (s_la, s_s0) = scales(lambda, slope0);
        let dl = 1e-6 * s_la;
        let ds = 1e-6 * s_s0;
        let fl = (self.f(lambda + dl, slope0) - self.f(lambda - dl, slope0)) / (2.0 * dl);
        let fs = (self.f(lambda, slope0 + ds) - self.f(lambda, slope0 - ds)) / (2.0 * ds);
        if fl.is_finite() && fs.is_finite() {
            Some([fl * s_la, fs * s_s0])
        } else {
            None
        }
    }
}

fn scales(lambda: f64, slope0: f64) -> (f64, f64) {
    (1.0 + lambda.abs(), (1.0 + slope0.abs()).max(0.1))
}

fn tangent(jrow: [f64; 2]) -> [f64; 2] {
    let t = [-jrow[1], jrow[0]];
    let n = (t[0] * t[0] + t[1] * t[1]).sqrt();
    [t[0] / n, t[1] / n]
}

/// Norms and optional energy of the solution behind a handle.
fn point_data(
    spec: &NonlinearitySpec,
    j: usize,
    lambda: f64,
    slope0: f64,
    cfg: &StepCfg,
    with_energy: bool,
) -> Result<BranchPoint> {
    let sol = solution_from_slope(spec, lambda, slope0, j, &cfg.shoot)?;
    let en = if with_energy && spec.is_variational() {
        Some(energy(spec, lambda, &sol.grid)?)
    } else {
        None
    };
    Ok(BranchPoint {
        lambda,
        slope0,
        sup_norm: sol.sup_norm(),
        c1_norm: sol.c1_norm(),
        node_count: j,
        energy: en,
    })
}

/// Follow one arm from (lambda0, slope0) in the direction with
/// sign(tangent lambda-component) = dir_sign. Returns the accepted points
/// (excluding the seed) and how the arm ended.
#[allow(clippy::too_many_arguments)]
fn follow_arm(
    m: &Matching<'_>,
    lambda0: f64,
    slope00: f64,
    dir_sign: f64,
    lambda_window: (f64, f64),
    lambda_floor: Option<f64>,
    cfg: &StepCfg,
    spec: &NonlinearitySpec,
) -> Result<(Vec<BranchPoint>, TerminationReason, Option<f64>)> {
    let mut points: Vec<BranchPoint> = Vec::new();
    let (mut la, mut s0) = (lambda0, slope00);
    let jrow = m
        .jacobian(la, s0)
        .ok_or_else(|| Error::Numerics("matching Jacobian undefined at the seed".into()))?;
    let mut t_hat = tangent(jrow);
    if t_hat[0] * dir_sign < 0.0 {
        t_hat = [-t_hat[0], -t_hat[1]];
    }
    let mut h = cfg.h0;
    let mut streak = 0usize;
    let mut fold: Option<f64> = None;
    let mut fold_at: Option<usize> = None;
    // Towards the dead-core threshold the branch ends in a cusp,
    // lambda - lambda_{j*} ~ C slope0^{1/3}: node slopes decay like the CUBE
    // of the remaining lambda distance and fall below the integrator noise
    // floor while lambda is still a few units above the threshold (there the
    // matching value itself becomes undecidable: crossing or turnback hangs
    // on a sub-noise energy difference). Any stall in that window is the
    // threshold stop.
    let stall_reason = |la: f64| -> TerminationReason {
        if let Some(floor) = lambda_floor {
            if dir_sign < 0.0 && (la - floor).abs() < 0.05 * (1.0 + floor.abs()) {
                return TerminationReason::DeadCoreThreshold;
            }
        }
        TerminationReason::StepFailure
    };

    for _ in 0..cfg.max_steps_per_arm {
        let (s_la, s_s0) = scales(la, s0);
        // predictor in scaled coordinates
        let pred = [la + h * t_hat[0] * s_la, s0 + h * t_hat[1] * s_s0];
        // corrector: F = 0 and arclength constraint along t_hat
        let mut y = pred;
        let mut converged = false;
        for it in 0..cfg.max_corrector_iters {
            let fval = m.f(y[0], y[1]);
            if !fval.is_finite() {
                break;
            }
            let cons =
                t_hat[0] * (y[0] - la) / s_la + t_hat[1] * (y[1] - s0) / s_s0 - h;
            let jrow = match m.jacobian(y[0], y[1]) {
                Some(j) => j,
                None => break,
            };
            // rows: [F_la, F_s0] (unscaled), [t0/s_la, t1/s_s0]
            let a11 = jrow[0] / s_la;
            let a12 = jrow[1] / s_s0;
            let a21 = t_hat[0] / s_la;
            let a22 = t_hat[1] / s_s0;
            let det = a11 * a22 - a12 * a21;
            if det.abs() < 1e-300 {
                break;
            }
            let dl = (fval * a22 - a12 * cons) / det;
            let ds = (a11 * cons - fval * a21) / det;
            y = [y[0] - dl, y[1] - ds];
            let small = dl.abs() / s_la + ds.abs() / s_s0;
            // |F| bottoms out at the crossing-location noise (integrator
            // tolerance divided by the slope at the crossing), which blows up
            // near the dead-core threshold; the scaled Newton step is the
            // reliable convergence measure.
            if small < 1e-9 && fval.abs() < 1e-5 {
                converged = true;
                break;
            }
            // allow the final iterate to count as converged on the last pass
            if it + 1 == cfg.max_corrector_iters && fval.abs() < 1e-5 && small < 1e-8 {
                converged = true;
            }
        }
        if !converged {
            if h <= cfg.h_min * (1.0 + 1e-12) {
                return Ok((points, stall_reason(la), fold));
            }
            h = (0.5 * h).max(cfg.h_min);
            streak = 0;
            continue;
        }

        // new tangent, keep orientation
        let jrow = match m.jacobian(y[0], y[1]) {
            Some(j) => j,
            None => return Ok((points, stall_reason(y[0]), fold)),
        };
        let mut t_new = tangent(jrow);
        if t_new[0] * t_hat[0] + t_new[1] * t_hat[1] < 0.0 {
            t_new = [-t_new[0], -t_new[1]];
        }

        // fold: the lambda-component of the tangent changes sign
        if fold.is_none() && t_new[0].signum() != t_hat[0].signum() && !points.is_empty() {
            let prev_s0 = points.last().map(|p| p.slope0).unwrap_or(s0);
            if let Ok(la_fold) = refine_fold(m, y[1], y[1] - prev_s0, y[0]) {
                fold = Some(la_fold);
                fold_at = Some(points.len());
            }
        }

        (la, s0) = (y[0], y[1]);
        t_hat = t_new;

        // stopping rules
        if let Some(floor) = lambda_floor {
            if la < floor {
                return Ok((points, TerminationReason::DeadCoreThreshold, fold));
            }
        }
        if la < lambda_window.0 {
            return Ok((points, TerminationReason::ReachedLambdaMin, fold));
        }
        let bp = point_data(spec, m.j, la, s0, cfg, false)?;
        let sup = bp.sup_norm;
        points.push(bp);
        if sup < cfg.min_sup_norm {
            return Ok((points, TerminationReason::ReachedTrivialSolution, fold));
        }
        if la > lambda_window.1 {
            return Ok((points, TerminationReason::ReachedLambdaMin, fold));
        }

        streak += 1;
        if streak >= cfg.easy_streak {
            h = (2.0 * h).min(cfg.h_max);
            streak = 0;
        }
    }
    let _ = fold_at;
    Ok((points, stall_reason(la), fold))
}

/// Solve F(lambda, s0) = 0 for lambda at fixed s0, bracketing around a guess.
fn lambda_at(m: &Matching<'_>, s0: f64, la_guess: f64) -> Result<f64> {
    let mut d = 1e-4 * (1.0 + la_guess.abs());
    for _ in 0..40 {
        let (lo, hi) = (la_guess - d, la_guess + d);
        let (flo, fhi) = (m.f(lo, s0), m.f(hi, s0));
        if flo.is_finite() && fhi.is_finite() && flo.signum() != fhi.signum() {
            return crate::roots::brent(
                |la| m.f(la, s0),
                lo,
                hi,
                crate::roots::RootTol { abs_x: 0.0, rel_x: 1e-12, max_iter: 200 },
            );
        }
        d *= 2.0;
    }
    Err(Error::Numerics("could not bracket lambda on the branch".into()))
}

/// Refine the fold once the tangent lambda-component flips: near the fold the
/// branch is the graph lambda(s0) with a strict maximum, so maximize it by
/// Brent minimization of -lambda(s0) over a bracket around the flip.
fn refine_fold(m: &Matching<'_>, s0_center: f64, ds: f64, la_guess: f64) -> Result<f64> {
    let spread = 3.0 * ds.abs().max(1e-6 * (1.0 + s0_center.abs()));
    let (lo, hi) = (s0_center - spread, s0_center + spread);
    let mut best = la_guess;
    let s_star = crate::roots::minimize(
        |s0| match lambda_at(m, s0, best) {
            Ok(la) => {
                best = la;
                -la
            }
            Err(_) => f64::INFINITY,
        },
        lo,
        hi,
        1e-9,
        120,
    );
    lambda_at(m, s_star, best)
}

/// Trace the continuum D_j^{sign} seeded at the lambda = 0 solution.
///
/// The returned points run from the trivial end (lower arm) through the fold
/// to the negative-lambda end, whose stopping reason is recorded.
pub fn trace_branch(
    spec: &NonlinearitySpec,
    j: usize,
    sign: i8,
    lambda_window: (f64, f64),
    cfg: &StepCfg,
) -> Result<Branch> {
    let search = SearchCfg { shoot: cfg.shoot, ..Default::default() };
    let seeds = find_j_nodal(spec, 0.0, j, sign, &search)?;
    let seed = seeds
        .first()
        .ok_or_else(|| Error::NoSolution(format!("no j = {j} seed solution at lambda = 0")))?;
    let slope0 = seed.grid.du[0];
    trace_branch_from_seed(spec, j, sign, slope0, lambda_window, cfg)
}

/// Trace the continuum through a given seed handle (lambda = 0, slope0).
pub fn trace_branch_from_seed(
    spec: &NonlinearitySpec,
    j: usize,
    sign: i8,
    slope0: f64,
    lambda_window: (f64, f64),
    cfg: &StepCfg,
) -> Result<Branch> {
    let m = Matching { spec, j, cfg: *cfg };
    let lambda_floor = if spec.is_model() {
        Some(lambda_j_star(spec.exponents(), j)? + 1e-6)
    } else {
        None
    };
    // towards positive lambda: upper arm, fold, lower arm
    let (arm_up, _stop_up, fold) =
        follow_arm(&m, 0.0, slope0, 1.0, lambda_window, lambda_floor, cfg, spec)?;
    // towards negative lambda
    let (arm_down, stop_down, _) =
        follow_arm(&m, 0.0, slope0, -1.0, lambda_window, lambda_floor, cfg, spec)?;

    let seed_point = point_data(spec, j, 0.0, slope0, cfg, false)?;
    let mut points: Vec<BranchPoint> = arm_up.into_iter().rev().collect();
    points.push(seed_point);
    points.extend(arm_down);

    let fold_index = fold.and_then(|la| {
        points
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                (a.lambda - la).abs().partial_cmp(&(b.lambda - la).abs()).unwrap()
            })
            .map(|(i, _)| i)
    });
    let reason = stop_down;
    Ok(Branch { points, j, sign, turning_point_lambda: fold, fold_index, terminated_reason: reason })
}

/// Diagram data: all branches for j = 0..=j_max, both signs. Per-branch
/// failures are recorded, not fatal.
#[derive(Debug, Serialize)]
pub struct DiagramData {
    pub branches: Vec<Branch>,
    pub failures: Vec<DiagramFailure>,
}

#[derive(Debug, Serialize)]
pub struct DiagramFailure {
    pub j: usize,
    pub sign: i8,
    pub message: String,
}

pub fn bifurcation_diagram(
    spec: &NonlinearitySpec,
    j_max: usize,
    lambda_window: (f64, f64),
    cfg: &StepCfg,
) -> DiagramData {
    let mut branches = Vec::new();
    let mut failures = Vec::new();
    for j in 0..=j_max {
        for sign in [1i8, -1i8] {
            match trace_branch(spec, j, sign, lambda_window, cfg) {
                Ok(b) => branches.push(b),
                Err(e) => failures.push(DiagramFailure { j, sign, message: e.to_string() }),
            }
        }
    }
    DiagramData { branches, failures }
}

/// Energy J_lambda at every branch point, by reconstructing each solution.
pub fn energy_along_branch(
    spec: &NonlinearitySpec,
    branch: &Branch,
    cfg: &StepCfg,
) -> Result<Vec<(f64, f64)>> {
    if !spec.is_variational() {
        return Err(Error::Domain("energy undefined for xi-dependent h".into()));
    }
    let mut out = Vec::with_capacity(branch.points.len());
    for p in &branch.points {
        let sol = solution_from_slope(spec, p.lambda, p.slope0, branch.j, &cfg.shoot)?;
        out.push((p.lambda, energy(spec, p.lambda, &sol.grid)?));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Exponents;
    use crate::timemap::cap_lambda_j;

    fn model() -> NonlinearitySpec {
        NonlinearitySpec::model(Exponents::new(4.0, 1.5).unwrap())
    }

    fn quick_cfg() -> StepCfg {
        StepCfg {
            shoot: ShootCfg { abs_tol: 1e-10, rel_tol: 1e-9, ..Default::default() },
            min_sup_norm: 5e-2,
            ..Default::default()
        }
    }

    #[test]
    fn j0_branch_fold_matches_time_map() {
        let spec = model();
        let cfg = quick_cfg();
        let branch = trace_branch(&spec, 0, 1, (-0.5, f64::INFINITY), &cfg).unwrap();
        let la0 = cap_lambda_j(spec.exponents(), 0).unwrap();
        let fold = branch.turning_point_lambda.expect("fold must be detected");
        assert!(
            (fold - la0).abs() <= 1e-4 * la0,
            "fold {fold} vs Lambda_0 = {la0} (rel {:.2e})",
            (fold - la0).abs() / la0
        );
        // arm ordering: lambda increases to the fold then decreases
        assert_eq!(branch.terminated_reason, TerminationReason::ReachedLambdaMin);
        // node count constant along the branch
        assert!(branch.points.iter().all(|p| p.node_count == 0));
        // lower arm approaches the trivial solution
        assert!(branch.points.first().unwrap().sup_norm < 0.1);
    }

    #[test]
    fn sign_mirror_branches() {
        let spec = model();
        let cfg = quick_cfg();
        let plus = trace_branch(&spec, 0, 1, (-0.3, f64::INFINITY), &cfg).unwrap();
        let minus = trace_branch(&spec, 0, -1, (-0.3, f64::INFINITY), &cfg).unwrap();
        assert_eq!(plus.points.len(), minus.points.len());
        for (a, b) in plus.points.iter().zip(&minus.points) {
            assert!((a.lambda - b.lambda).abs() < 1e-8 * (1.0 + a.lambda.abs()));
            assert!((a.slope0 + b.slope0).abs() < 1e-8 * (1.0 + a.slope0.abs()));
            assert!((a.sup_norm - b.sup_norm).abs() < 1e-8 * (1.0 + a.sup_norm));
        }
    }

    #[test]
    fn branch_reaches_dead_core_threshold() {
        let spec = model();
        let cfg = quick_cfg();
        let branch = trace_branch(&spec, 0, 1, (f64::NEG_INFINITY, f64::INFINITY), &cfg).unwrap();
        assert_eq!(branch.terminated_reason, TerminationReason::DeadCoreThreshold);
        let la_star = crate::timemap::lambda_j_star(spec.exponents(), 0).unwrap();
        let last = branch.points.last().unwrap();
        // the last accepted point sits just above the threshold
        assert!(last.lambda > la_star && last.lambda < 0.5 * la_star);
    }
}

//! Solution profile traces: nodal / threshold / dead-core solutions on the
//! interval, plus the pulled-back radial profile in annulus mode.

use ccbvp_core::params::{g_eval, Exponents, NonlinearitySpec};
use ccbvp_core::shooting::{find_j_nodal, shoot, SearchCfg};
use ccbvp_core::solutions::{
    build_dead_core, build_nodal, build_threshold, flux_residual, DeadCorePlacement,
    PiecewiseSolution,
};
use ccbvp_core::timemap::{dead_core_length, BranchSide};
use ccbvp_core::trace::Trace;
use ccbvp_core::transform::{pullback_profile, radial_residual, transform_nonlinearity, AnnulusGeometry};

use crate::config::{BranchChoice, ProblemMode, ProfileKind, ProfilesTask, RunConfig};
use crate::output::{fmt, Emitter};
use crate::CmdError;

fn side(choice: BranchChoice) -> BranchSide {
    match choice {
        BranchChoice::Lower => BranchSide::Lower,
        BranchChoice::Upper => BranchSide::Upper,
    }
}

pub fn run(cfg: &RunConfig, task: &ProfilesTask, em: &mut Emitter) -> Result<(), CmdError> {
    let exps = Exponents::new(cfg.problem.p, cfg.problem.q).map_err(CmdError::numeric)?;
    let model = NonlinearitySpec::model(exps);
    let grid_points = cfg.numerics.grid_points;

    match cfg.problem.mode {
        ProblemMode::Interval => {
            let sol = build_interval_solution(exps, task, grid_points)?;
            // grid reconstruction is ill-posed at degenerate contacts, so
            // threshold / dead-core rows all carry the exact-profile maximum
            let residuals = if sol.has_degenerate_contacts(exps) {
                vec![sol.grid_residual(exps); sol.grid.len()]
            } else {
                cell_residuals(&sol.grid, |_, u, _| g_eval(exps, sol.lambda, u))
            };
            emit_trace(em, "profile", &sol.grid, &residuals)?;
            em.gnuplot(
                "profile",
                "set xlabel \"x\"\nplot \"profile.csv\" using 1:2 with lines title \"u\",\\\n     \"profile.csv\" using 1:3 with lines title \"u'\"\n",
            )
            .map_err(CmdError::io)?;
        }
        ProblemMode::Annulus { dim, rho1, rho2 } => {
            if task.kind != ProfileKind::Nodal {
                return Err(CmdError {
                    code: 2,
                    msg: "annulus mode supports nodal profiles only (dead cores are a model-problem construction)".into(),
                });
            }
            let geom = AnnulusGeometry::new(dim, rho1, rho2).map_err(CmdError::numeric)?;
            let h = transform_nonlinearity(&geom, &model).map_err(CmdError::numeric)?;
            let search = SearchCfg { shoot: cfg.numerics.shoot_cfg(), ..Default::default() };
            let sols = find_j_nodal(&h, task.lambda, task.j, task.leading_sign, &search)
                .map_err(CmdError::numeric)?;
            if sols.is_empty() {
                return Err(CmdError {
                    code: 1,
                    msg: format!(
                        "no solution with {} nodal intervals found at lambda = {} (existence requires lambda <= Lambda_j)",
                        task.j + 1,
                        task.lambda
                    ),
                });
            }
            // branch selection by amplitude ordering
            let pick = match side(task.branch) {
                BranchSide::Lower => sols
                    .iter()
                    .min_by(|a, b| a.sup_norm().partial_cmp(&b.sup_norm()).unwrap())
                    .unwrap(),
                BranchSide::Upper => sols
                    .iter()
                    .max_by(|a, b| a.sup_norm().partial_cmp(&b.sup_norm()).unwrap())
                    .unwrap(),
            };
            let residuals =
                cell_residuals(&pick.grid, |r, u, du| h.h(task.lambda, r, u, du.abs()));
            emit_trace(em, "profile", &pick.grid, &residuals)?;

            // pull back through the dense trajectory for exact radial slopes
            let shot = shoot(&h, task.lambda, pick.grid.du[0], 1.0, usize::MAX, &search.shoot)
                .map_err(CmdError::numeric)?;
            let prof = pullback_profile(
                &geom,
                |r| {
                    let y = shot.dense.eval(r);
                    (y[0], y[1])
                },
                &pick.grid,
                cfg.numerics.radial_points,
            )
            .map_err(CmdError::numeric)?;
            let res = radial_residual(&geom, &model, task.lambda, &prof.trace);
            let rows: Vec<Vec<String>> = (0..prof.trace.len())
                .map(|i| {
                    vec![
                        fmt(prof.trace.x[i]),
                        fmt(prof.trace.u[i]),
                        fmt(prof.trace.du[i]),
                        fmt(res),
                    ]
                })
                .collect();
            em.csv("radial", &["radius", "w", "w_prime", "max_residual"], &rows)
                .map_err(CmdError::io)?;
            em.gnuplot(
                "profile",
                "set xlabel \"x / radius\"\nplot \"profile.csv\" using 1:2 with lines title \"v\",\\\n     \"radial.csv\" using 1:2 with lines title \"w\"\n",
            )
            .map_err(CmdError::io)?;
        }
    }
    Ok(())
}

fn build_interval_solution(
    exps: Exponents,
    task: &ProfilesTask,
    grid_points: usize,
) -> Result<PiecewiseSolution, CmdError> {
    let default_sigma: Vec<i8> =
        (0..=task.j).map(|k| task.leading_sign * if k % 2 == 0 { 1 } else { -1 }).collect();
    let sigma = task.sigma.clone().unwrap_or(default_sigma);
    match task.kind {
        ProfileKind::Nodal => {
            build_nodal(exps, task.lambda, task.j, side(task.branch), task.leading_sign, grid_points)
                .map_err(CmdError::numeric)
        }
        ProfileKind::Threshold => {
            build_threshold(exps, task.j, &sigma, grid_points).map_err(CmdError::numeric)
        }
        ProfileKind::Deadcore => {
            let offsets = task.placement.clone().expect("validated in config");
            let l = dead_core_length(exps, task.lambda, task.j).map_err(CmdError::numeric)?;
            let placement = DeadCorePlacement { offsets, arch_length: l };
            build_dead_core(exps, task.lambda, &placement, &sigma, grid_points)
                .map_err(CmdError::numeric)
        }
    }
}

/// Per-cell flux residuals, padded to grid length (last entry repeats).
fn cell_residuals<F: FnMut(f64, f64, f64) -> f64>(trace: &Trace, rhs: F) -> Vec<f64> {
    // flux_residual returns the max; for the per-row column recompute cells
    let mut rhs = rhs;
    let mut out = Vec::with_capacity(trace.len());
    for i in 0..trace.len() - 1 {
        let sub = Trace::new(
            trace.x[i..=i + 1].to_vec(),
            trace.u[i..=i + 1].to_vec(),
            trace.du[i..=i + 1].to_vec(),
        );
        out.push(flux_residual(&sub, &mut rhs));
    }
    out.push(*out.last().unwrap_or(&0.0));
    out
}

fn emit_trace(
    em: &mut Emitter,
    name: &str,
    trace: &Trace,
    residuals: &[f64],
) -> Result<(), CmdError> {
    let rows: Vec<Vec<String>> = (0..trace.len())
        .map(|i| {
            vec![fmt(trace.x[i]), fmt(trace.u[i]), fmt(trace.du[i]), fmt(residuals[i])]
        })
        .collect();
    em.csv(name, &["x", "u", "u_prime", "cell_residual"], &rows).map_err(CmdError::io)
}

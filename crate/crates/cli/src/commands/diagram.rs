//! Bifurcation-diagram data: per-(j, sign) branch tables traced by
//! continuation, fold and threshold annotations, and the flat-amplitude
//! dead-core family for lambda below each threshold.

use serde::Serialize;

use ccbvp_core::continuation::{bifurcation_diagram, Branch};
use ccbvp_core::params::{big_g_eval, c_lambda, energy, Exponents, NonlinearitySpec};
use ccbvp_core::solutions::{build_dead_core, DeadCorePlacement};
use ccbvp_core::timemap::{cap_lambda_j, dead_core_length, lambda_j_star};

use crate::config::{DiagramTask, ProblemMode, RunConfig};
use crate::output::{fmt, Emitter};
use crate::CmdError;

#[derive(Serialize)]
struct BranchAnnotation {
    j: usize,
    sign: i8,
    turning_point_lambda: Option<f64>,
    lambda_j_star: Option<f64>,
    cap_lambda_j: Option<f64>,
    terminated_reason: String,
    points: usize,
}

#[derive(Serialize)]
struct Sidecar {
    branches: Vec<BranchAnnotation>,
    failures: Vec<String>,
}

pub fn run(cfg: &RunConfig, task: &DiagramTask, em: &mut Emitter) -> Result<(), CmdError> {
    let exps = Exponents::new(cfg.problem.p, cfg.problem.q).map_err(CmdError::numeric)?;
    let model = NonlinearitySpec::model(exps);
    let spec = match cfg.problem.mode {
        ProblemMode::Interval => model.clone(),
        ProblemMode::Annulus { dim, rho1, rho2 } => {
            let geom = ccbvp_core::transform::AnnulusGeometry::new(dim, rho1, rho2)
                .map_err(CmdError::numeric)?;
            ccbvp_core::transform::transform_nonlinearity(&geom, &model)
                .map_err(CmdError::numeric)?
        }
    };
    let step_cfg = cfg.numerics.step_cfg();
    let window = (task.lambda_min, f64::INFINITY);
    let data = bifurcation_diagram(&spec, task.j_max, window, &step_cfg);

    let mut annotations = Vec::new();
    let mut gp_lines = Vec::new();
    for branch in &data.branches {
        let name = branch_name(branch);
        let mut rows = Vec::with_capacity(branch.points.len());
        for (i, p) in branch.points.iter().enumerate() {
            let arm = match branch.fold_index {
                Some(f) if i < f => "lower",
                Some(_) => "upper",
                None => "upper",
            };
            let en = if task.include_energy && spec.is_variational() {
                match ccbvp_core::shooting::solution_from_slope(
                    &spec,
                    p.lambda,
                    p.slope0,
                    branch.j,
                    &step_cfg.shoot,
                ) {
                    Ok(sol) => fmt(energy(&spec, p.lambda, &sol.grid).map_err(CmdError::numeric)?),
                    Err(_) => String::new(),
                }
            } else {
                String::new()
            };
            rows.push(vec![
                fmt(p.lambda),
                fmt(p.sup_norm),
                fmt(p.c1_norm),
                en,
                arm.into(),
            ]);
        }
        em.csv(&name, &["lambda", "sup_norm", "c1_norm", "energy", "branch_arm"], &rows)
            .map_err(CmdError::io)?;
        gp_lines.push(format!(
            "\"{name}.csv\" using 1:3 with lines title \"j={} {}\"",
            branch.j,
            if branch.sign > 0 { "+" } else { "-" }
        ));

        // only the model problem has the closed-form thresholds
        let (la_star, cap) = if spec.is_model() {
            (
                lambda_j_star(exps, branch.j).ok(),
                cap_lambda_j(exps, branch.j).ok(),
            )
        } else {
            (None, None)
        };
        annotations.push(BranchAnnotation {
            j: branch.j,
            sign: branch.sign,
            turning_point_lambda: branch.turning_point_lambda,
            lambda_j_star: la_star,
            cap_lambda_j: cap,
            terminated_reason: format!("{:?}", branch.terminated_reason),
            points: branch.points.len(),
        });
    }

    // flat-amplitude dead-core family below each threshold (model problem only)
    if spec.is_model() {
        for j in 0..=task.j_max {
            let la_star = lambda_j_star(exps, j).map_err(CmdError::numeric)?;
            if task.lambda_min >= la_star {
                continue;
            }
            let n = task.deadcore_lambda_samples.max(2);
            let mut rows = Vec::with_capacity(n);
            for k in 0..n {
                // sample strictly below the threshold down to lambda_min
                let t = (k as f64 + 0.5) / n as f64;
                let la = la_star + (task.lambda_min - la_star) * t;
                let c = c_lambda(exps, la).map_err(CmdError::numeric)?;
                let l = dead_core_length(exps, la, j).map_err(CmdError::numeric)?;
                // max slope inside a dead-core arch: sqrt(-2 G) at the zero of g
                let z_star = la.abs().powf(1.0 / (exps.p() - exps.q()));
                let slope_max = (-2.0 * big_g_eval(exps, la, z_star)).max(0.0).sqrt();
                let en = if task.include_energy {
                    let placement = DeadCorePlacement::uniform(j, l);
                    let sigma: Vec<i8> =
                        (0..=j).map(|k| if k % 2 == 0 { 1 } else { -1 }).collect();
                    match build_dead_core(exps, la, &placement, &sigma, cfg.numerics.grid_points) {
                        Ok(sol) => fmt(energy(&model, la, &sol.grid).map_err(CmdError::numeric)?),
                        Err(_) => String::new(),
                    }
                } else {
                    String::new()
                };
                rows.push(vec![fmt(la), fmt(c), fmt(c + slope_max), en, fmt(l)]);
            }
            let name = format!("deadcore_j{j}");
            em.csv(&name, &["lambda", "sup_norm", "c1_norm", "energy", "arch_length"], &rows)
                .map_err(CmdError::io)?;
            gp_lines.push(format!("\"{name}.csv\" using 1:3 with lines dt 2 title \"dead core j={j}\""));
        }
    }

    let sidecar = Sidecar {
        branches: annotations,
        failures: data.failures.iter().map(|f| format!("j={} sign={}: {}", f.j, f.sign, f.message)).collect(),
    };
    em.json("annotations", &sidecar).map_err(CmdError::io)?;
    let body = format!(
        "set xlabel \"lambda\"\nset ylabel \"C1 norm\"\nplot {}\n",
        gp_lines.join(",\\\n     ")
    );
    em.gnuplot("diagram", &body).map_err(CmdError::io)?;
    if !data.failures.is_empty() {
        log::warn!("{} branch(es) failed; see annotations.json", data.failures.len());
    }
    Ok(())
}

fn branch_name(branch: &Branch) -> String {
    format!("branch_j{}_{}", branch.j, if branch.sign > 0 { "pos" } else { "neg" })
}

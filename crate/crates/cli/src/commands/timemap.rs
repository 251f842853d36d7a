//! Time-map curve data: T_lambda(alpha) (and T'_lambda for lambda > 0) over an
//! amplitude range, with the maximizer alpha_lambda or the dead-core amplitude
//! c_lambda marked per curve.

use ccbvp_core::params::{c_lambda, Exponents};
use ccbvp_core::timemap::{alpha_star, t_at_c_lambda, time_map_at, time_map_derivative, TimeMapQuery};

use crate::config::{RunConfig, TimemapTask};
use crate::output::{fmt, Emitter};
use crate::CmdError;

pub fn run(cfg: &RunConfig, task: &TimemapTask, em: &mut Emitter) -> Result<(), CmdError> {
    let exps = Exponents::new(cfg.problem.p, cfg.problem.q).map_err(CmdError::numeric)?;

    let mut marker_rows: Vec<Vec<String>> = Vec::new();
    let mut gp_lines: Vec<String> = Vec::new();
    for (idx, &la) in task.lambdas.iter().enumerate() {
        let lo = if la < 0.0 {
            let c = c_lambda(exps, la).map_err(CmdError::numeric)?;
            task.alpha_min.max(c)
        } else {
            task.alpha_min
        };
        let hi = task.alpha_max.max(lo * (1.0 + 1e-6));
        let n = task.alpha_count;
        let mut rows = Vec::with_capacity(n);
        for k in 0..n {
            let alpha = lo * (hi / lo).powf(k as f64 / (n - 1) as f64);
            let t = time_map_at(exps, la, alpha).map_err(CmdError::numeric)?;
            let dt = if task.with_derivative && la > 0.0 {
                let q = TimeMapQuery::new(exps, la, alpha).map_err(CmdError::numeric)?;
                fmt(time_map_derivative(&q).map_err(CmdError::numeric)?)
            } else {
                String::new()
            };
            rows.push(vec![fmt(la), fmt(alpha), fmt(t), dt]);
        }
        let name = format!("timemap_{idx:02}");
        em.csv(&name, &["lambda", "alpha", "t", "t_prime"], &rows).map_err(CmdError::io)?;
        gp_lines.push(format!("\"{name}.csv\" using 2:3 with lines title \"lambda={la}\""));

        if la > 0.0 {
            let prof = alpha_star(exps, la).map_err(CmdError::numeric)?;
            marker_rows.push(vec![
                fmt(la),
                fmt(prof.alpha_star),
                fmt(prof.t_star),
                "alpha_star".into(),
            ]);
        } else if la < 0.0 {
            let c = c_lambda(exps, la).map_err(CmdError::numeric)?;
            let t = t_at_c_lambda(exps, la).map_err(CmdError::numeric)?;
            marker_rows.push(vec![fmt(la), fmt(c), fmt(t), "c_lambda".into()]);
        }
    }
    em.csv("markers", &["lambda", "alpha", "t", "kind"], &marker_rows).map_err(CmdError::io)?;
    let body = format!(
        "set xlabel \"alpha\"\nset ylabel \"T_lambda(alpha)\"\nplot {},\\\n     \"markers.csv\" using 2:3 with points pt 7 title \"markers\"\n",
        gp_lines.join(",\\\n     ")
    );
    em.gnuplot("timemap", &body).map_err(CmdError::io)?;
    Ok(())
}

//! Verification suites: constants reproduction, a-priori estimates on a
//! battery of constructed solutions, ratio inequalities, classification round
//! trips, transform identities, and optional classification of a user-supplied
//! candidate trace. Exit code 1 when any assertable check fails.

use serde::Serialize;

use ccbvp_core::apriori::{
    build_constants, check_lemma_i, check_lemma_ii, check_ratio_inequalities, CheckItem,
    CheckReport, RatioSamples,
};
use ccbvp_core::params::{Exponents, NonlinearitySpec, PinchingBounds};
use ccbvp_core::solutions::{
    build_dead_core, build_nodal, build_threshold, classify, Classification, DeadCorePlacement,
};
use ccbvp_core::timemap::{dead_core_length, lambda_j_star, BranchSide};
use ccbvp_core::transform::{phi, phi_inv, phi_prime, phi_second, AnnulusGeometry};

use crate::config::{RunConfig, VerifyTask};
use crate::output::{parse_profile_csv, Emitter};
use crate::CmdError;

#[derive(Serialize)]
pub struct VerifyReport {
    pub suites: Vec<CheckReport>,
    pub passed: bool,
}

fn item(name: &str, margin: f64, band: f64) -> CheckItem {
    CheckItem {
        name: name.into(),
        margin,
        band,
        passed: margin >= -band,
        monitored_only: false,
        info: None,
    }
}

fn report(name: &str, items: Vec<CheckItem>) -> CheckReport {
    let passed = items.iter().all(|i| i.passed);
    let min_margin = items
        .iter()
        .filter(|i| !i.monitored_only)
        .map(|i| i.margin)
        .fold(f64::INFINITY, f64::min);
    CheckReport { name: name.into(), items, passed, min_margin }
}

pub fn run(cfg: &RunConfig, task: &VerifyTask, em: &mut Emitter) -> Result<(), CmdError> {
    let exps = Exponents::new(cfg.problem.p, cfg.problem.q).map_err(CmdError::numeric)?;
    let bounds = PinchingBounds::unit();
    let grid = cfg.numerics.grid_points;
    let want = |s: &str| task.suites.iter().any(|x| x == s || x == "all");

    let mut suites: Vec<CheckReport> = Vec::new();

    if want("constants") {
        let t = build_constants(exps, &bounds).map_err(CmdError::numeric)?;
        let items = vec![
            item("constants.mq_gt_mp_gt_1", (t.m_q - t.m_p).min(t.m_p - 1.0), 0.0),
            item("constants.c1_c2_ge_1", (t.c1 - 1.0).min(t.c2 - 1.0), 0.0),
            item("constants.a_gt_1", t.a - 1.0, 0.0),
            item("constants.d_positive", t.d, 0.0),
        ];
        suites.push(report("constants", items));
    }

    if want("apriori") {
        let la_star = lambda_j_star(exps, 0).map_err(CmdError::numeric)?;
        // negative side: dead core and upper-branch nodal
        let l = dead_core_length(exps, 2.0 * la_star, 0).map_err(CmdError::numeric)?;
        let placement = DeadCorePlacement { offsets: vec![(1.0 - l) / 2.0], arch_length: l };
        let dc = build_dead_core(exps, 2.0 * la_star, &placement, &[1], grid)
            .map_err(CmdError::numeric)?;
        suites.push(check_lemma_i(exps, &bounds, 2.0 * la_star, &dc).map_err(CmdError::numeric)?);
        let neg = build_nodal(exps, -1.0, 1, BranchSide::Upper, 1, grid)
            .map_err(CmdError::numeric)?;
        suites.push(check_lemma_i(exps, &bounds, -1.0, &neg).map_err(CmdError::numeric)?);
        // positive side: both branches
        for side in [BranchSide::Lower, BranchSide::Upper] {
            let sol = build_nodal(exps, 1.0, 2, side, 1, grid).map_err(CmdError::numeric)?;
            suites.push(check_lemma_ii(exps, &bounds, 1.0, &sol).map_err(CmdError::numeric)?);
        }
    }

    if want("ratio") {
        let samples = RatioSamples {
            per_regime: task.ratio_samples,
            seed: cfg.numerics.seed,
            ..Default::default()
        };
        suites.push(check_ratio_inequalities(exps, &bounds, &samples).map_err(CmdError::numeric)?);
    }

    if want("classify") {
        let mut items = Vec::new();
        let nodal = build_nodal(exps, 1.0, 1, BranchSide::Upper, 1, grid)
            .map_err(CmdError::numeric)?;
        let ok = matches!(
            classify(exps, 1.0, &nodal.grid),
            Classification::Nodal { j: 1, side: BranchSide::Upper }
        );
        items.push(item("classify.nodal_round_trip", if ok { 1.0 } else { -1.0 }, 0.0));
        let thr = build_threshold(exps, 0, &[1], grid).map_err(CmdError::numeric)?;
        let la0 = lambda_j_star(exps, 0).map_err(CmdError::numeric)?;
        let ok = matches!(classify(exps, la0, &thr.grid), Classification::Threshold { j: 0 });
        items.push(item("classify.threshold_round_trip", if ok { 1.0 } else { -1.0 }, 0.0));
        // perturbed trace must be rejected
        let mut u = nodal.grid.u.clone();
        for (i, v) in u.iter_mut().enumerate() {
            *v += 1e-2 * ((i % 17) as f64 - 8.0) / 8.0;
        }
        let bad = ccbvp_core::Trace::new(nodal.grid.x.clone(), u, nodal.grid.du.clone());
        let ok = matches!(classify(exps, 1.0, &bad), Classification::Invalid { .. });
        items.push(item("classify.rejects_perturbed_trace", if ok { 1.0 } else { -1.0 }, 0.0));
        suites.push(report("classify", items));
    }

    if want("transform") {
        let mut items = Vec::new();
        for geom in [
            AnnulusGeometry::new(2, 1.0, 2.0).map_err(CmdError::numeric)?,
            AnnulusGeometry::new(3, 1.0, 2.0).map_err(CmdError::numeric)?,
        ] {
            let n = geom.dim_n;
            let mut worst_round = 0.0_f64;
            let mut worst_ode = 0.0_f64;
            for i in 0..=1000 {
                let r = i as f64 / 1000.0;
                let s = phi(&geom, r).map_err(CmdError::numeric)?;
                worst_round = worst_round.max((phi_inv(&geom, s).unwrap() - r).abs());
                if i > 0 && i < 1000 {
                    let e = 1e-6;
                    let fd = (phi_prime(&geom, r + e).unwrap() - phi_prime(&geom, r - e).unwrap())
                        / (2.0 * e);
                    let dd = phi_second(&geom, r).unwrap();
                    worst_ode = worst_ode.max((fd - dd).abs() / dd.abs().max(1.0));
                }
            }
            items.push(item(&format!("transform.round_trip_n{n}"), 1e-12 - worst_round, 0.0));
            items.push(item(&format!("transform.phi_second_identity_n{n}"), 1e-5 - worst_ode, 0.0));
        }
        suites.push(report("transform", items));
    }

    if want("pinching") {
        // sampled-box pinching checks: the model (equality case) and the
        // annulus-transformed spec with its derived effective constants
        let spec = NonlinearitySpec::model(exps);
        let mut items = Vec::new();
        let ok = ccbvp_core::params::spot_check_pinching(&spec, &[0.0, 0.7, 3.0, -2.0], 3.0, 40);
        items.push(item("pinching.model_box", if ok.is_ok() { 1.0 } else { -1.0 }, 0.0));
        let geom = AnnulusGeometry::new(3, 1.0, 2.0).map_err(CmdError::numeric)?;
        let h = ccbvp_core::transform::transform_nonlinearity(&geom, &spec)
            .map_err(CmdError::numeric)?;
        let ok = ccbvp_core::params::spot_check_pinching(&h, &[0.0, 0.7, 3.0, -2.0], 3.0, 40);
        items.push(item("pinching.transformed_box", if ok.is_ok() { 1.0 } else { -1.0 }, 0.0));
        suites.push(report("pinching", items));
    }

    if let Some(path) = &task.candidate_csv {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CmdError { code: 2, msg: format!("cannot read candidate: {e}") })?;
        let trace = parse_profile_csv(&text).map_err(|e| CmdError { code: 2, msg: e })?;
        let la = task.candidate_lambda.expect("validated");
        let cls = classify(exps, la, &trace);
        let ok = !matches!(cls, Classification::Invalid { .. });
        let mut it = item("candidate.classification", if ok { 1.0 } else { -1.0 }, 0.0);
        it.info = Some(format!("{cls:?}"));
        suites.push(report("candidate", vec![it]));
    }

    let passed = suites.iter().all(|s| s.passed);
    let out = VerifyReport { suites, passed };
    em.json("report", &out).map_err(CmdError::io)?;
    for s in &out.suites {
        println!("suite {:<22} {}", s.name, if s.passed { "PASS" } else { "FAIL" });
    }
    if !passed {
        return Err(CmdError { code: 1, msg: "verification failures; see report.json".into() });
    }
    Ok(())
}

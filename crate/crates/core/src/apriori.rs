//! Independent verification of the a-priori estimates against candidate
//! solutions, with every proof-derived constant tabulated.

use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::params::{big_g_eval, g_eval, Exponents, PinchingBounds};
use crate::solutions::PiecewiseSolution;
use crate::timemap::{alpha_star, bracket_constants, singular_moment, time_map_at};

/// Proof-derived constants for a fixed exponent pair, with provenance notes.
#[derive(Debug, Clone, Serialize)]
pub struct ConstantsTable {
    pub p: f64,
    pub q: f64,
    /// int_0^1 (1-s^q)^{-1/2} ds
    pub m_q: f64,
    /// int_0^1 (1-s^p)^{-1/2} ds
    pub m_p: f64,
    /// lower constant in the alpha_lambda / T_lambda(alpha_lambda) bounds
    pub c3: f64,
    /// upper constant in the alpha_lambda / T_lambda(alpha_lambda) bounds
    pub c3_upper: f64,
    /// ratio constant for amplitudes below alpha_lambda
    pub c1: f64,
    /// ratio constant for amplitudes above alpha_lambda
    pub c2: f64,
    /// arch-length ratio base > 1
    pub a: f64,
    /// lower-bound constant of the negative-lambda estimates
    pub d: f64,
    pub provenance: Vec<(String, String)>,
}

impl ConstantsTable {
    /// s_j = 1 / (a^j (j+1)), the lower arch-length bound.
    pub fn s_j(&self, j: usize) -> f64 {
        1.0 / (self.a.powi(j as i32) * (j + 1) as f64)
    }

    /// t_j = 1 - j s_j, the upper arch-length bound.
    pub fn t_j(&self, j: usize) -> f64 {
        1.0 - j as f64 * self.s_j(j)
    }

    /// The lambda ceiling (2 C3 (j+1) / m)^{2(p-q)/(p-2)} of the positive-side estimates.
    pub fn lambda_ceiling(&self, j: usize, m_small: f64) -> f64 {
        (2.0 * self.c3_upper * (j + 1) as f64 / m_small).powf(2.0 * (self.p - self.q) / (self.p - 2.0))
    }
}

/// Build the constants table for the given exponents and pinching bounds.
pub fn build_constants(exps: Exponents, bounds: &PinchingBounds) -> Result<ConstantsTable> {
    let (p, q) = (exps.p(), exps.q());
    let (m, big_m) = (bounds.m_small, bounds.m_big);
    let bc = bracket_constants(exps)?;
    let m_q = singular_moment(q)?;
    let m_p = singular_moment(p)?;
    let (c3, c3_upper) = (bc.c3, bc.c3_upper);
    let c1 = (m_q / m_p).powf((8.0 - 2.0 * q) / (2.0 - q))
        * (1.0 + q / p * c3_upper.powf(p - q)).powf(2.0 / (2.0 - q));
    let c2 = (m_q / m_p).powf(2.0 * p / (p - 2.0))
        * (1.0 + p / q * c3.powf(q - p)).powf(2.0 / (p - 2.0));
    let ratio = big_m / m;
    let a = (ratio.powf(1.0 / q) * (c1 * c2).powf((2.0 - q) / (2.0 * q)))
        .max(ratio.powf((p - 1.0) / p) * (c1 * c2).powf((p - 2.0) / (2.0 * p)));
    let pi_pow = std::f64::consts::PI.powf(2.0 / (p - 2.0));
    let d = pi_pow * big_m.powf(-1.0 / (p - 2.0))
        / (1.0
            + pi_pow
                * m.powf(-1.0 / (p - q))
                * big_m.powf((q - 2.0) / ((p - 2.0) * (p - q))));
    let provenance = vec![
        ("m_q".into(), "singular moment int (1-s^q)^{-1/2}, quadrature; equals (1/q) B(1/q, 1/2)".into()),
        ("m_p".into(), "singular moment int (1-s^p)^{-1/2}, quadrature; equals (1/p) B(1/p, 1/2)".into()),
        (
            "c3".into(),
            "min of the explicit amplitude bracket constant ((2-q)/(p-2))^{1/(p-q)} and the \
             explicit maximum lower bound sqrt(q(p-2)/(2(p-q))) (p(2-q)/(q(p-2)))^{(2-q)/(2(p-q))} m_p"
                .into(),
        ),
        (
            "C3".into(),
            "max of the amplitude bracket constant (p(2-q)/(q(p-2)))^{1/(p-q)} and the symmetric \
             maximum upper bound with m_q in place of m_p (the 'similarly proved' derivation)"
                .into(),
        ),
        ("C1".into(), "(m_q/m_p)^{(8-2q)/(2-q)} (1 + (q/p) C3^{p-q})^{2/(2-q)}".into()),
        ("C2".into(), "(m_q/m_p)^{2p/(p-2)} (1 + (p/q) c3^{q-p})^{2/(p-2)}".into()),
        (
            "a".into(),
            "max{(M/m)^{1/q}(C1 C2)^{(2-q)/2q}, (M/m)^{(p-1)/p}(C1 C2)^{(p-2)/2p}}".into(),
        ),
        (
            "d".into(),
            "pi^{2/(p-2)} M^{-1/(p-2)} / (1 + pi^{2/(p-2)} m^{-1/(p-q)} M^{(q-2)/((p-2)(p-q))})"
                .into(),
        ),
    ];
    Ok(ConstantsTable { p, q, m_q, m_p, c3, c3_upper, c1, c2, a, d, provenance })
}

/// One verified inequality with its slack. `margin >= -band` counts as a pass;
/// the band absorbs quadrature noise in equality cases (model solutions make
/// several windows collapse).
#[derive(Debug, Clone, Serialize)]
pub struct CheckItem {
    pub name: String,
    pub margin: f64,
    pub band: f64,
    pub passed: bool,
    /// Monitored quantities are recorded but never asserted (no constructive
    /// constant exists for them).
    pub monitored_only: bool,
    pub info: Option<String>,
}

impl CheckItem {
    fn assertable(name: &str, margin: f64, band: f64) -> Self {
        CheckItem {
            name: name.into(),
            margin,
            band,
            passed: margin >= -band,
            monitored_only: false,
            info: None,
        }
    }

    fn monitored(name: &str, value: f64, info: String) -> Self {
        CheckItem {
            name: name.into(),
            margin: value,
            band: 0.0,
            passed: true,
            monitored_only: true,
            info: Some(info),
        }
    }
}

/// A structured margin report: passes iff every assertable item passes.
#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub items: Vec<CheckItem>,
    pub passed: bool,
    pub min_margin: f64,
}

impl CheckReport {
    fn new(name: &str, items: Vec<CheckItem>) -> Self {
        let passed = items.iter().all(|i| i.passed);
        let min_margin = items
            .iter()
            .filter(|i| !i.monitored_only)
            .map(|i| i.margin)
            .fold(f64::INFINITY, f64::min);
        CheckReport { name: name.into(), items, passed, min_margin }
    }
}

const BAND: f64 = 1e-8;

/// Verify the negative-lambda estimates: the global and per-interval lower
/// bounds with the proof-derived constant d, and the slope bound
/// |v'| <= M g_{|lambda|}(|v|_inf). The upper bound constant D_j is a pure
/// existence statement, so that quantity is monitored, not asserted.
pub fn check_lemma_i(
    exps: Exponents,
    bounds: &PinchingBounds,
    lambda: f64,
    candidate: &PiecewiseSolution,
) -> Result<CheckReport> {
    assert!(lambda <= 0.0, "lemma I applies to lambda <= 0");
    let table = build_constants(exps, bounds)?;
    let (p, q) = (exps.p(), exps.q());
    let j = candidate.node_count;
    let sup = candidate.sup_norm();
    let slope_sup = candidate.grid.slope_sup_norm();
    let la_pow = lambda.abs().powf(1.0 / (p - q));
    let scale = sup.max(1.0);

    let mut items = Vec::new();
    let lower = table.d * (((j + 1) as f64).powf(2.0 / (p - 2.0)) + la_pow);
    items.push(CheckItem::assertable("lemma1.global_lower_bound", sup - lower, BAND * scale));
    items.push(CheckItem::monitored(
        "lemma1.upper_bound_ratio",
        sup / (1.0 + la_pow),
        "|v|_inf / (1 + |lambda|^{1/(p-q)}); D_j is existence-only".into(),
    ));
    let slope_cap = bounds.m_big * g_eval(exps, lambda.abs(), sup);
    items.push(CheckItem::assertable(
        "lemma1.slope_bound",
        slope_cap - slope_sup,
        BAND * slope_cap.max(1.0),
    ));
    for (k, arch) in candidate.arches().enumerate() {
        let li = arch.width();
        let need = table.d * (li.powf(-2.0 / (p - 2.0)) + la_pow);
        items.push(CheckItem::assertable(
            &format!("lemma1.per_interval_lower[{k}]"),
            arch.amplitude - need,
            BAND * scale,
        ));
    }
    let _ = q;
    Ok(CheckReport::new("lemma_I", items))
}

/// Verify the nonnegative-lambda estimates: the lambda ceiling, the
/// T_lambda(|v|_inf) window with s_j, t_j, the slope bound, the per-interval
/// relations sqrt(m) l_i <= 2 T_lambda(beta_i) <= sqrt(M) l_i, and the
/// arch-length ratio bound.
pub fn check_lemma_ii(
    exps: Exponents,
    bounds: &PinchingBounds,
    lambda: f64,
    candidate: &PiecewiseSolution,
) -> Result<CheckReport> {
    assert!(lambda >= 0.0, "lemma II applies to lambda >= 0");
    let table = build_constants(exps, bounds)?;
    let j = candidate.node_count;
    let sup = candidate.sup_norm();
    let (m, big_m) = (bounds.m_small, bounds.m_big);

    let mut items = Vec::new();
    items.push(CheckItem::assertable(
        "lemma2.lambda_ceiling",
        table.lambda_ceiling(j, m) - lambda,
        BAND * (1.0 + lambda),
    ));
    let t_sup = time_map_at(exps, lambda, sup)?;
    let (s_j, t_j) = (table.s_j(j), table.t_j(j));
    items.push(CheckItem::assertable(
        "lemma2.timemap_window_lower",
        t_sup - 0.5 * m.sqrt() * s_j,
        BAND,
    ));
    items.push(CheckItem::assertable(
        "lemma2.timemap_window_upper",
        0.5 * big_m.sqrt() * t_j - t_sup,
        BAND,
    ));
    let slope_cap = (2.0 * big_m * big_g_eval(exps, lambda, sup)).sqrt();
    items.push(CheckItem::assertable(
        "lemma2.slope_bound",
        slope_cap - candidate.grid.slope_sup_norm(),
        BAND * slope_cap.max(1.0),
    ));
    let arches: Vec<_> = candidate.arches().cloned().collect();
    // For m = M = 1 the window collapses to an equality, so the band must
    // absorb the width-measurement accuracy of event-located nodes.
    let width_band = 1e-7;
    for (k, arch) in arches.iter().enumerate() {
        let li = arch.width();
        let two_t = 2.0 * time_map_at(exps, lambda, arch.amplitude)?;
        items.push(CheckItem::assertable(
            &format!("lemma2.per_interval_lower[{k}]"),
            two_t - m.sqrt() * li,
            width_band,
        ));
        items.push(CheckItem::assertable(
            &format!("lemma2.per_interval_upper[{k}]"),
            big_m.sqrt() * li - two_t,
            width_band,
        ));
    }
    for k in 0..arches.len().saturating_sub(1) {
        let r = arches[k].width() / arches[k + 1].width();
        items.push(CheckItem::assertable(
            &format!("lemma2.arch_ratio[{k}]"),
            (table.a - r).min(r - 1.0 / table.a),
            BAND,
        ));
    }
    Ok(CheckReport::new("lemma_II", items))
}

/// Sampling plan for the ratio-inequality verification.
#[derive(Debug, Clone, Copy)]
pub struct RatioSamples {
    pub per_regime: usize,
    pub lambda_range: (f64, f64),
    pub seed: u64,
}

impl Default for RatioSamples {
    fn default() -> Self {
        RatioSamples { per_regime: 10_000, lambda_range: (0.05, 50.0), seed: 0x5eed }
    }
}

/// Monte-Carlo verification of the three displayed G/T ratio inequalities with
/// the tabulated C1, C2. Margins are logarithmic (log RHS - log LHS); a
/// counterexample would indicate a constants-derivation bug.
pub fn check_ratio_inequalities(
    exps: Exponents,
    bounds: &PinchingBounds,
    samples: &RatioSamples,
) -> Result<CheckReport> {
    let table = build_constants(exps, bounds)?;
    let (p, q) = (exps.p(), exps.q());
    let mut rng = ChaCha8Rng::seed_from_u64(samples.seed);
    let unit = Uniform::new(0.0_f64, 1.0).unwrap();
    let n_lambda = 100.min(samples.per_regime).max(1);
    let per_lambda = samples.per_regime.div_ceil(n_lambda);

    let g = |la: f64, z: f64| big_g_eval(exps, la, z);
    let mut worst = [f64::INFINITY; 3];
    let mut violations = [0usize; 3];
    let mut checked = [0usize; 3];

    let (lo, hi) = samples.lambda_range;
    for k in 0..n_lambda {
        // deterministic lambda ladder + jitter
        let frac = (k as f64 + unit.sample(&mut rng)) / n_lambda as f64;
        let la = lo * (hi / lo).powf(frac);
        let prof = alpha_star(exps, la)?;
        let a_star = prof.alpha_star;
        let t_star = prof.t_star;
        for _ in 0..per_lambda {
            // regime 1: both amplitudes below alpha_lambda
            let b1 = a_star * 1e-3_f64.powf(unit.sample(&mut rng));
            let b2 = a_star * 1e-3_f64.powf(unit.sample(&mut rng));
            let lhs = (g(la, b1) / g(la, b2)).ln();
            let rhs = table.c1.ln()
                + 2.0 * q / (2.0 - q)
                    * (time_map_at(exps, la, b1)? / time_map_at(exps, la, b2)?).ln();
            let margin = rhs - lhs;
            worst[0] = worst[0].min(margin);
            checked[0] += 1;
            if margin < 0.0 {
                violations[0] += 1;
            }

            // regime 2: both above alpha_lambda
            let b1 = a_star / 1e-3_f64.powf(unit.sample(&mut rng));
            let b2 = a_star / 1e-3_f64.powf(unit.sample(&mut rng));
            let lhs = (g(la, b1) / g(la, b2)).ln();
            let rhs = table.c2.ln()
                + 2.0 * p / (p - 2.0)
                    * (time_map_at(exps, la, b2)? / time_map_at(exps, la, b1)?).ln();
            let margin = rhs - lhs;
            worst[1] = worst[1].min(margin);
            checked[1] += 1;
            if margin < 0.0 {
                violations[1] += 1;
            }

            // regime 3: beta1 <= alpha_lambda <= beta2, min-form bound
            let b1 = a_star * 1e-3_f64.powf(unit.sample(&mut rng));
            let b2 = a_star / 1e-3_f64.powf(unit.sample(&mut rng));
            let lhs = (g(la, b1) / g(la, b2)).ln();
            let r1 = 2.0 * q / (2.0 - q) * (time_map_at(exps, la, b1)? / t_star).ln();
            let r2 = 2.0 * p / (p - 2.0) * (time_map_at(exps, la, b2)? / t_star).ln();
            let rhs = (table.c1 * table.c2).ln() + r1.min(r2);
            let margin = rhs - lhs;
            worst[2] = worst[2].min(margin);
            checked[2] += 1;
            if margin < 0.0 {
                violations[2] += 1;
            }
        }
    }

    let names = ["ratio.below_alpha_star", "ratio.above_alpha_star", "ratio.mixed_min_form"];
    let items = (0..3)
        .map(|i| {
            let mut item = CheckItem::assertable(names[i], worst[i], 0.0);
            item.info = Some(format!("{} samples, {} violations", checked[i], violations[i]));
            item.passed = violations[i] == 0;
            item
        })
        .collect();
    Ok(CheckReport::new("ratio_inequalities", items))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solutions::{build_dead_core, build_nodal, DeadCorePlacement};
    use crate::timemap::{dead_core_length, lambda_j_star, BranchSide};

    fn exps() -> Exponents {
        Exponents::new(4.0, 1.5).unwrap()
    }

    fn unit_bounds() -> PinchingBounds {
        PinchingBounds::unit()
    }

    #[test]
    fn constants_table_values() {
        let t = build_constants(exps(), &unit_bounds()).unwrap();
        assert!((t.m_p - 1.311028777146059905).abs() < 1e-10);
        assert!((t.m_q - 1.724739706153193690).abs() < 1e-10);
        assert!(t.m_q > t.m_p && t.m_p > 1.0);
        assert!(t.c1 >= 1.0 && t.c2 >= 1.0);
        assert!(t.a > 1.0);
        // s_j strictly decreasing, t_j in (0, 1]
        for j in 0..10 {
            assert!(t.s_j(j + 1) < t.s_j(j));
            assert!(t.t_j(j) > 0.0 && t.t_j(j) <= 1.0);
        }
        // d for the unit model: pi^{2/(p-2)} / (1 + pi^{2/(p-2)})
        let pi1 = std::f64::consts::PI;
        assert!((t.d - pi1 / (1.0 + pi1)).abs() < 1e-12);
        assert_eq!(t.provenance.len(), 8);
    }

    #[test]
    fn constants_reproducible() {
        let a = build_constants(exps(), &unit_bounds()).unwrap();
        let b = build_constants(exps(), &unit_bounds()).unwrap();
        assert_eq!(a.c1.to_bits(), b.c1.to_bits());
        assert_eq!(a.c2.to_bits(), b.c2.to_bits());
        assert_eq!(a.a.to_bits(), b.a.to_bits());
        assert_eq!(a.d.to_bits(), b.d.to_bits());
    }

    #[test]
    fn c3_brackets_t_star_on_lambda_grid() {
        let t = build_constants(exps(), &unit_bounds()).unwrap();
        let (p, q) = (4.0, 1.5);
        for &la in &[0.1_f64, 1.0, 10.0, 100.0] {
            let prof = alpha_star(exps(), la).unwrap();
            let pow_t = la.powf((2.0 - p) / (2.0 * (p - q)));
            assert!(prof.t_star <= t.c3_upper * pow_t * (1.0 + 1e-12), "upper at {la}");
            assert!(prof.t_star >= t.c3 * pow_t * (1.0 - 1e-12), "lower at {la}");
            let pow_a = la.powf(1.0 / (p - q));
            assert!(prof.alpha_star <= t.c3_upper * pow_a && prof.alpha_star >= t.c3 * pow_a);
        }
    }

    #[test]
    fn lemma_i_on_constructed_solutions() {
        let e = exps();
        // dead-core solution at 2 lambda_{0*}
        let la0 = lambda_j_star(e, 0).unwrap();
        let la = 2.0 * la0;
        let l = dead_core_length(e, la, 0).unwrap();
        let placement = DeadCorePlacement { offsets: vec![(1.0 - l) / 2.0], arch_length: l };
        let sol = build_dead_core(e, la, &placement, &[1], 1025).unwrap();
        let report = check_lemma_i(e, &unit_bounds(), la, &sol).unwrap();
        assert!(report.passed, "report: {report:?}");

        // nodal solution near lambda = 0^- (upper branch persists for lambda <= 0)
        let sol = build_nodal(e, -1e-6, 0, BranchSide::Upper, 1, 513).unwrap();
        let report = check_lemma_i(e, &unit_bounds(), -1e-6, &sol).unwrap();
        assert!(report.passed);

        // slope bound at lambda = -1
        let sol = build_nodal(e, -1.0, 0, BranchSide::Upper, 1, 513).unwrap();
        let report = check_lemma_i(e, &unit_bounds(), -1.0, &sol).unwrap();
        assert!(report.passed);
        assert!(report.items.iter().any(|i| i.name == "lemma1.slope_bound" && i.passed));
    }

    #[test]
    fn lemma_ii_on_constructed_solutions() {
        let e = exps();
        for j in [0usize, 2] {
            for side in [BranchSide::Lower, BranchSide::Upper] {
                let sol = build_nodal(e, 1.0, j, side, 1, 513).unwrap();
                let report = check_lemma_ii(e, &unit_bounds(), 1.0, &sol).unwrap();
                assert!(report.passed, "j = {j}, {side:?}: {report:?}");
                // equality case: per-interval windows collapse to ~0 margins
                for item in &report.items {
                    if item.name.starts_with("lemma2.per_interval") {
                        assert!(item.margin.abs() < 1e-7, "{}: {}", item.name, item.margin);
                    }
                }
            }
        }
    }

    #[test]
    fn lemma_ii_flags_fabricated_lambda() {
        let e = exps();
        let sol = build_nodal(e, 1.0, 0, BranchSide::Upper, 1, 257).unwrap();
        let t = build_constants(e, &unit_bounds()).unwrap();
        let too_big = 1.1 * t.lambda_ceiling(0, 1.0);
        let report = check_lemma_ii(e, &unit_bounds(), too_big, &sol).unwrap();
        assert!(!report.passed);
        assert!(report
            .items
            .iter()
            .any(|i| i.name == "lemma2.lambda_ceiling" && !i.passed));
    }

    #[test]
    fn ratio_inequalities_hold_on_samples() {
        let samples = RatioSamples { per_regime: 2_000, ..Default::default() };
        let report = check_ratio_inequalities(exps(), &unit_bounds(), &samples).unwrap();
        assert!(report.passed, "{report:?}");
        for item in &report.items {
            assert!(item.margin >= 0.0, "{}: log-margin {}", item.name, item.margin);
        }
    }

    #[test]
    fn ratio_trivial_equal_betas() {
        // beta1 = beta2: LHS = 1 <= C1 since C1 >= 1
        let t = build_constants(exps(), &unit_bounds()).unwrap();
        assert!(t.c1 >= 1.0);
    }
}

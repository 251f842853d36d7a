//! Strict JSON run configuration: unknown keys are rejected, defaults are
//! documented in the README.

use serde::Deserialize;

use ccbvp_core::shooting::ShootCfg;

fn default_grid_points() -> usize {
    1025
}
fn default_radial_points() -> usize {
    2049
}
fn default_ode_abs_tol() -> f64 {
    1e-11
}
fn default_ode_rel_tol() -> f64 {
    1e-10
}
fn default_step_h0() -> f64 {
    0.02
}
fn default_step_h_min() -> f64 {
    1e-6
}
fn default_step_h_max() -> f64 {
    0.1
}
fn default_min_sup_norm() -> f64 {
    1e-3
}
fn default_seed() -> u64 {
    0x5eed
}
fn default_outdir() -> String {
    "out".into()
}
fn default_formats() -> Vec<String> {
    vec!["csv".into(), "json".into(), "gp".into()]
}
fn default_alpha_count() -> usize {
    200
}
fn default_true() -> bool {
    true
}
fn default_leading_sign() -> i8 {
    1
}
fn default_deadcore_samples() -> usize {
    25
}
fn default_ratio_samples() -> usize {
    10_000
}
fn default_suites() -> Vec<String> {
    vec!["all".into()]
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemBlock,
    pub task: TaskBlock,
    #[serde(default)]
    pub numerics: NumericsBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemBlock {
    pub p: f64,
    pub q: f64,
    #[serde(default)]
    pub mode: ProblemMode,
}

#[derive(Debug, Clone, Copy, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ProblemMode {
    #[default]
    Interval,
    Annulus {
        dim: u32,
        rho1: f64,
        rho2: f64,
    },
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TaskBlock {
    Timemap(TimemapTask),
    Diagram(DiagramTask),
    Profiles(ProfilesTask),
    Verify(VerifyTask),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimemapTask {
    pub lambdas: Vec<f64>,
    pub alpha_min: f64,
    pub alpha_max: f64,
    #[serde(default = "default_alpha_count")]
    pub alpha_count: usize,
    #[serde(default = "default_true")]
    pub with_derivative: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagramTask {
    pub j_max: usize,
    pub lambda_min: f64,
    #[serde(default = "default_true")]
    pub include_energy: bool,
    #[serde(default = "default_deadcore_samples")]
    pub deadcore_lambda_samples: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfilesTask {
    pub lambda: f64,
    pub j: usize,
    pub kind: ProfileKind,
    #[serde(default)]
    pub branch: BranchChoice,
    #[serde(default = "default_leading_sign")]
    pub leading_sign: i8,
    /// Dead-core arch offsets a_0 <= ... <= a_j (required for kind = deadcore).
    #[serde(default)]
    pub placement: Option<Vec<f64>>,
    /// Sign pattern sigma in {-1, +1}^{j+1} (threshold / deadcore).
    #[serde(default)]
    pub sigma: Option<Vec<i8>>,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    Nodal,
    Threshold,
    Deadcore,
}

#[derive(Debug, Clone, Copy, Deserialize, Default, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum BranchChoice {
    Lower,
    #[default]
    Upper,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyTask {
    #[serde(default = "default_suites")]
    pub suites: Vec<String>,
    #[serde(default = "default_ratio_samples")]
    pub ratio_samples: usize,
    /// Optional candidate profile CSV (columns x,u,u_prime) to classify.
    #[serde(default)]
    pub candidate_csv: Option<String>,
    /// Lambda at which the candidate is classified.
    #[serde(default)]
    pub candidate_lambda: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsBlock {
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    #[serde(default = "default_radial_points")]
    pub radial_points: usize,
    #[serde(default = "default_ode_abs_tol")]
    pub ode_abs_tol: f64,
    #[serde(default = "default_ode_rel_tol")]
    pub ode_rel_tol: f64,
    #[serde(default = "default_step_h0")]
    pub step_h0: f64,
    #[serde(default = "default_step_h_min")]
    pub step_h_min: f64,
    #[serde(default = "default_step_h_max")]
    pub step_h_max: f64,
    #[serde(default = "default_min_sup_norm")]
    pub min_sup_norm: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

impl Default for NumericsBlock {
    fn default() -> Self {
        NumericsBlock {
            grid_points: default_grid_points(),
            radial_points: default_radial_points(),
            ode_abs_tol: default_ode_abs_tol(),
            ode_rel_tol: default_ode_rel_tol(),
            step_h0: default_step_h0(),
            step_h_min: default_step_h_min(),
            step_h_max: default_step_h_max(),
            min_sup_norm: default_min_sup_norm(),
            seed: default_seed(),
        }
    }
}

impl NumericsBlock {
    pub fn shoot_cfg(&self) -> ShootCfg {
        ShootCfg { abs_tol: self.ode_abs_tol, rel_tol: self.ode_rel_tol, ..Default::default() }
    }

    pub fn step_cfg(&self) -> ccbvp_core::continuation::StepCfg {
        ccbvp_core::continuation::StepCfg {
            h0: self.step_h0,
            h_min: self.step_h_min,
            h_max: self.step_h_max,
            min_sup_norm: self.min_sup_norm,
            shoot: self.shoot_cfg(),
            ..Default::default()
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default = "default_outdir")]
    pub dir: String,
    #[serde(default = "default_formats")]
    pub formats: Vec<String>,
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock { dir: default_outdir(), formats: default_formats() }
    }
}

impl RunConfig {
    pub fn load(path: &std::path::Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        let cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| format!("config parse error: {e}"))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), String> {
        if !(1.0 < self.problem.q && self.problem.q < 2.0 && 2.0 < self.problem.p) {
            return Err(format!(
                "exponents must satisfy 1 < q < 2 < p, got p = {}, q = {}",
                self.problem.p, self.problem.q
            ));
        }
        if let ProblemMode::Annulus { dim, rho1, rho2 } = self.problem.mode {
            if dim < 1 || !(0.0 < rho1 && rho1 < rho2) {
                return Err("annulus mode requires dim >= 1 and 0 < rho1 < rho2".into());
            }
        }
        match &self.task {
            TaskBlock::Timemap(t) => {
                if t.lambdas.is_empty() {
                    return Err("timemap task requires a nonempty lambda list".into());
                }
                if !(0.0 < t.alpha_min && t.alpha_min < t.alpha_max) {
                    return Err("timemap task requires 0 < alpha_min < alpha_max".into());
                }
                if t.alpha_count < 2 {
                    return Err("timemap task requires alpha_count >= 2".into());
                }
            }
            TaskBlock::Profiles(t) => {
                if t.leading_sign != 1 && t.leading_sign != -1 {
                    return Err("profiles leading_sign must be +1 or -1".into());
                }
                if t.kind == ProfileKind::Deadcore && t.placement.is_none() {
                    return Err("deadcore profiles require a placement".into());
                }
            }
            TaskBlock::Diagram(t) => {
                if !t.lambda_min.is_finite() {
                    return Err("diagram lambda_min must be finite".into());
                }
            }
            TaskBlock::Verify(t) => {
                if t.candidate_csv.is_some() && t.candidate_lambda.is_none() {
                    return Err("candidate_csv requires candidate_lambda".into());
                }
            }
        }
        Ok(())
    }
}

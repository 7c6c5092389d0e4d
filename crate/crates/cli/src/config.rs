//! Experiment configuration: one JSON object per run.
//!
//! ```json
//! {
//!   "experiment": "gap_classification",
//!   "seed": 7,
//!   "output_dir": "out/gap",
//!   "params": { ... }
//! }
//! ```

use std::path::PathBuf;

use serde::Deserialize;

// no deny_unknown_fields here: the flattened tag enum consumes the
// `experiment` and `params` keys
#[derive(Debug, Clone, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub output_dir: PathBuf,
    #[serde(flatten)]
    pub kind: ExperimentKind,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "experiment", rename_all = "snake_case")]
pub enum ExperimentKind {
    GapClassification { params: GapClassificationParams },
    GapRegression { params: GapRegressionParams },
    VrhoAsymptotics { params: VrhoParams },
    TrainSweep { params: TrainSweepParams },
    VcShatter { params: VcShatterParams },
    Duality { params: DualityParams },
    MetricsTable { params: MetricsTableParams },
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::GapClassification { .. } => "gap_classification",
            ExperimentKind::GapRegression { .. } => "gap_regression",
            ExperimentKind::VrhoAsymptotics { .. } => "vrho_asymptotics",
            ExperimentKind::TrainSweep { .. } => "train_sweep",
            ExperimentKind::VcShatter { .. } => "vc_shatter",
            ExperimentKind::Duality { .. } => "duality",
            ExperimentKind::MetricsTable { .. } => "metrics_table",
        }
    }
}

fn default_mean_norm() -> f64 {
    2.0
}
fn default_pi_plus() -> f64 {
    0.5
}
fn default_eps() -> f64 {
    1.0
}
fn default_sigma() -> f64 {
    1.0
}
fn default_theta_norm() -> f64 {
    1.0
}
fn default_gap_dims() -> Vec<usize> {
    vec![100, 400, 1600]
}
fn default_gap_rhos() -> Vec<f64> {
    vec![0.0, 0.1]
}
fn default_reg_rhos() -> Vec<f64> {
    vec![0.0, 0.1]
}
fn default_n_samples() -> usize {
    100_000
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloCheck {
    pub n_points: usize,
    pub m_draws: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapClassificationParams {
    #[serde(default = "default_mean_norm")]
    pub mean_norm: f64,
    #[serde(default = "default_pi_plus")]
    pub pi_plus: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_gap_dims")]
    pub dims: Vec<usize>,
    #[serde(default = "default_gap_rhos")]
    pub rhos: Vec<f64>,
    /// Optional Monte-Carlo cross-check columns.
    #[serde(default)]
    pub mc: Option<MonteCarloCheck>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdjudicationParams {
    pub d: usize,
    pub m_draws: usize,
    pub rho: f64,
}

impl Default for AdjudicationParams {
    fn default() -> Self {
        Self { d: 400, m_draws: 1_000_000, rho: 0.1 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapRegressionParams {
    #[serde(default = "default_theta_norm")]
    pub theta_norm: f64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_gap_dims")]
    pub dims: Vec<usize>,
    #[serde(default = "default_reg_rhos")]
    pub rhos: Vec<f64>,
    #[serde(default = "default_n_samples")]
    pub n_samples: usize,
    /// Closed-form-vs-sampled adjudication of the epigraph correction
    /// coefficient; set to null to skip.
    #[serde(default = "default_adjudication")]
    pub adjudicate: Option<AdjudicationParams>,
}

fn default_adjudication() -> Option<AdjudicationParams> {
    Some(AdjudicationParams::default())
}

fn default_vrho_d() -> usize {
    1000
}
fn default_vrho_rhos() -> Vec<f64> {
    vec![0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5]
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VrhoParams {
    #[serde(default = "default_vrho_d")]
    pub d: usize,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_vrho_rhos")]
    pub rhos: Vec<f64>,
}

fn default_sweep_rhos() -> Vec<f64> {
    vec![1.0, 0.5, 0.1, 0.01, 0.001]
}
fn default_dim2() -> usize {
    2
}
fn default_n_train() -> usize {
    2_000
}
fn default_n_test() -> usize {
    10_000
}
fn default_m_draws() -> usize {
    20
}
fn default_inner_steps() -> usize {
    10
}
fn default_eta() -> f64 {
    0.2
}
fn default_eta_alpha() -> f64 {
    1.0
}
fn default_batch() -> usize {
    100
}
fn default_epochs() -> usize {
    200
}
fn default_prob_rho() -> f64 {
    0.1
}
fn default_eval_samples() -> usize {
    400
}
fn default_cvar_tail() -> f64 {
    0.05
}
fn default_pgd_steps() -> usize {
    20
}
fn default_pgd_step_size() -> f64 {
    0.25
}
fn default_trace_every() -> usize {
    20
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepTrainParams {
    #[serde(default = "default_m_draws")]
    pub m_draws: usize,
    #[serde(default = "default_inner_steps")]
    pub inner_steps: usize,
    /// Base outer step size; runs with `rho * m_draws < 1` scale it down
    /// by that factor to compensate the `1/(rho M)` hinge scaling.
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "default_eta_alpha")]
    pub eta_alpha: f64,
    #[serde(default = "default_batch")]
    pub batch: usize,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_trace_every")]
    pub trace_every: usize,
}

impl Default for SweepTrainParams {
    fn default() -> Self {
        Self {
            m_draws: default_m_draws(),
            inner_steps: default_inner_steps(),
            eta: default_eta(),
            eta_alpha: default_eta_alpha(),
            batch: default_batch(),
            epochs: default_epochs(),
            trace_every: default_trace_every(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepEvalParams {
    #[serde(default = "default_prob_rho")]
    pub prob_rho: f64,
    #[serde(default = "default_eval_samples")]
    pub prob_samples: usize,
    #[serde(default = "default_cvar_tail")]
    pub cvar_tail: f64,
    #[serde(default = "default_eval_samples")]
    pub cvar_samples: usize,
    #[serde(default = "default_pgd_steps")]
    pub pgd_steps: usize,
    #[serde(default = "default_pgd_step_size")]
    pub pgd_step_size: f64,
}

impl Default for SweepEvalParams {
    fn default() -> Self {
        Self {
            prob_rho: default_prob_rho(),
            prob_samples: default_eval_samples(),
            cvar_tail: default_cvar_tail(),
            cvar_samples: default_eval_samples(),
            pgd_steps: default_pgd_steps(),
            pgd_step_size: default_pgd_step_size(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSweepParams {
    #[serde(default = "default_mean_norm")]
    pub mean_norm: f64,
    #[serde(default = "default_pi_plus")]
    pub pi_plus: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_dim2")]
    pub d: usize,
    #[serde(default = "default_n_train")]
    pub n_train: usize,
    #[serde(default = "default_n_test")]
    pub n_test: usize,
    #[serde(default = "default_sweep_rhos")]
    pub rhos: Vec<f64>,
    #[serde(default)]
    pub train: SweepTrainParams,
    #[serde(default)]
    pub eval: SweepEvalParams,
}

fn default_rho_o() -> f64 {
    0.01
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VcShatterParams {
    #[serde(default = "default_rho_o")]
    pub rho_o: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    /// Quantile levels for the pair growth search; defaults to
    /// `[rho_o, 0.5, 0.9 * (1 - rho_o)]`.
    #[serde(default)]
    pub pair_rhos: Option<Vec<f64>>,
}

fn default_n_instances() -> usize {
    100
}
fn default_n_atoms() -> usize {
    20
}
fn default_betas() -> Vec<f64> {
    vec![0.05, 0.3, 0.9]
}
fn default_bernoulli_instances() -> usize {
    50
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DualityParams {
    #[serde(default = "default_n_instances")]
    pub n_instances: usize,
    #[serde(default = "default_n_atoms")]
    pub n_atoms: usize,
    #[serde(default = "default_betas")]
    pub betas: Vec<f64>,
    #[serde(default = "default_bernoulli_instances")]
    pub bernoulli_instances: usize,
}

fn default_methods() -> Vec<String> {
    vec!["erm".into(), "erm_da".into(), "pgd_at".into(), "prl".into()]
}
fn default_table_rho() -> f64 {
    0.1
}
fn default_table_prob_rhos() -> Vec<f64> {
    vec![0.1, 0.05, 0.01]
}
fn default_aug_samples() -> usize {
    100
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsTableParams {
    #[serde(default = "default_mean_norm")]
    pub mean_norm: f64,
    #[serde(default = "default_pi_plus")]
    pub pi_plus: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_dim2")]
    pub d: usize,
    #[serde(default = "default_n_train")]
    pub n_train: usize,
    #[serde(default = "default_n_test")]
    pub n_test: usize,
    #[serde(default = "default_methods")]
    pub methods: Vec<String>,
    #[serde(default = "default_table_rho")]
    pub prl_rho: f64,
    #[serde(default)]
    pub train: SweepTrainParams,
    #[serde(default = "default_table_prob_rhos")]
    pub prob_rhos: Vec<f64>,
    #[serde(default = "default_aug_samples")]
    pub aug_samples: usize,
    #[serde(default = "default_eval_samples")]
    pub prob_samples: usize,
    #[serde(default = "default_cvar_tail")]
    pub cvar_tail: f64,
    #[serde(default = "default_eval_samples")]
    pub cvar_samples: usize,
    #[serde(default = "default_pgd_steps")]
    pub pgd_steps: usize,
    #[serde(default = "default_pgd_step_size")]
    pub pgd_step_size: f64,
}

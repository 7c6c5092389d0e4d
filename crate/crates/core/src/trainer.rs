//! Training: the CVaR-based probabilistically robust learner and the
//! ERM / data-augmentation / adversarial-training baselines.
//!
//! The robust learner minimizes the per-example CVaR of the perturbed
//! loss through its variational form. Each example `j` owns a threshold
//! `alpha_j`, persisted across epochs and warm-started at zero. Per
//! minibatch, `inner_steps` subgradient iterations update the thresholds
//! on fresh perturbation draws (M draws per iteration, shared across the
//! batch), and one outer step descends
//! `(1/(rho M B)) * sum_{j,k} grad[l(f(x_j + delta_k), y_j) - alpha_j]_+`
//! reusing the draws from the final inner iteration.

use rand::seq::SliceRandom;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::eval;
use crate::models::DifferentiableModel;
use crate::perturb::PerturbationSpec;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainMethod {
    Erm,
    ErmDa,
    PgdAt,
    Prl,
}

/// Projected-gradient attack settings.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PgdConfig {
    pub steps: usize,
    pub step_size: f64,
}

impl Default for PgdConfig {
    fn default() -> Self {
        Self { steps: 20, step_size: 0.25 }
    }
}

/// Per-epoch metrics cadence for the training trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceConfig {
    /// Evaluate the metric columns every this many epochs (the final
    /// epoch is always evaluated). 0 disables them.
    pub every: usize,
    pub prob_rho: f64,
    pub prob_samples: usize,
    pub cvar_tail: f64,
    pub cvar_samples: usize,
    pub seed: u64,
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self {
            every: 1,
            prob_rho: 0.1,
            prob_samples: 50,
            cvar_tail: 0.05,
            cvar_samples: 50,
            seed: 0x7ace,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub method: TrainMethod,
    /// Tail mass for the robust learner. Values above 1 are accepted with
    /// a warning: the objective stays well defined, the parameter just
    /// stops being a probability and scales the hinge term instead.
    pub rho: f64,
    /// Perturbation draws per inner iteration.
    pub m_draws: usize,
    /// Inner threshold iterations per minibatch.
    pub inner_steps: usize,
    /// Outer (parameter) step size.
    pub eta: f64,
    /// Inner (threshold) step size.
    pub eta_alpha: f64,
    pub batch: usize,
    pub epochs: usize,
    pub perturbation: PerturbationSpec,
    pub pgd: PgdConfig,
    pub seed: u64,
    pub trace: TraceConfig,
}

impl TrainConfig {
    pub fn new(method: TrainMethod, perturbation: PerturbationSpec) -> Self {
        Self {
            method,
            rho: 0.1,
            m_draws: 20,
            inner_steps: 10,
            eta: 0.1,
            eta_alpha: 1.0,
            batch: 100,
            epochs: 50,
            perturbation,
            pgd: PgdConfig::default(),
            seed: 0,
            trace: TraceConfig::default(),
        }
    }

    /// Hard validation; returns soft warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        if self.m_draws == 0 || self.inner_steps == 0 || self.batch == 0 || self.epochs == 0 {
            return Err(Error::invalid(
                "config",
                "m_draws, inner_steps, batch, and epochs must all be >= 1",
            ));
        }
        if !(self.eta > 0.0) || !(self.eta_alpha > 0.0) {
            return Err(Error::invalid("eta/eta_alpha", "step sizes must be > 0"));
        }
        let mut warnings = Vec::new();
        if self.method == TrainMethod::Prl {
            if !(self.rho > 0.0) {
                return Err(Error::invalid("rho", format!("must be > 0, got {}", self.rho)));
            }
            if self.rho > 1.0 {
                warnings.push(format!(
                    "rho = {} exceeds 1; treated as a hinge scaling, not a probability",
                    self.rho
                ));
            }
            if self.rho * (self.m_draws as f64) < 1.0 {
                warnings.push(format!(
                    "rho * M = {} < 1: fewer than one draw in the tail; threshold \
                     updates will chase the sample maximum",
                    self.rho * self.m_draws as f64
                ));
            }
        }
        Ok(warnings)
    }
}

/// One trace row; metric columns are NaN on epochs where the cadence
/// skipped them.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TraceRow {
    pub epoch: usize,
    pub train_objective: f64,
    pub clean_acc: f64,
    pub prob_acc: f64,
    pub cvar_test: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub model: DifferentiableModel,
    pub trace: Vec<TraceRow>,
    pub warnings: Vec<String>,
}

/// Renders the per-epoch trace as CSV.
pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut out = String::from("epoch,train_objective,clean_acc,prob_acc,cvar_test\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.epoch, r.train_objective, r.clean_acc, r.prob_acc, r.cvar_test
        ));
    }
    out
}

/// Outer gradient of the robust objective at fixed thresholds and draws:
/// `(1/(rho M B)) * sum_{j,k} grad[l(f(x_j + delta_k), y_j) - alpha_j]_+`.
/// The hinge contributes its gradient only where strictly active.
pub fn prl_outer_gradient(
    model: &DifferentiableModel,
    xs: &[&[f64]],
    ys: &[f64],
    alphas: &[f64],
    deltas: &[Vec<f64>],
    rho: f64,
) -> Result<Vec<f64>> {
    let b = xs.len();
    let m = deltas.len();
    if b == 0 || m == 0 {
        return Err(Error::invalid("batch/deltas", "must be non-empty"));
    }
    if ys.len() != b || alphas.len() != b {
        return Err(Error::DimensionMismatch { expected: b, got: ys.len().min(alphas.len()) });
    }
    let d = model.dim();
    let scale = 1.0 / (rho * m as f64 * b as f64);
    let mut grad = vec![0.0; model.n_params()];
    let mut perturbed = vec![0.0; d];
    for (j, x) in xs.iter().enumerate() {
        for delta in deltas {
            for k in 0..d {
                perturbed[k] = x[k] + delta[k];
            }
            let loss = model.loss(&perturbed, ys[j])?;
            if loss - alphas[j] > 0.0 {
                model.loss_grad_accumulate(&perturbed, ys[j], scale, &mut grad)?;
            }
        }
    }
    Ok(grad)
}

/// Robust minibatch objective at fixed thresholds and draws:
/// `mean_j(alpha_j) + (1/(rho M B)) * sum_{j,k} [l(..) - alpha_j]_+`.
pub fn prl_batch_objective(
    model: &DifferentiableModel,
    xs: &[&[f64]],
    ys: &[f64],
    alphas: &[f64],
    deltas: &[Vec<f64>],
    rho: f64,
) -> Result<f64> {
    let b = xs.len();
    let m = deltas.len();
    if b == 0 || m == 0 {
        return Err(Error::invalid("batch/deltas", "must be non-empty"));
    }
    let d = model.dim();
    let mut hinge_total = 0.0;
    let mut perturbed = vec![0.0; d];
    for (j, x) in xs.iter().enumerate() {
        for delta in deltas {
            for k in 0..d {
                perturbed[k] = x[k] + delta[k];
            }
            let loss = model.loss(&perturbed, ys[j])?;
            hinge_total += (loss - alphas[j]).max(0.0);
        }
    }
    let mean_alpha = alphas.iter().sum::<f64>() / b as f64;
    Ok(mean_alpha + hinge_total / (rho * m as f64 * b as f64))
}

/// Projected gradient ascent on the loss, starting from `delta = 0`.
/// L-infinity balls step along the gradient sign, L2 balls along the
/// normalized gradient; every iterate is projected back onto the ball.
pub fn pgd_attack(
    model: &DifferentiableModel,
    x: &[f64],
    y: f64,
    perturbation: &PerturbationSpec,
    steps: usize,
    step_size: f64,
) -> Result<Vec<f64>> {
    if steps == 0 {
        return Err(Error::invalid("steps", "must be >= 1"));
    }
    if x.len() != perturbation.dim {
        return Err(Error::DimensionMismatch {
            expected: perturbation.dim,
            got: x.len(),
        });
    }
    let d = x.len();
    let mut delta = vec![0.0; d];
    let mut perturbed = vec![0.0; d];
    for _ in 0..steps {
        for k in 0..d {
            perturbed[k] = x[k] + delta[k];
        }
        let grad = model.loss_input_grad(&perturbed, y)?;
        match perturbation.norm {
            crate::perturb::NormKind::Linf => {
                for (dk, g) in delta.iter_mut().zip(&grad) {
                    *dk += step_size * g.signum() * f64::from(*g != 0.0);
                }
            }
            crate::perturb::NormKind::L2 => {
                let norm: f64 = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
                if norm > 0.0 {
                    for (dk, g) in delta.iter_mut().zip(&grad) {
                        *dk += step_size * g / norm;
                    }
                }
            }
        }
        perturbation.project(&mut delta);
    }
    Ok(delta)
}

fn check_finite(values: &[f64], context: &'static str) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { context });
    }
    Ok(())
}

struct EpochStats {
    objective_sum: f64,
    batches: usize,
}

/// Trains with the probabilistically robust objective.
pub fn prl_train(
    data: &Dataset,
    model0: &DifferentiableModel,
    cfg: &TrainConfig,
) -> Result<TrainOutput> {
    if cfg.method != TrainMethod::Prl {
        return Err(Error::invalid("method", "prl_train requires method = prl"));
    }
    train(data, model0, cfg)
}

/// Trains one of the baselines (plain ERM, ERM on randomly perturbed
/// inputs, or adversarial training against the projected-gradient
/// attack).
pub fn baseline_train(
    data: &Dataset,
    model0: &DifferentiableModel,
    cfg: &TrainConfig,
) -> Result<TrainOutput> {
    if cfg.method == TrainMethod::Prl {
        return Err(Error::invalid("method", "baseline_train requires a non-prl method"));
    }
    train(data, model0, cfg)
}

/// Shared loop; dispatches the per-batch update by method.
pub fn train(data: &Dataset, model0: &DifferentiableModel, cfg: &TrainConfig) -> Result<TrainOutput> {
    let warnings = cfg.validate()?;
    if model0.dim() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: model0.dim(),
            got: data.dim(),
        });
    }
    if cfg.perturbation.dim != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            got: cfg.perturbation.dim,
        });
    }

    let n = data.len();
    let d = data.dim();
    let mut model = model0.clone();
    let mut alphas = vec![0.0; n];
    let mut rng = rng::seeded(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut trace = Vec::new();

    let mut grad = vec![0.0; model.n_params()];
    let mut deltas: Vec<Vec<f64>> = (0..cfg.m_draws).map(|_| vec![0.0; d]).collect();
    let mut perturbed = vec![0.0; d];

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut stats = EpochStats { objective_sum: 0.0, batches: 0 };

        for chunk in order.chunks(cfg.batch) {
            let bsz = chunk.len();
            match cfg.method {
                TrainMethod::Prl => {
                    // inner threshold iterations, fresh draws each time
                    for _ in 0..cfg.inner_steps {
                        for delta in deltas.iter_mut() {
                            cfg.perturbation.sample_into(&mut rng, delta);
                        }
                        for &j in chunk {
                            let x = data.x(j);
                            let y = data.y(j);
                            let mut hits = 0usize;
                            for delta in &deltas {
                                for k in 0..d {
                                    perturbed[k] = x[k] + delta[k];
                                }
                                if model.loss(&perturbed, y)? >= alphas[j] {
                                    hits += 1;
                                }
                            }
                            let g_alpha =
                                1.0 - hits as f64 / (cfg.rho * cfg.m_draws as f64);
                            alphas[j] -= cfg.eta_alpha * g_alpha;
                            if !alphas[j].is_finite() {
                                return Err(Error::NonFinite { context: "alpha update" });
                            }
                        }
                    }
                    // outer step on the draws from the final inner iteration
                    grad.fill(0.0);
                    let scale = 1.0 / (cfg.rho * cfg.m_draws as f64 * bsz as f64);
                    let mut hinge_total = 0.0;
                    for &j in chunk {
                        let x = data.x(j);
                        let y = data.y(j);
                        for delta in &deltas {
                            for k in 0..d {
                                perturbed[k] = x[k] + delta[k];
                            }
                            let loss = model.loss(&perturbed, y)?;
                            let hinge = loss - alphas[j];
                            if hinge > 0.0 {
                                hinge_total += hinge;
                                model.loss_grad_accumulate(&perturbed, y, scale, &mut grad)?;
                            }
                        }
                    }
                    let mean_alpha =
                        chunk.iter().map(|&j| alphas[j]).sum::<f64>() / bsz as f64;
                    stats.objective_sum += mean_alpha + hinge_total * scale;
                }
                TrainMethod::Erm => {
                    grad.fill(0.0);
                    let scale = 1.0 / bsz as f64;
                    let mut loss_total = 0.0;
                    for &j in chunk {
                        let x = data.x(j);
                        let y = data.y(j);
                        loss_total += model.loss(x, y)?;
                        model.loss_grad_accumulate(x, y, scale, &mut grad)?;
                    }
                    stats.objective_sum += loss_total * scale;
                }
                TrainMethod::ErmDa => {
                    grad.fill(0.0);
                    let scale = 1.0 / bsz as f64;
                    let mut loss_total = 0.0;
                    for &j in chunk {
                        let x = data.x(j);
                        let y = data.y(j);
                        cfg.perturbation.sample_into(&mut rng, &mut deltas[0]);
                        for k in 0..d {
                            perturbed[k] = x[k] + deltas[0][k];
                        }
                        loss_total += model.loss(&perturbed, y)?;
                        model.loss_grad_accumulate(&perturbed, y, scale, &mut grad)?;
                    }
                    stats.objective_sum += loss_total * scale;
                }
                TrainMethod::PgdAt => {
                    grad.fill(0.0);
                    let scale = 1.0 / bsz as f64;
                    let mut loss_total = 0.0;
                    for &j in chunk {
                        let x = data.x(j);
                        let y = data.y(j);
                        let delta = pgd_attack(
                            &model,
                            x,
                            y,
                            &cfg.perturbation,
                            cfg.pgd.steps,
                            cfg.pgd.step_size,
                        )?;
                        for k in 0..d {
                            perturbed[k] = x[k] + delta[k];
                        }
                        loss_total += model.loss(&perturbed, y)?;
                        model.loss_grad_accumulate(&perturbed, y, scale, &mut grad)?;
                    }
                    stats.objective_sum += loss_total * scale;
                }
            }
            stats.batches += 1;
            for (p, g) in model.params_mut().iter_mut().zip(&grad) {
                *p -= cfg.eta * g;
            }
            check_finite(model.params(), "model parameters")?;
        }

        let want_metrics = cfg.trace.every > 0
            && (epoch % cfg.trace.every == 0 || epoch == cfg.epochs);
        let (p_acc, cv) = if want_metrics {
            (
                eval::prob_acc(
                    &model,
                    data,
                    &cfg.perturbation,
                    cfg.trace.prob_rho,
                    cfg.trace.prob_samples,
                    cfg.trace.seed,
                )?,
                eval::cvar_test(
                    &model,
                    data,
                    &cfg.perturbation,
                    cfg.trace.cvar_tail,
                    cfg.trace.cvar_samples,
                    cfg.trace.seed,
                )?,
            )
        } else {
            (f64::NAN, f64::NAN)
        };
        trace.push(TraceRow {
            epoch,
            train_objective: stats.objective_sum / stats.batches.max(1) as f64,
            clean_acc: eval::clean_acc(&model, data),
            prob_acc: p_acc,
            cvar_test: cv,
        });
    }

    Ok(TrainOutput { model, trace, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussmix::GaussianMixtureSpec;
    use crate::rng;
    use rand::Rng;

    fn mixture(n: usize, seed: u64) -> (GaussianMixtureSpec, Dataset) {
        let spec = GaussianMixtureSpec::with_mean_norm(2.0, 2, 0.5).unwrap();
        let mut rng = rng::seeded(seed);
        let data = spec.sample_dataset(n, &mut rng);
        (spec, data)
    }

    fn quiet_trace() -> TraceConfig {
        TraceConfig { every: 0, ..TraceConfig::default() }
    }

    fn base_cfg(method: TrainMethod) -> TrainConfig {
        let pert = PerturbationSpec::l2(1.0, 2).unwrap();
        TrainConfig {
            trace: quiet_trace(),
            ..TrainConfig::new(method, pert)
        }
    }

    #[test]
    fn config_validation_and_warnings() {
        let mut cfg = base_cfg(TrainMethod::Prl);
        assert!(cfg.validate().unwrap().is_empty());
        cfg.rho = 2.0;
        let warnings = cfg.validate().unwrap();
        assert_eq!(warnings.len(), 1, "rho > 1 warns: {warnings:?}");
        cfg.rho = 0.01;
        cfg.m_draws = 20;
        let warnings = cfg.validate().unwrap();
        assert!(warnings[0].contains("fewer than one draw"));
        cfg.rho = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = base_cfg(TrainMethod::Erm);
        cfg.epochs = 0;
        assert!(cfg.validate().is_err());
    }

    /// With rho = 1 every indicator fires, the threshold gradient is zero,
    /// alphas stay at zero, and the outer gradient reduces to the plain
    /// data-augmentation gradient over the same draws.
    #[test]
    fn rho_one_reduces_to_average_case_gradient() {
        let (_, data) = mixture(8, 71);
        let mut model = DifferentiableModel::linear_logistic(2).unwrap();
        model.set_params(&[0.3, -0.2, 0.1]).unwrap();
        let pert = PerturbationSpec::l2(1.0, 2).unwrap();
        let mut rng = rng::seeded(72);
        let m = 5;
        let deltas: Vec<Vec<f64>> = (0..m).map(|_| pert.sample(&mut rng)).collect();
        let xs: Vec<&[f64]> = (0..data.len()).map(|i| data.x(i)).collect();
        let ys: Vec<f64> = (0..data.len()).map(|i| data.y(i)).collect();
        let alphas = vec![0.0; data.len()];

        let outer = prl_outer_gradient(&model, &xs, &ys, &alphas, &deltas, 1.0).unwrap();

        let mut expect = vec![0.0; model.n_params()];
        let scale = 1.0 / (m * data.len()) as f64;
        for (j, x) in xs.iter().enumerate() {
            for delta in &deltas {
                let px: Vec<f64> = x.iter().zip(delta).map(|(a, b)| a + b).collect();
                model.loss_grad_accumulate(&px, ys[j], scale, &mut expect).unwrap();
            }
        }
        for (a, b) in outer.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    /// Single example, single draw, single inner step: the parameter
    /// update is exactly eta * grad[l - alpha]_+ / rho.
    #[test]
    fn degenerate_single_step_update() {
        let (_, data_full) = mixture(1, 73);
        let mut cfg = base_cfg(TrainMethod::Prl);
        cfg.m_draws = 1;
        cfg.inner_steps = 1;
        cfg.batch = 1;
        cfg.epochs = 1;
        cfg.rho = 0.25;
        cfg.eta = 0.05;
        cfg.eta_alpha = 0.5;
        cfg.seed = 99;

        let model0 = DifferentiableModel::linear_logistic(2).unwrap();
        let out = prl_train(&data_full, &model0, &cfg).unwrap();

        // replay by hand: shuffle of a single index draws nothing usable,
        // but the rng is still advanced identically
        let mut rng = rng::seeded(99);
        let mut order = vec![0usize];
        rand::seq::SliceRandom::shuffle(&mut order[..], &mut rng);
        let delta = cfg.perturbation.sample(&mut rng);
        let x = data_full.x(0);
        let y = data_full.y(0);
        let px: Vec<f64> = x.iter().zip(&delta).map(|(a, b)| a + b).collect();
        let model = model0.clone();
        let loss = model.loss(&px, y).unwrap();
        // inner step from alpha = 0: all losses >= 0, so the indicator fires
        let alpha = 0.0 - cfg.eta_alpha * (1.0 - 1.0 / (cfg.rho * 1.0));
        let mut expect = model0.params().to_vec();
        if loss - alpha > 0.0 {
            let mut g = vec![0.0; model.n_params()];
            model
                .loss_grad_accumulate(&px, y, 1.0 / cfg.rho, &mut g)
                .unwrap();
            for (p, gi) in expect.iter_mut().zip(&g) {
                *p -= cfg.eta * gi;
            }
        }
        for (a, b) in out.model.params().iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn erm_drives_training_loss_down_on_separated_data() {
        let spec = GaussianMixtureSpec::with_mean_norm(6.0, 2, 0.5).unwrap();
        let mut rng = rng::seeded(74);
        let data = spec.sample_dataset(400, &mut rng);
        let mut cfg = base_cfg(TrainMethod::Erm);
        cfg.epochs = 120;
        cfg.eta = 0.5;
        cfg.seed = 7;
        let model0 = DifferentiableModel::linear_logistic(2).unwrap();
        let out = baseline_train(&data, &model0, &cfg).unwrap();
        let last = out.trace.last().unwrap();
        assert!(
            last.train_objective < 0.1,
            "final objective {}",
            last.train_objective
        );
    }

    /// Zero perturbation radius makes data augmentation identical to ERM,
    /// step for step.
    #[test]
    fn erm_da_with_zero_radius_equals_erm() {
        let (_, data) = mixture(50, 75);
        let mut cfg_da = base_cfg(TrainMethod::ErmDa);
        cfg_da.perturbation = PerturbationSpec::l2(0.0, 2).unwrap();
        cfg_da.epochs = 5;
        cfg_da.seed = 11;
        let mut cfg_erm = cfg_da.clone();
        cfg_erm.method = TrainMethod::Erm;

        let model0 = DifferentiableModel::linear_logistic(2).unwrap();
        let da = train(&data, &model0, &cfg_da).unwrap();
        let erm = train(&data, &model0, &cfg_erm).unwrap();
        // ERM+DA consumes rng for its (zero) draws, so trajectories agree
        // only because the draws are identically zero and shuffles use the
        // same stream positions per epoch... they do not: sampling a zero
        // radius still advances nothing. Verify bitwise equality.
        assert_eq!(da.model.params(), erm.model.params());
    }

    #[test]
    fn training_is_deterministic_under_seed() {
        let (_, data) = mixture(60, 76);
        let mut cfg = base_cfg(TrainMethod::Prl);
        cfg.epochs = 3;
        cfg.seed = 123;
        let model0 = DifferentiableModel::linear_logistic(2).unwrap();
        let a = prl_train(&data, &model0, &cfg).unwrap();
        let b = prl_train(&data, &model0, &cfg).unwrap();
        assert_eq!(a.model.params(), b.model.params());

        cfg.seed = 124;
        let c = prl_train(&data, &model0, &cfg).unwrap();
        assert_ne!(a.model.params(), c.model.params());
    }

    #[test]
    fn pgd_attack_examples() {
        let pert_inf = PerturbationSpec::linf(0.3, 3).unwrap();

        // constant-output model has zero input gradient
        let constant = DifferentiableModel::linear_logistic(3).unwrap();
        let delta = pgd_attack(&constant, &[1.0, 2.0, 3.0], 1.0, &pert_inf, 5, 0.1).unwrap();
        assert_eq!(delta, vec![0.0; 3]);

        // linear model, one big step: eps * sign pattern against the label
        let mut linear = DifferentiableModel::linear_logistic(3).unwrap();
        linear.set_params(&[1.0, -2.0, 0.5, 0.0]).unwrap();
        let delta = pgd_attack(&linear, &[0.1, 0.2, 0.3], 1.0, &pert_inf, 1, 1.0).unwrap();
        // for y = +1 the loss rises along -w
        assert_eq!(delta, vec![-0.3, 0.3, -0.3]);

        // iterates stay in the ball
        let pert_l2 = PerturbationSpec::l2(0.5, 3).unwrap();
        let mut rng = rng::seeded(77);
        for _ in 0..20 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let delta = pgd_attack(&linear, &x, -1.0, &pert_l2, 15, 0.2).unwrap();
            assert!(pert_l2.contains(&delta).unwrap());
        }
    }

    /// Outer gradient against central finite differences of the batch
    /// objective at fixed thresholds and draws.
    #[test]
    fn outer_gradient_matches_finite_differences() {
        let mut rng = rng::seeded(78);
        let pert = PerturbationSpec::l2(1.0, 2).unwrap();
        let (_, data) = mixture(6, 79);
        let xs: Vec<&[f64]> = (0..data.len()).map(|i| data.x(i)).collect();
        let ys: Vec<f64> = (0..data.len()).map(|i| data.y(i)).collect();
        let rho = 0.3;

        let mut checked = 0;
        'outer: while checked < 30 {
            let mut model = if checked % 2 == 0 {
                DifferentiableModel::linear_logistic(2).unwrap()
            } else {
                DifferentiableModel::mlp_logistic(2, 3, &mut rng).unwrap()
            };
            let params: Vec<f64> =
                (0..model.n_params()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            model.set_params(&params).unwrap();
            let deltas: Vec<Vec<f64>> = (0..4).map(|_| pert.sample(&mut rng)).collect();
            let alphas: Vec<f64> =
                (0..xs.len()).map(|_| rng.gen_range(0.0..1.5)).collect();

            // skip states near a hinge kink
            for (j, x) in xs.iter().enumerate() {
                for delta in &deltas {
                    let px: Vec<f64> = x.iter().zip(delta).map(|(a, b)| a + b).collect();
                    let loss = model.loss(&px, ys[j]).unwrap();
                    if (loss - alphas[j]).abs() < 1e-5 {
                        continue 'outer;
                    }
                }
            }

            let analytic =
                prl_outer_gradient(&model, &xs, &ys, &alphas, &deltas, rho).unwrap();
            let h = 1e-7;
            let mut numeric = vec![0.0; model.n_params()];
            for i in 0..model.n_params() {
                let orig = model.params()[i];
                model.params_mut()[i] = orig + h;
                let up =
                    prl_batch_objective(&model, &xs, &ys, &alphas, &deltas, rho).unwrap();
                model.params_mut()[i] = orig - h;
                let down =
                    prl_batch_objective(&model, &xs, &ys, &alphas, &deltas, rho).unwrap();
                model.params_mut()[i] = orig;
                numeric[i] = (up - down) / (2.0 * h);
            }
            let diff: f64 = analytic
                .iter()
                .zip(&numeric)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let scale: f64 = numeric.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-9);
            assert!(diff / scale <= 1e-4, "rel err {}", diff / scale);
            checked += 1;
        }
    }

    /// PGD adversarial training finds the mean direction and trades clean
    /// accuracy for adversarial accuracy relative to plain ERM.
    #[test]
    fn pgd_at_aligns_and_robustifies() {
        let (spec, data) = mixture(800, 80);
        let mut cfg = base_cfg(TrainMethod::PgdAt);
        cfg.epochs = 60;
        cfg.eta = 0.5;
        cfg.seed = 13;
        cfg.pgd = PgdConfig { steps: 10, step_size: 0.3 };
        let model0 = DifferentiableModel::linear_logistic(2).unwrap();
        let robust = baseline_train(&data, &model0, &cfg).unwrap();

        let w = &robust.model.params()[..2];
        let cos = (w[0] * spec.mu()[0] + w[1] * spec.mu()[1])
            / ((w[0] * w[0] + w[1] * w[1]).sqrt() * spec.mu_norm());
        assert!(cos > 0.95, "direction cosine {cos}");
    }
}

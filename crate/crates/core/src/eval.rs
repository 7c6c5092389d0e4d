//! Robustness metrics: clean, augmented, and adversarial accuracy, the
//! quantile accuracy ProbAcc(rho), and test-time CVaR.
//!
//! A point counts toward ProbAcc(rho) when the fraction of correctly
//! classified perturbation draws is at least `1 - rho` (non-strict).
//! Test-time CVaR forms a loss sample per point from perturbation draws
//! and averages the tail mean over the dataset. Everything is parallel
//! over points with per-point random streams, so results depend only on
//! the seed.

use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::models::DifferentiableModel;
use crate::perturb::PerturbationSpec;
use crate::riskcore::LossSample;
use crate::rng;
use crate::trainer::{pgd_attack, PgdConfig};

/// Default number of perturbation draws per point for ProbAcc.
pub const DEFAULT_PROB_ACC_DRAWS: usize = 100;

/// Accuracy and risk summary for one model on one dataset.
#[derive(Debug, Clone, Serialize)]
pub struct MetricsReport {
    pub clean_acc: f64,
    pub aug_acc: f64,
    pub adv_acc: f64,
    /// `(rho, ProbAcc(rho))` per requested tolerance.
    pub prob_acc: Vec<(f64, f64)>,
    /// `(tail_mass, averaged CVaR)` per requested tail.
    pub cvar_test: Vec<(f64, f64)>,
    pub n_points: usize,
    pub aug_samples: usize,
    pub prob_acc_samples: usize,
    pub cvar_samples: usize,
}

/// Knobs for [`metrics_report`].
#[derive(Debug, Clone)]
pub struct MetricsConfig {
    pub aug_samples: usize,
    pub pgd: PgdConfig,
    pub prob_rhos: Vec<f64>,
    pub prob_acc_samples: usize,
    pub cvar_tails: Vec<f64>,
    pub cvar_samples: usize,
    pub seed: u64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            aug_samples: DEFAULT_PROB_ACC_DRAWS,
            pgd: PgdConfig::default(),
            prob_rhos: vec![0.1, 0.05, 0.01],
            prob_acc_samples: DEFAULT_PROB_ACC_DRAWS,
            cvar_tails: vec![0.05],
            cvar_samples: 100,
            seed: 0,
        }
    }
}

fn check_dims(model: &DifferentiableModel, data: &Dataset, pert: &PerturbationSpec) -> Result<()> {
    if model.dim() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: data.dim(),
        });
    }
    if pert.dim != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            got: pert.dim,
        });
    }
    Ok(())
}

/// Fraction of raw points classified correctly.
pub fn clean_acc(model: &DifferentiableModel, data: &Dataset) -> f64 {
    let correct = data
        .iter()
        .filter(|(x, y)| model.predict_label(x) == **y)
        .count();
    correct as f64 / data.len() as f64
}

/// Average accuracy over `m_draws` perturbed copies of each point.
pub fn aug_acc(
    model: &DifferentiableModel,
    data: &Dataset,
    pert: &PerturbationSpec,
    m_draws: usize,
    seed: u64,
) -> Result<f64> {
    check_dims(model, data, pert)?;
    if m_draws == 0 {
        return Err(Error::invalid("m_draws", "must be >= 1"));
    }
    let d = data.dim();
    let correct: usize = (0..data.len())
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(seed, i as u64);
            let mut delta = vec![0.0; d];
            let mut perturbed = vec![0.0; d];
            let x = data.x(i);
            let y = data.y(i);
            let mut hits = 0usize;
            for _ in 0..m_draws {
                pert.sample_into(&mut rng, &mut delta);
                for k in 0..d {
                    perturbed[k] = x[k] + delta[k];
                }
                if model.predict_label(&perturbed) == y {
                    hits += 1;
                }
            }
            hits
        })
        .sum();
    Ok(correct as f64 / (data.len() * m_draws) as f64)
}

/// Fraction of points that survive a projected-gradient attack.
pub fn adv_acc(
    model: &DifferentiableModel,
    data: &Dataset,
    pert: &PerturbationSpec,
    pgd: &PgdConfig,
) -> Result<f64> {
    check_dims(model, data, pert)?;
    let d = data.dim();
    let correct: usize = (0..data.len())
        .into_par_iter()
        .map(|i| {
            let x = data.x(i);
            let y = data.y(i);
            let delta = pgd_attack(model, x, y, pert, pgd.steps, pgd.step_size)
                .expect("dimensions already checked");
            let adv: Vec<f64> = (0..d).map(|k| x[k] + delta[k]).collect();
            usize::from(model.predict_label(&adv) == y)
        })
        .sum();
    Ok(correct as f64 / data.len() as f64)
}

/// Quantile accuracy: the fraction of points whose per-point perturbed
/// accuracy estimate reaches `1 - rho`.
pub fn prob_acc(
    model: &DifferentiableModel,
    data: &Dataset,
    pert: &PerturbationSpec,
    rho: f64,
    n_mc: usize,
    seed: u64,
) -> Result<f64> {
    check_dims(model, data, pert)?;
    if n_mc == 0 {
        return Err(Error::invalid("n_mc", "must be >= 1"));
    }
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::invalid("rho", format!("must be in [0,1], got {rho}")));
    }
    let d = data.dim();
    let robust: usize = (0..data.len())
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(seed, i as u64);
            let mut delta = vec![0.0; d];
            let mut perturbed = vec![0.0; d];
            let x = data.x(i);
            let y = data.y(i);
            let mut hits = 0usize;
            for _ in 0..n_mc {
                pert.sample_into(&mut rng, &mut delta);
                for k in 0..d {
                    perturbed[k] = x[k] + delta[k];
                }
                if model.predict_label(&perturbed) == y {
                    hits += 1;
                }
            }
            usize::from(hits as f64 / n_mc as f64 >= 1.0 - rho)
        })
        .sum();
    Ok(robust as f64 / data.len() as f64)
}

/// Test-time CVaR: per point, the tail mean of the perturbed loss over
/// `m_draws` draws, averaged over the dataset. `m_draws` must resolve the
/// tail, i.e. be at least `ceil(1 / tail_mass)`.
pub fn cvar_test(
    model: &DifferentiableModel,
    data: &Dataset,
    pert: &PerturbationSpec,
    tail_mass: f64,
    m_draws: usize,
    seed: u64,
) -> Result<f64> {
    check_dims(model, data, pert)?;
    if !(tail_mass > 0.0 && tail_mass <= 1.0) {
        return Err(Error::invalid(
            "tail_mass",
            format!("must be in (0,1], got {tail_mass}"),
        ));
    }
    let needed = (1.0 / tail_mass).ceil() as usize;
    if m_draws < needed {
        return Err(Error::invalid(
            "m_draws",
            format!("tail {tail_mass} needs at least {needed} draws, got {m_draws}"),
        ));
    }
    let d = data.dim();
    let per_point: Vec<f64> = (0..data.len())
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(seed, i as u64);
            let mut delta = vec![0.0; d];
            let mut perturbed = vec![0.0; d];
            let x = data.x(i);
            let y = data.y(i);
            let losses: Vec<f64> = (0..m_draws)
                .map(|_| {
                    pert.sample_into(&mut rng, &mut delta);
                    for k in 0..d {
                        perturbed[k] = x[k] + delta[k];
                    }
                    model.loss(&perturbed, y).expect("validated inputs")
                })
                .collect();
            LossSample::uniform(losses)
                .and_then(|s| s.cvar_sorted(tail_mass))
                .expect("uniform sample with tail in (0,1]")
        })
        .collect();
    Ok(per_point.iter().sum::<f64>() / data.len() as f64)
}

/// Clean, augmented, and adversarial accuracy in one pass.
pub fn accuracies(
    model: &DifferentiableModel,
    data: &Dataset,
    pert: &PerturbationSpec,
    aug_m: usize,
    pgd: &PgdConfig,
    seed: u64,
) -> Result<(f64, f64, f64)> {
    Ok((
        clean_acc(model, data),
        aug_acc(model, data, pert, aug_m, seed)?,
        adv_acc(model, data, pert, pgd)?,
    ))
}

/// Full metrics table row for one model.
pub fn metrics_report(
    model: &DifferentiableModel,
    data: &Dataset,
    pert: &PerturbationSpec,
    cfg: &MetricsConfig,
) -> Result<MetricsReport> {
    let (clean, aug, adv) = accuracies(model, data, pert, cfg.aug_samples, &cfg.pgd, cfg.seed)?;
    let mut prob = Vec::with_capacity(cfg.prob_rhos.len());
    for &rho in &cfg.prob_rhos {
        prob.push((rho, prob_acc(model, data, pert, rho, cfg.prob_acc_samples, cfg.seed)?));
    }
    let mut cvar = Vec::with_capacity(cfg.cvar_tails.len());
    for &tail in &cfg.cvar_tails {
        cvar.push((tail, cvar_test(model, data, pert, tail, cfg.cvar_samples, cfg.seed)?));
    }
    Ok(MetricsReport {
        clean_acc: clean,
        aug_acc: aug,
        adv_acc: adv,
        prob_acc: prob,
        cvar_test: cvar,
        n_points: data.len(),
        aug_samples: cfg.aug_samples,
        prob_acc_samples: cfg.prob_acc_samples,
        cvar_samples: cfg.cvar_samples,
    })
}

impl MetricsReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// CSV header matching [`csv_row`](Self::csv_row).
    pub fn csv_header(&self) -> String {
        let mut cols = vec!["clean_acc".to_string(), "aug_acc".to_string(), "adv_acc".to_string()];
        for (rho, _) in &self.prob_acc {
            cols.push(format!("prob_acc_{rho}"));
        }
        for (tail, _) in &self.cvar_test {
            cols.push(format!("cvar_{tail}"));
        }
        cols.join(",")
    }

    pub fn csv_row(&self) -> String {
        let mut cols = vec![
            self.clean_acc.to_string(),
            self.aug_acc.to_string(),
            self.adv_acc.to_string(),
        ];
        for (_, acc) in &self.prob_acc {
            cols.push(acc.to_string());
        }
        for (_, value) in &self.cvar_test {
            cols.push(value.to_string());
        }
        cols.join(",")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussmix::GaussianMixtureSpec;
    use crate::rng;

    /// Linear logistic model aligned with `w`, decision threshold `c`
    /// (bias `-c`).
    fn linear_model(w: &[f64], c: f64) -> DifferentiableModel {
        let mut m = DifferentiableModel::linear_logistic(w.len()).unwrap();
        let mut params = w.to_vec();
        params.push(-c);
        m.set_params(&params).unwrap();
        m
    }

    fn mixture_data(mean_norm: f64, d: usize, n: usize, seed: u64) -> (GaussianMixtureSpec, Dataset) {
        let spec = GaussianMixtureSpec::with_mean_norm(mean_norm, d, 0.5).unwrap();
        let mut rng = rng::seeded(seed);
        let data = spec.sample_dataset(n, &mut rng);
        (spec, data)
    }

    #[test]
    fn perfect_margin_model_aces_everything() {
        // huge mean: every point sits far from the boundary
        let (spec, data) = mixture_data(60.0, 2, 400, 61);
        let model = linear_model(spec.mu(), 0.0);
        let pert = PerturbationSpec::l2(1.0, 2).unwrap();
        let (clean, aug, adv) =
            accuracies(&model, &data, &pert, 20, &PgdConfig::default(), 1).unwrap();
        assert_eq!(clean, 1.0);
        assert_eq!(aug, 1.0);
        assert_eq!(adv, 1.0);
        for rho in [0.0, 0.1, 0.5] {
            assert_eq!(prob_acc(&model, &data, &pert, rho, 50, 2).unwrap(), 1.0);
        }
    }

    #[test]
    fn rho_one_is_vacuous() {
        let (spec, data) = mixture_data(2.0, 2, 300, 62);
        let model = linear_model(spec.mu(), 0.0);
        let pert = PerturbationSpec::l2(1.0, 2).unwrap();
        assert_eq!(prob_acc(&model, &data, &pert, 1.0, 30, 3).unwrap(), 1.0);
    }

    #[test]
    fn zero_radius_collapses_all_accuracies() {
        let (spec, data) = mixture_data(2.0, 2, 500, 63);
        let model = linear_model(spec.mu(), -0.1);
        let pert = PerturbationSpec::l2(0.0, 2).unwrap();
        let (clean, aug, adv) =
            accuracies(&model, &data, &pert, 10, &PgdConfig::default(), 4).unwrap();
        assert_eq!(clean, aug);
        assert_eq!(clean, adv);
    }

    #[test]
    fn adversary_dominates_random_draws() {
        let (spec, data) = mixture_data(2.0, 3, 2_000, 64);
        let model = linear_model(spec.mu(), 0.0);
        let pert = PerturbationSpec::l2(1.0, 3).unwrap();
        let (clean, aug, adv) =
            accuracies(&model, &data, &pert, 50, &PgdConfig::default(), 5).unwrap();
        assert!(adv <= aug + 0.01, "adv {adv} vs aug {aug}");
        assert!(adv <= clean + 0.01, "adv {adv} vs clean {clean}");
        assert!(aug <= 1.0);
    }

    #[test]
    fn prob_acc_matches_closed_form_risk() {
        let d = 2;
        let eps = 1.0;
        let rho = 0.1;
        let (spec, data) = mixture_data(2.0, d, 10_000, 65);
        let star = spec.prob_robust_hypothesis(eps, rho).unwrap();
        let model = linear_model(&star.w, star.c);
        let pert = PerturbationSpec::l2(eps, d).unwrap();
        let acc = prob_acc(&model, &data, &pert, rho, 400, 6).unwrap();
        let expect = 1.0 - spec.prob_risk(&star, eps, rho).unwrap();
        // MC sigma plus finite-sample dataset noise
        let sigma = (expect * (1.0 - expect) / data.len() as f64).sqrt();
        assert!(
            (acc - expect).abs() < 4.0 * sigma + 0.01,
            "prob_acc {acc} vs closed form {expect}"
        );
    }

    #[test]
    fn prob_acc_monotone_in_rho() {
        let (spec, data) = mixture_data(2.0, 2, 1_500, 66);
        let model = linear_model(spec.mu(), 0.0);
        let pert = PerturbationSpec::l2(1.0, 2).unwrap();
        let mut prev = 0.0;
        for rho in [0.0, 0.05, 0.1, 0.3, 1.0] {
            let acc = prob_acc(&model, &data, &pert, rho, 100, 7).unwrap();
            assert!(acc >= prev - 1e-12, "rho={rho}");
            prev = acc;
        }
    }

    #[test]
    fn cvar_test_examples() {
        let (_, data) = mixture_data(2.0, 2, 200, 67);
        let pert = PerturbationSpec::l2(1.0, 2).unwrap();

        // zero model has constant loss ln 2
        let constant = DifferentiableModel::linear_logistic(2).unwrap();
        let v = cvar_test(&constant, &data, &pert, 0.05, 40, 8).unwrap();
        assert!((v - std::f64::consts::LN_2).abs() < 1e-12);

        // tail = 1 is the mean augmented loss
        let model = linear_model(&[1.0, 1.0], 0.0);
        let m_draws = 60;
        let v1 = cvar_test(&model, &data, &pert, 1.0, m_draws, 9).unwrap();
        let mut total = 0.0;
        for i in 0..data.len() {
            let mut rng = rng::stream(9, i as u64);
            let mut delta = vec![0.0; 2];
            for _ in 0..m_draws {
                pert.sample_into(&mut rng, &mut delta);
                let px = [data.x(i)[0] + delta[0], data.x(i)[1] + delta[1]];
                total += model.loss(&px, data.y(i)).unwrap();
            }
        }
        let mean_aug = total / (data.len() * m_draws) as f64;
        assert!((v1 - mean_aug).abs() < 1e-10);

        // tail below 1 dominates the mean
        let v05 = cvar_test(&model, &data, &pert, 0.05, m_draws, 9).unwrap();
        assert!(v05 >= v1 - 1e-12);

        // insufficient draws for the tail is an error
        assert!(cvar_test(&model, &data, &pert, 0.05, 10, 9).is_err());
    }

    #[test]
    fn metrics_are_deterministic() {
        let (spec, data) = mixture_data(2.0, 2, 300, 68);
        let model = linear_model(spec.mu(), 0.0);
        let pert = PerturbationSpec::l2(1.0, 2).unwrap();
        let cfg = MetricsConfig {
            prob_rhos: vec![0.1, 0.01],
            cvar_tails: vec![0.05, 1.0],
            seed: 42,
            ..MetricsConfig::default()
        };
        let a = metrics_report(&model, &data, &pert, &cfg).unwrap();
        let b = metrics_report(&model, &data, &pert, &cfg).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        assert!(a.prob_acc[0].1 >= a.prob_acc[1].1, "prob_acc non-decreasing in rho");
    }
}

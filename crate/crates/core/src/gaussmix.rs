//! Closed-form oracle for the two-class Gaussian mixture.
//!
//! Data follow `x | y ~ N(y * mu, I_d)` with `P[y = +1] = pi`. Under an L2
//! perturbation ball of radius `eps`, the optimal probabilistically robust
//! linear classifier is the Bayes classifier with the mean shrunk by
//! `(1 - v_rho / ||mu||)_+`, where `v_rho` is the distance from the ball
//! center to a spherical cap of measure `rho`. This module provides the cap
//! geometry (exact, via the regularized incomplete beta function, plus the
//! `eps * PhiInv(1 - rho) / sqrt(d)` asymptotic form), the three optimal
//! classifiers, exact standard and probabilistic risks, a Monte-Carlo risk
//! oracle to validate them, and the risk-gap curve over dimension.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::math::{phi, phi_inv, reg_inc_beta};
use crate::perturb::{NormKind, PerturbationSpec};
use crate::rng;

/// Two-class isotropic Gaussian mixture with classes centered at `+-mu`
/// and unit within-class standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixtureSpec {
    mu: Vec<f64>,
    pi_plus: f64,
}

/// Linear classifier `x -> sign(w . x - c)` with `sign(0) := +1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearHypothesis {
    pub w: Vec<f64>,
    pub c: f64,
}

impl LinearHypothesis {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let score: f64 = self.w.iter().zip(x).map(|(wi, xi)| wi * xi).sum();
        if score - self.c >= 0.0 {
            1.0
        } else {
            -1.0
        }
    }

    pub fn w_norm(&self) -> f64 {
        self.w.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

impl GaussianMixtureSpec {
    pub fn new(mu: Vec<f64>, pi_plus: f64) -> Result<Self> {
        if mu.is_empty() {
            return Err(Error::invalid("mu", "dimension must be >= 1"));
        }
        if mu.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { context: "mu" });
        }
        let norm: f64 = mu.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= 0.0 {
            return Err(Error::invalid("mu", "must have positive norm"));
        }
        if !(pi_plus > 0.0 && pi_plus < 1.0) {
            return Err(Error::invalid("pi_plus", format!("must be in (0,1), got {pi_plus}")));
        }
        Ok(Self { mu, pi_plus })
    }

    /// Isotropic spec `mu = m * 1_d / sqrt(d)` whose mean norm stays `m`
    /// for every dimension; the gap curves hold the norm fixed as `d`
    /// grows.
    pub fn with_mean_norm(mean_norm: f64, dim: usize, pi_plus: f64) -> Result<Self> {
        let coord = mean_norm / (dim as f64).sqrt();
        Self::new(vec![coord; dim], pi_plus)
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn pi_plus(&self) -> f64 {
        self.pi_plus
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn mu_norm(&self) -> f64 {
        self.mu.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Log-odds ratio `q = ln[(1 - pi) / pi]`.
    pub fn log_odds(&self) -> f64 {
        ((1.0 - self.pi_plus) / self.pi_plus).ln()
    }

    /// Draws `n` labeled points.
    pub fn sample_dataset<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Dataset {
        let d = self.dim();
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        for _ in 0..n {
            let y = if rng.gen_bool(self.pi_plus) { 1.0 } else { -1.0 };
            let mut x = vec![0.0; d];
            for (xi, mi) in x.iter_mut().zip(&self.mu) {
                let g: f64 = rng.sample(StandardNormal);
                *xi = y * mi + g;
            }
            xs.push(x);
            ys.push(y);
        }
        Dataset::new(xs, ys).expect("generated dataset is consistent")
    }

    /// `sign(x . mu - q/2)`.
    pub fn bayes_hypothesis(&self) -> LinearHypothesis {
        LinearHypothesis {
            w: self.mu.clone(),
            c: self.log_odds() / 2.0,
        }
    }

    /// Optimal probabilistically robust linear classifier: the Bayes
    /// direction with the mean shrunk by `(1 - v_rho / ||mu||)_+`.
    /// `rho = 0` uses `v_0 = eps` and reproduces the adversarially robust
    /// classifier; `rho = 1/2` has `v = 0` and reproduces Bayes.
    pub fn prob_robust_hypothesis(&self, eps: f64, rho: f64) -> Result<LinearHypothesis> {
        let mu_norm = self.mu_norm();
        if !(eps > 0.0) {
            return Err(Error::invalid("eps", format!("must be > 0, got {eps}")));
        }
        if eps >= mu_norm {
            return Err(Error::invalid(
                "eps",
                format!("must be < ||mu|| = {mu_norm}, got {eps}"),
            ));
        }
        if !(0.0..=0.5).contains(&rho) {
            return Err(Error::invalid("rho", format!("must be in [0, 1/2], got {rho}")));
        }
        let v = if rho == 0.0 {
            eps
        } else {
            cap_distance_v_rho(self.dim(), eps, rho)?
        };
        let shrink = (1.0 - v / mu_norm).max(0.0);
        Ok(LinearHypothesis {
            w: self.mu.iter().map(|m| m * shrink).collect(),
            c: self.log_odds() / 2.0,
        })
    }

    /// Exact standard risk of a linear hypothesis.
    pub fn standard_risk(&self, hyp: &LinearHypothesis) -> f64 {
        self.prob_risk_at_v(hyp, 0.0)
    }

    /// Exact probabilistically robust risk: a point is counted iff its
    /// misclassification measure under the uniform ball law exceeds `rho`,
    /// which for a linear classifier happens exactly when the signed margin
    /// falls short of `||w|| * v_rho`.
    pub fn prob_risk(&self, hyp: &LinearHypothesis, eps: f64, rho: f64) -> Result<f64> {
        if !(eps > 0.0) {
            return Err(Error::invalid("eps", format!("must be > 0, got {eps}")));
        }
        if !(0.0..1.0).contains(&rho) {
            return Err(Error::invalid("rho", format!("must be in [0, 1), got {rho}")));
        }
        let v = if rho == 0.0 {
            eps
        } else {
            cap_distance_v_rho(self.dim(), eps, rho)?
        };
        Ok(self.prob_risk_at_v(hyp, v))
    }

    fn prob_risk_at_v(&self, hyp: &LinearHypothesis, v: f64) -> f64 {
        let w_norm = hyp.w_norm();
        if w_norm == 0.0 {
            // constant classifier sign(-c); sign(0) := +1
            return if hyp.c <= 0.0 {
                1.0 - self.pi_plus
            } else {
                self.pi_plus
            };
        }
        let w_dot_mu: f64 = hyp.w.iter().zip(&self.mu).map(|(a, b)| a * b).sum();
        let plus = phi((hyp.c + w_norm * v - w_dot_mu) / w_norm);
        let minus = 1.0 - phi((hyp.c - w_norm * v + w_dot_mu) / w_norm);
        self.pi_plus * plus + (1.0 - self.pi_plus) * minus
    }

    /// Monte-Carlo estimate of the probabilistically robust risk: sample
    /// `n_points` labeled points, estimate each point's misclassification
    /// probability with `m_draws` perturbations, and count points whose
    /// estimate exceeds `rho`. Deterministic given the seed; parallel over
    /// points.
    pub fn mc_prob_risk(
        &self,
        hyp: &LinearHypothesis,
        perturbation: &PerturbationSpec,
        rho: f64,
        n_points: usize,
        m_draws: usize,
        seed: u64,
    ) -> Result<f64> {
        if perturbation.dim != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: perturbation.dim,
            });
        }
        if n_points == 0 || m_draws == 0 {
            return Err(Error::invalid("n_points/m_draws", "must be >= 1"));
        }
        let d = self.dim();
        let bad: usize = (0..n_points)
            .into_par_iter()
            .map(|i| {
                let mut rng = rng::stream(seed, i as u64);
                let y = if rng.gen_bool(self.pi_plus) { 1.0 } else { -1.0 };
                let mut x = vec![0.0; d];
                for (xi, mi) in x.iter_mut().zip(&self.mu) {
                    let g: f64 = rng.sample(StandardNormal);
                    *xi = y * mi + g;
                }
                let mut delta = vec![0.0; d];
                let mut wrong = 0usize;
                let mut perturbed = vec![0.0; d];
                for _ in 0..m_draws {
                    perturbation.sample_into(&mut rng, &mut delta);
                    for k in 0..d {
                        perturbed[k] = x[k] + delta[k];
                    }
                    if hyp.predict(&perturbed) != y {
                        wrong += 1;
                    }
                }
                usize::from(wrong as f64 / m_draws as f64 > rho)
            })
            .sum();
        Ok(bad as f64 / n_points as f64)
    }
}

/// Fraction of the uniform measure on the `d`-dimensional ball lying in
/// the cap `{ delta : delta_1 >= h }`, parameterized by `h_over_eps =
/// h / eps` in `[-1, 1]`. Exact via the regularized incomplete beta
/// function: `(1/2) I_{1 - s^2}((d+1)/2, 1/2)` for `s >= 0`, extended by
/// symmetry for `s < 0`.
pub fn cap_measure(d: usize, h_over_eps: f64) -> Result<f64> {
    if d == 0 {
        return Err(Error::invalid("d", "must be >= 1"));
    }
    if !h_over_eps.is_finite() || h_over_eps.abs() > 1.0 {
        return Err(Error::invalid(
            "h_over_eps",
            format!("must be in [-1, 1], got {h_over_eps}"),
        ));
    }
    if h_over_eps < 0.0 {
        return Ok(1.0 - cap_measure(d, -h_over_eps)?);
    }
    let a = (d as f64 + 1.0) / 2.0;
    Ok(0.5 * reg_inc_beta(a, 0.5, 1.0 - h_over_eps * h_over_eps))
}

/// Inverts [`cap_measure`]: the signed distance `v` with cap measure
/// exactly `rho`, for `rho` in (0, 1). Values above 1/2 use the symmetry
/// `v_rho = -v_{1 - rho}`.
pub fn cap_distance_v_rho(d: usize, eps: f64, rho: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::invalid("eps", format!("must be > 0, got {eps}")));
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::invalid("rho", format!("must be in (0,1), got {rho}")));
    }
    if rho > 0.5 {
        return Ok(-cap_distance_v_rho(d, eps, 1.0 - rho)?);
    }
    // cap_measure(d, s) is continuous and strictly decreasing on [0, 1]
    // from 1/2 to 0; bisect for s with measure rho.
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            return Ok(eps * mid);
        }
        let m = cap_measure(d, mid)?;
        if m > rho {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s = 0.5 * (lo + hi);
    let err = (cap_measure(d, s)? - rho).abs();
    if err > 1e-9 {
        return Err(Error::Convergence {
            context: "cap_distance_v_rho bisection",
            iterations: 200,
        });
    }
    Ok(eps * s)
}

/// High-dimensional approximation `eps * PhiInv(1 - rho) / sqrt(d)`,
/// exposed separately so the approximation claim itself is testable.
pub fn cap_distance_asymptotic(d: usize, eps: f64, rho: f64) -> Result<f64> {
    if d == 0 {
        return Err(Error::invalid("d", "must be >= 1"));
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::invalid("rho", format!("must be in (0,1), got {rho}")));
    }
    Ok(eps * phi_inv(1.0 - rho) / (d as f64).sqrt())
}

/// One row of the risk-gap curve.
#[derive(Debug, Clone, Serialize)]
pub struct GapPoint {
    pub d: usize,
    pub rho: f64,
    pub gap_closed_form: f64,
    pub gap_mc: Option<f64>,
    pub mc_stderr: Option<f64>,
}

/// Gap between the best probabilistically robust risk and the Bayes
/// standard risk, per dimension, with `||mu||` held fixed across `d`.
pub fn gap_curve(
    mean_norm: f64,
    pi_plus: f64,
    eps: f64,
    rho: f64,
    dims: &[usize],
) -> Result<Vec<GapPoint>> {
    dims.iter()
        .map(|&d| {
            let spec = GaussianMixtureSpec::with_mean_norm(mean_norm, d, pi_plus)?;
            let hyp = spec.prob_robust_hypothesis(eps, rho)?;
            let gap = spec.prob_risk(&hyp, eps, rho)? - spec.standard_risk(&spec.bayes_hypothesis());
            Ok(GapPoint {
                d,
                rho,
                gap_closed_form: gap,
                gap_mc: None,
                mc_stderr: None,
            })
        })
        .collect()
}

/// Same curve with a Monte-Carlo cross-check column per dimension.
pub fn gap_curve_with_mc(
    mean_norm: f64,
    pi_plus: f64,
    eps: f64,
    rho: f64,
    dims: &[usize],
    n_points: usize,
    m_draws: usize,
    seed: u64,
) -> Result<Vec<GapPoint>> {
    let mut points = gap_curve(mean_norm, pi_plus, eps, rho, dims)?;
    for point in points.iter_mut() {
        let spec = GaussianMixtureSpec::with_mean_norm(mean_norm, point.d, pi_plus)?;
        let hyp = spec.prob_robust_hypothesis(eps, rho)?;
        let pert = PerturbationSpec::new(NormKind::L2, eps, point.d)?;
        let mc_risk = spec.mc_prob_risk(&hyp, &pert, rho, n_points, m_draws, seed)?;
        let bayes_sr = spec.standard_risk(&spec.bayes_hypothesis());
        point.gap_mc = Some(mc_risk - bayes_sr);
        point.mc_stderr = Some((mc_risk * (1.0 - mc_risk) / n_points as f64).sqrt());
    }
    Ok(points)
}

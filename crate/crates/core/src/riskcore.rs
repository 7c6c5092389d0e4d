//! Empirical rho-essential-supremum and CVaR over finite loss samples.
//!
//! A [`LossSample`] is a weighted finite collection of loss values standing
//! in for the law of a perturbed loss. `rho_esssup` is the smallest
//! threshold exceeded on weight at most `rho` (strict exceedance), and
//! `cvar_sorted` averages the worst `rho` probability mass with the
//! boundary atom split fractionally, which makes the estimator exact on
//! discrete laws. The variational form and its alpha-subgradient are the
//! pieces the training loop consumes.

use crate::error::{Error, Result};

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Weighted empirical loss distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct LossSample {
    values: Vec<f64>,
    weights: Vec<f64>,
}

/// Outcome of the variational CVaR computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvarResult {
    /// Threshold at which the variational objective was evaluated.
    pub alpha_star: f64,
    /// CVaR value (exact mode) or the objective at the final iterate.
    pub value: f64,
    /// Tail mass the result refers to.
    pub tail_mass: f64,
}

impl LossSample {
    /// Uniformly weighted sample.
    pub fn uniform(values: Vec<f64>) -> Result<Self> {
        let m = values.len();
        if m == 0 {
            return Err(Error::invalid("values", "must be non-empty"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { context: "loss values" });
        }
        let w = 1.0 / m as f64;
        Ok(Self {
            values,
            weights: vec![w; m],
        })
    }

    pub fn weighted(values: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("values", "must be non-empty"));
        }
        if values.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: values.len(),
                got: weights.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { context: "loss values" });
        }
        if weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
            return Err(Error::invalid("weights", "must all be positive"));
        }
        // compensated sum so the tolerance reflects input error, not
        // accumulation error on large samples
        let mut total = 0.0;
        let mut carry = 0.0;
        for w in &weights {
            let y = w - carry;
            let t = total + y;
            carry = (t - total) - y;
            total = t;
        }
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::invalid(
                "weights",
                format!("must sum to 1 within {WEIGHT_SUM_TOL}, got {total}"),
            ));
        }
        Ok(Self { values, weights })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weighted_mean(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.weights)
            .map(|(v, w)| v * w)
            .sum()
    }

    fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Indices sorted by value, descending.
    fn order_desc(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.values.len()).collect();
        idx.sort_by(|&a, &b| self.values[b].total_cmp(&self.values[a]));
        idx
    }

    /// Empirical rho-essential supremum: the smallest `u` such that the
    /// weight of `{values > u}` is at most `rho`. For uniform weights this
    /// is the ascending order statistic with index `M - floor(rho * M)`;
    /// `rho = 0` yields the maximum and `rho = 1` the minimum of the
    /// support.
    pub fn rho_esssup(&self, rho: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::invalid("rho", format!("must be in [0,1], got {rho}")));
        }
        if rho >= 1.0 {
            return Ok(self.min_value());
        }
        let order = self.order_desc();
        // Walk values descending; `above` is the weight strictly greater
        // than the current distinct value. The first distinct value whose
        // strictly-above weight exceeds rho ends the search.
        let mut above = 0.0;
        let mut result = self.values[order[0]];
        let mut i = 0;
        while i < order.len() {
            let v = self.values[order[i]];
            if above > rho {
                break;
            }
            result = v;
            // consume the whole tie group
            while i < order.len() && self.values[order[i]] == v {
                above += self.weights[order[i]];
                i += 1;
            }
        }
        Ok(result)
    }

    /// CVaR at tail mass `rho` in (0, 1]: the average of the worst `rho`
    /// probability mass, splitting the boundary atom fractionally.
    pub fn cvar_sorted(&self, tail_mass: f64) -> Result<f64> {
        if !(tail_mass > 0.0 && tail_mass <= 1.0) {
            return Err(Error::invalid(
                "tail_mass",
                format!("must be in (0,1], got {tail_mass}; use rho_esssup for rho = 0"),
            ));
        }
        let order = self.order_desc();
        let mut acc = 0.0;
        let mut total = 0.0;
        for &i in &order {
            let w = self.weights[i];
            if acc + w <= tail_mass {
                total += w * self.values[i];
                acc += w;
            } else {
                total += (tail_mass - acc) * self.values[i];
                break;
            }
        }
        // acc can fall short of tail_mass only by the weight-sum tolerance.
        Ok(total / tail_mass)
    }

    /// Subgradient in alpha of the variational CVaR objective,
    /// `1 - (1/rho) * sum_k w_k * 1[values_k >= alpha]` (non-strict
    /// indicator).
    pub fn cvar_alpha_gradient(&self, alpha: f64, tail_mass: f64) -> f64 {
        let hit: f64 = self
            .values
            .iter()
            .zip(&self.weights)
            .filter(|(v, _)| **v >= alpha)
            .map(|(_, w)| w)
            .sum();
        1.0 - hit / tail_mass
    }

    /// Variational CVaR objective `alpha + (1/rho) * E[(L - alpha)_+]`.
    pub fn cvar_objective(&self, alpha: f64, tail_mass: f64) -> f64 {
        let hinge: f64 = self
            .values
            .iter()
            .zip(&self.weights)
            .map(|(v, w)| w * (v - alpha).max(0.0))
            .sum();
        alpha + hinge / tail_mass
    }

    /// Runs `steps` subgradient iterations on the variational objective
    /// starting from `alpha0` and reports the objective at the final
    /// iterate, which upper-bounds the CVaR.
    pub fn cvar_variational(
        &self,
        tail_mass: f64,
        steps: usize,
        step_size: f64,
        alpha0: f64,
    ) -> Result<CvarResult> {
        if !(tail_mass > 0.0 && tail_mass <= 1.0) {
            return Err(Error::invalid(
                "tail_mass",
                format!("must be in (0,1], got {tail_mass}"),
            ));
        }
        if steps == 0 {
            return Err(Error::invalid("steps", "must be >= 1"));
        }
        let mut alpha = alpha0;
        for _ in 0..steps {
            alpha -= step_size * self.cvar_alpha_gradient(alpha, tail_mass);
            if !alpha.is_finite() {
                return Err(Error::NonFinite { context: "cvar_variational alpha" });
            }
        }
        Ok(CvarResult {
            alpha_star: alpha,
            value: self.cvar_objective(alpha, tail_mass),
            tail_mass,
        })
    }

    /// Exact minimization of the variational objective. The objective is
    /// convex piecewise linear with breakpoints at the sample values, so
    /// scanning them is exhaustive. The reported threshold is the upper
    /// (1 - rho)-quantile, which is always a minimizer.
    pub fn cvar_variational_exact(&self, tail_mass: f64) -> Result<CvarResult> {
        if !(tail_mass > 0.0 && tail_mass <= 1.0) {
            return Err(Error::invalid(
                "tail_mass",
                format!("must be in (0,1], got {tail_mass}"),
            ));
        }
        let mut best = f64::INFINITY;
        for v in &self.values {
            let obj = self.cvar_objective(*v, tail_mass);
            if obj < best {
                best = obj;
            }
        }
        // Largest sample value with weight{values >= v} >= rho. The
        // subdifferential there contains zero, so it minimizes the
        // objective.
        let order = self.order_desc();
        let mut at_least = 0.0;
        let mut alpha_star = self.min_value();
        for &i in &order {
            at_least += self.weights[i];
            if at_least >= tail_mass {
                alpha_star = self.values[i];
                break;
            }
        }
        Ok(CvarResult {
            alpha_star,
            value: best,
            tail_mass,
        })
    }
}

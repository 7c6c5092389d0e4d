//! Differentiable hypotheses with analytic gradients.
//!
//! Three kinds: a linear logistic classifier, a linear least-squares
//! regressor, and a one-hidden-layer tanh MLP classifier. Labels for the
//! classifiers live in `{+1, -1}`. Gradients are written out by hand and
//! checked against finite differences; tanh keeps the training objective's
//! hinge as the only nonsmooth piece.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    LinearLogistic,
    LinearSquared,
    MlpLogistic,
}

/// Parameterized hypothesis exposing loss values and parameter gradients.
///
/// Serializes as `{kind, d, hidden_width?, params: [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifferentiableModel {
    kind: ModelKind,
    d: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    hidden_width: Option<usize>,
    params: Vec<f64>,
}

/// `ln(1 + exp(-m))` computed stably for either sign of the margin.
fn logistic_loss_of_margin(m: f64) -> f64 {
    if m > 0.0 {
        (-m).exp().ln_1p()
    } else {
        -m + m.exp().ln_1p()
    }
}

/// Standard logistic sigmoid.
fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

impl DifferentiableModel {
    /// Linear logistic classifier with a bias term; parameters start at
    /// zero.
    pub fn linear_logistic(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("d", "must be >= 1"));
        }
        Ok(Self {
            kind: ModelKind::LinearLogistic,
            d,
            hidden_width: None,
            params: vec![0.0; d + 1],
        })
    }

    /// Linear regressor `f(x) = theta . x`; parameters start at zero.
    pub fn linear_squared(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("d", "must be >= 1"));
        }
        Ok(Self {
            kind: ModelKind::LinearSquared,
            d,
            hidden_width: None,
            params: vec![0.0; d],
        })
    }

    /// One-hidden-layer tanh classifier, seeded uniform `+-1/sqrt(fan_in)`
    /// initialization.
    pub fn mlp_logistic<R: Rng + ?Sized>(d: usize, hidden_width: usize, rng: &mut R) -> Result<Self> {
        if d == 0 || hidden_width == 0 {
            return Err(Error::invalid("d/hidden_width", "must be >= 1"));
        }
        let n_params = hidden_width * d + hidden_width + hidden_width + 1;
        let mut params = vec![0.0; n_params];
        let in_bound = 1.0 / (d as f64).sqrt();
        let out_bound = 1.0 / (hidden_width as f64).sqrt();
        for p in params.iter_mut().take(hidden_width * d + hidden_width) {
            *p = rng.gen_range(-in_bound..in_bound);
        }
        for p in params.iter_mut().skip(hidden_width * d + hidden_width) {
            *p = rng.gen_range(-out_bound..out_bound);
        }
        Ok(Self {
            kind: ModelKind::MlpLogistic,
            d,
            hidden_width: Some(hidden_width),
            params,
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn hidden_width(&self) -> Option<usize> {
        self.hidden_width
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::DimensionMismatch {
                expected: self.params.len(),
                got: params.len(),
            });
        }
        self.params.copy_from_slice(params);
        Ok(())
    }

    /// First `d` parameters: the input weights of the linear kinds.
    pub fn linear_weights(&self) -> &[f64] {
        &self.params[..self.d]
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: x.len(),
            });
        }
        Ok(())
    }

    fn check_label(&self, y: f64) -> Result<()> {
        match self.kind {
            ModelKind::LinearSquared => {
                if y.is_finite() {
                    Ok(())
                } else {
                    Err(Error::NonFinite { context: "regression target" })
                }
            }
            _ => {
                if y == 1.0 || y == -1.0 {
                    Ok(())
                } else {
                    Err(Error::invalid("y", format!("classifier labels must be +-1, got {y}")))
                }
            }
        }
    }

    /// Raw score: the logit of the classifiers, or the regression output.
    pub fn logit(&self, x: &[f64]) -> f64 {
        match self.kind {
            ModelKind::LinearSquared => self
                .params
                .iter()
                .zip(x)
                .map(|(p, xi)| p * xi)
                .sum(),
            ModelKind::LinearLogistic => {
                let w = &self.params[..self.d];
                let b = self.params[self.d];
                w.iter().zip(x).map(|(wi, xi)| wi * xi).sum::<f64>() + b
            }
            ModelKind::MlpLogistic => {
                let h = self.hidden_width.expect("mlp has width");
                let (w1, rest) = self.params.split_at(h * self.d);
                let (b1, rest) = rest.split_at(h);
                let (w2, b2) = rest.split_at(h);
                let mut out = b2[0];
                for j in 0..h {
                    let pre: f64 = w1[j * self.d..(j + 1) * self.d]
                        .iter()
                        .zip(x)
                        .map(|(w, xi)| w * xi)
                        .sum::<f64>()
                        + b1[j];
                    out += w2[j] * pre.tanh();
                }
                out
            }
        }
    }

    /// Loss value: logistic loss on the logit for the classifiers,
    /// squared error for the regressor.
    pub fn loss(&self, x: &[f64], y: f64) -> Result<f64> {
        self.check_input(x)?;
        self.check_label(y)?;
        let out = self.logit(x);
        Ok(match self.kind {
            ModelKind::LinearSquared => (out - y) * (out - y),
            _ => logistic_loss_of_margin(y * out),
        })
    }

    /// Analytic gradient of the loss with respect to the parameters.
    pub fn loss_grad(&self, x: &[f64], y: f64) -> Result<Vec<f64>> {
        let mut grad = vec![0.0; self.params.len()];
        self.loss_grad_into(x, y, &mut grad)?;
        Ok(grad)
    }

    /// Accumulates `scale * dloss/dtheta` into `acc`.
    pub fn loss_grad_accumulate(&self, x: &[f64], y: f64, scale: f64, acc: &mut [f64]) -> Result<()> {
        self.check_input(x)?;
        self.check_label(y)?;
        assert_eq!(acc.len(), self.params.len());
        match self.kind {
            ModelKind::LinearSquared => {
                let r = self.logit(x) - y;
                let c = 2.0 * r * scale;
                for (g, xi) in acc.iter_mut().zip(x) {
                    *g += c * xi;
                }
            }
            ModelKind::LinearLogistic => {
                let out = self.logit(x);
                // dloss/dlogit = -y * sigma(-y * logit)
                let dl = -y * sigmoid(-y * out) * scale;
                for (g, xi) in acc[..self.d].iter_mut().zip(x) {
                    *g += dl * xi;
                }
                acc[self.d] += dl;
            }
            ModelKind::MlpLogistic => {
                let h = self.hidden_width.expect("mlp has width");
                let (w1, rest) = self.params.split_at(h * self.d);
                let (b1, rest) = rest.split_at(h);
                let (w2, _b2) = rest.split_at(h);
                let mut acts = vec![0.0; h];
                let mut out = self.params[h * self.d + h + h];
                for j in 0..h {
                    let pre: f64 = w1[j * self.d..(j + 1) * self.d]
                        .iter()
                        .zip(x)
                        .map(|(w, xi)| w * xi)
                        .sum::<f64>()
                        + b1[j];
                    acts[j] = pre.tanh();
                    out += w2[j] * acts[j];
                }
                let dl = -y * sigmoid(-y * out) * scale;
                let (gw1, grest) = acc.split_at_mut(h * self.d);
                let (gb1, grest) = grest.split_at_mut(h);
                let (gw2, gb2) = grest.split_at_mut(h);
                for j in 0..h {
                    gw2[j] += dl * acts[j];
                    let dpre = dl * w2[j] * (1.0 - acts[j] * acts[j]);
                    gb1[j] += dpre;
                    for (g, xi) in gw1[j * self.d..(j + 1) * self.d].iter_mut().zip(x) {
                        *g += dpre * xi;
                    }
                }
                gb2[0] += dl;
            }
        }
        Ok(())
    }

    fn loss_grad_into(&self, x: &[f64], y: f64, grad: &mut [f64]) -> Result<()> {
        grad.fill(0.0);
        self.loss_grad_accumulate(x, y, 1.0, grad)
    }

    /// Gradient of the loss with respect to the input, used by the
    /// projected-gradient attack.
    pub fn loss_input_grad(&self, x: &[f64], y: f64) -> Result<Vec<f64>> {
        self.check_input(x)?;
        self.check_label(y)?;
        Ok(match self.kind {
            ModelKind::LinearSquared => {
                let r = self.logit(x) - y;
                self.params.iter().map(|p| 2.0 * r * p).collect()
            }
            ModelKind::LinearLogistic => {
                let dl = -y * sigmoid(-y * self.logit(x));
                self.params[..self.d].iter().map(|w| dl * w).collect()
            }
            ModelKind::MlpLogistic => {
                let h = self.hidden_width.expect("mlp has width");
                let (w1, rest) = self.params.split_at(h * self.d);
                let (b1, rest) = rest.split_at(h);
                let (w2, b2) = rest.split_at(h);
                let mut out = b2[0];
                let mut acts = vec![0.0; h];
                for j in 0..h {
                    let pre: f64 = w1[j * self.d..(j + 1) * self.d]
                        .iter()
                        .zip(x)
                        .map(|(w, xi)| w * xi)
                        .sum::<f64>()
                        + b1[j];
                    acts[j] = pre.tanh();
                    out += w2[j] * acts[j];
                }
                let dl = -y * sigmoid(-y * out);
                let mut grad = vec![0.0; self.d];
                for j in 0..h {
                    let dpre = dl * w2[j] * (1.0 - acts[j] * acts[j]);
                    for (g, w) in grad.iter_mut().zip(&w1[j * self.d..(j + 1) * self.d]) {
                        *g += dpre * w;
                    }
                }
                grad
            }
        })
    }

    /// Label prediction with `sign(0) := +1`.
    pub fn predict_label(&self, x: &[f64]) -> f64 {
        if self.logit(x) >= 0.0 {
            1.0
        } else {
            -1.0
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(text)?;
        let expected = match model.kind {
            ModelKind::LinearLogistic => model.d + 1,
            ModelKind::LinearSquared => model.d,
            ModelKind::MlpLogistic => {
                let h = model
                    .hidden_width
                    .ok_or_else(|| Error::invalid("hidden_width", "required for MlpLogistic"))?;
                h * model.d + 2 * h + 1
            }
        };
        if model.params.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: model.params.len(),
            });
        }
        Ok(model)
    }
}
